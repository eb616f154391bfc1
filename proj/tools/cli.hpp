#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace distvar::cli {

enum ExitCode { ok = 0, error = 1, infeasible = 2 };

/// Runs one command line (without the program name). Tables go to `out`,
/// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace distvar::cli
