#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <functional>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace distvar::conic {

enum class ConeKind { free, nonneg, soc, rsoc };

/// One block of consecutive variables.
///  - free:   unrestricted
///  - nonneg: x >= 0 componentwise
///  - soc:    x0 >= ||x1:||
///  - rsoc:   2 x0 x1 >= ||x2:||^2, x0, x1 >= 0
struct ConeBlock {
    ConeKind kind = ConeKind::free;
    int dim = 0;
};

/// minimize c'x  subject to  A x = b,  x in K = K_1 x ... x K_p.
struct ConicProgram {
    Eigen::VectorXd c;
    Eigen::SparseMatrix<double> A;
    Eigen::VectorXd b;
    std::vector<ConeBlock> cones;

    int num_variables() const;
    /// Throws distvar::Error when dimensions or cone sizes are inconsistent.
    void validate() const;
};

enum class Status { optimal, infeasible, unbounded, max_iter };

std::string_view to_string(Status status);

struct KktResiduals {
    double primal_feas = 0.0; // ||Ax - b|| / (1 + ||b||)
    double dual_feas = 0.0;   // ||A'y + z - c|| / (1 + ||c||)
    double gap = 0.0;         // |c'x - b'y| / (1 + |c'x|)
};

struct IterateInfo {
    int iteration = 0;
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    double primal_residual = 0.0; // ||Ax - b||
    double dual_residual = 0.0;   // ||A'y + z - c||
    double mu = 0.0;
    double step = 0.0;
};

struct Settings {
    double tol = 1e-8;
    int max_iter = 100;
    double regularization = 1e-8;
    double step_fraction = 0.99;
    int refinement_steps = 10;
    /// Iterations without feasibility progress before declaring infeasibility.
    int stall_window = 10;
    std::function<void(const IterateInfo&)> on_iterate;
};

struct ConicSolution {
    Eigen::VectorXd x;
    Eigen::VectorXd y;
    Eigen::VectorXd z;
    Status status = Status::max_iter;
    int iterations = 0;
    KktResiduals residuals;

    double primal_objective(const ConicProgram& prog) const { return prog.c.dot(x); }
};

/// Primal-dual interior point method with Nesterov-Todd scaling and a
/// Mehrotra predictor-corrector step. The Newton system is solved as a
/// regularised quasi-definite KKT system with a sparse LDL' factorization
/// followed by iterative refinement.
ConicSolution solve_conic(const ConicProgram& prog, const Settings& settings = {});

KktResiduals kkt_residuals(const ConicProgram& prog, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& y, const Eigen::VectorXd& z);

inline KktResiduals kkt_residuals(const ConicProgram& prog, const ConicSolution& sol)
{
    return kkt_residuals(prog, sol.x, sol.y, sol.z);
}

/// Largest violation of cone membership over all blocks (0 when inside).
/// For rsoc blocks this is max(-x0, -x1, ||x2:||^2 - 2 x0 x1).
double cone_violation(const ConicProgram& prog, const Eigen::VectorXd& x);

/// Plain-text dump: header line, cone list, then `c i v`, `A i j v`, `b i v` triplets.
void write_triplets(std::ostream& out, const ConicProgram& prog);

} // namespace distvar::conic
