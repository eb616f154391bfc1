#include "distvar/config.hpp"

#include "distvar/error.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <string_view>
#include <utility>

#include <fmt/format.h>

namespace distvar {

namespace {

std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, std::string_view v)
{
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ParseError(fmt::format("{}: expected a number, got '{}'", key, v));
    }
    return out;
}

long to_int(const std::string& key, std::string_view v)
{
    long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size() || out < 0) {
        throw ParseError(fmt::format("{}: expected a nonnegative integer, got '{}'", key, v));
    }
    return out;
}

bool to_bool(const std::string& key, std::string_view v)
{
    if (v == "on" || v == "true" || v == "1") {
        return true;
    }
    if (v == "off" || v == "false" || v == "0") {
        return false;
    }
    throw ParseError(fmt::format("{}: expected on/off, got '{}'", key, v));
}

constexpr std::pair<std::string_view, double ProfileParameters::*> kProfileFields[] = {
    {"sunrise", &ProfileParameters::sunrise},
    {"sunset", &ProfileParameters::sunset},
    {"arc_exponent", &ProfileParameters::arc_exponent},
    {"clear_peak_lo", &ProfileParameters::clear_peak_lo},
    {"clear_peak_hi", &ProfileParameters::clear_peak_hi},
    {"cloudy_peak_lo", &ProfileParameters::cloudy_peak_lo},
    {"cloudy_peak_hi", &ProfileParameters::cloudy_peak_hi},
    {"cloudy_ripple", &ProfileParameters::cloudy_ripple},
    {"cloudy_ripple_period", &ProfileParameters::cloudy_ripple_period},
    {"int_clear_rate", &ProfileParameters::int_clear_rate},
    {"int_clear_min_minutes", &ProfileParameters::int_clear_min_minutes},
    {"int_clear_max_minutes", &ProfileParameters::int_clear_max_minutes},
    {"int_clear_depth_lo", &ProfileParameters::int_clear_depth_lo},
    {"int_clear_depth_hi", &ProfileParameters::int_clear_depth_hi},
    {"int_cloudy_peak_lo", &ProfileParameters::int_cloudy_peak_lo},
    {"int_cloudy_peak_hi", &ProfileParameters::int_cloudy_peak_hi},
    {"int_cloudy_period_lo", &ProfileParameters::int_cloudy_period_lo},
    {"int_cloudy_period_hi", &ProfileParameters::int_cloudy_period_hi},
    {"int_cloudy_duty", &ProfileParameters::int_cloudy_duty},
    {"int_cloudy_depth_lo", &ProfileParameters::int_cloudy_depth_lo},
    {"int_cloudy_depth_hi", &ProfileParameters::int_cloudy_depth_hi},
    {"load_night", &ProfileParameters::load_night},
    {"load_day", &ProfileParameters::load_day},
    {"load_evening", &ProfileParameters::load_evening},
    {"load_evening_hour", &ProfileParameters::load_evening_hour},
    {"load_noise", &ProfileParameters::load_noise},
};

LossCoefficients& loss_of(StudyConfig& c)
{
    if (!c.opf.loss) {
        c.opf.loss = LossCoefficients{};
    }
    return *c.opf.loss;
}

} // namespace

void StudyConfig::set(const std::string& key, const std::string& value)
{
    const std::string_view v = trim(value);
    if (key == "loss.c_s") {
        loss_of(*this).c_s = to_double(key, v);
    } else if (key == "loss.c_v") {
        loss_of(*this).c_v = to_double(key, v);
    } else if (key == "loss.c_r") {
        loss_of(*this).c_r = to_double(key, v);
    } else if (key == "cvr.exponent") {
        opf.cvr_exponent = to_double(key, v);
    } else if (key == "voltage.tolerance") {
        voltage_tolerance = to_double(key, v) / 100.0;
    } else if (key == "solver.tol") {
        opf.solver.tol = to_double(key, v);
    } else if (key == "solver.max_iter") {
        opf.solver.max_iter = static_cast<int>(to_int(key, v));
    } else if (key == "exactness.tol") {
        opf.exactness_tol = to_double(key, v);
    } else if (key == "caps") {
        caps_on = to_bool(key, v);
    } else if (key == "workers") {
        workers = static_cast<unsigned>(to_int(key, v));
    } else if (key == "pv.capacity_mw") {
        pv_capacity_mw = to_double(key, v);
    } else if (key.starts_with("profile.")) {
        const std::string_view field = std::string_view(key).substr(8);
        for (const auto& [name, member] : kProfileFields) {
            if (name == field) {
                profile.*member = to_double(key, v);
                return;
            }
        }
        throw ParseError(fmt::format("unknown profile parameter '{}'", field));
    } else {
        throw ParseError(fmt::format("unknown key '{}'", key));
    }
}

StudyConfig parse_study_config(std::istream& in)
{
    StudyConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view s = trim(line);
        if (const auto hash = s.find('#'); hash != std::string_view::npos) {
            s = trim(s.substr(0, hash));
        }
        if (s.empty()) {
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError("expected key = value", line_no);
        }
        const std::string key(trim(s.substr(0, eq)));
        const std::string value(trim(s.substr(eq + 1)));
        if (key.empty() || value.empty()) {
            throw ParseError("expected key = value", line_no);
        }
        try {
            cfg.set(key, value);
        } catch (const ParseError& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    cfg.opf.validate();
    return cfg;
}

StudyConfig load_study_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(fmt::format("cannot open config file {}", path.string()));
    }
    return parse_study_config(in);
}

} // namespace distvar
