#pragma once

#include "distvar/opf.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace distvar {

/// Shape constants of the synthetic day profiles. Times are hours after midnight.
struct ProfileParameters {
    double sunrise = 6.75; // November, southern California
    double sunset = 16.75;
    double arc_exponent = 1.3; // pv = peak * sin(pi * x)^arc_exponent over daylight

    double clear_peak_lo = 0.92;
    double clear_peak_hi = 1.0;
    double cloudy_peak_lo = 0.25;
    double cloudy_peak_hi = 0.45;
    double cloudy_ripple = 0.12;    // relative amplitude of slow cloud-thickness drift
    double cloudy_ripple_period = 2.5; // hours

    // Intermittent clear: dropouts start as a Poisson process and multiply the
    // arc by (1 - depth) for their duration.
    double int_clear_rate = 1.0; // per daylight hour
    double int_clear_min_minutes = 5.0;
    double int_clear_max_minutes = 25.0;
    double int_clear_depth_lo = 0.3;
    double int_clear_depth_hi = 0.6;
    // Intermittent cloudy: a square wave of cloud passages with seeded period
    // and phase, depth drawn per passage.
    double int_cloudy_peak_lo = 0.97;
    double int_cloudy_peak_hi = 1.0;
    double int_cloudy_period_lo = 20.0; // minutes
    double int_cloudy_period_hi = 40.0;
    double int_cloudy_duty = 0.3; // fraction of each period under cloud
    double int_cloudy_depth_lo = 0.85;
    double int_cloudy_depth_hi = 0.95;

    // Load as a fraction of feeder peak: night base, daytime plateau, evening peak.
    double load_night = 0.12;
    double load_day = 0.18;
    double load_evening = 0.26;
    double load_evening_hour = 18.5;
    double load_noise = 0.03; // relative, per sample
};

/// Settings shared by the command-line studies. Read from a key = value file:
///
///   # comment
///   loss.c_s = 0.01           inverter standby loss, fraction of rating
///   loss.c_v = 0.01           linear loss coefficient
///   loss.c_r = 0.01           quadratic loss coefficient
///   cvr.exponent = 1          overrides every load's exponent (0..2)
///   voltage.tolerance = 3     percent; bounds become 1 -+ tol at every bus
///   solver.tol = 1e-8         conic stopping tolerance
///   solver.max_iter = 100
///   exactness.tol = 1e-6      relative tightness bound
///   caps = off                shunt capacitors in service (on/off)
///   workers = 0               threads for sweeps and time series, 0 = all cores
///   pv.capacity_mw = 5        PV plant output at profile fraction 1
///   profile.<name> = value    any ProfileParameters field, e.g. profile.sunrise = 7
///
/// Unknown keys are errors.
struct StudyConfig {
    OpfConfig opf;
    std::optional<double> voltage_tolerance; // fraction
    bool caps_on = false;
    unsigned workers = 0;
    double pv_capacity_mw = 5.0;
    ProfileParameters profile;

    /// Applies one key = value pair. Throws ParseError on an unknown key or bad value.
    void set(const std::string& key, const std::string& value);
};

StudyConfig parse_study_config(std::istream& in);
StudyConfig load_study_config(const std::filesystem::path& path);

} // namespace distvar
