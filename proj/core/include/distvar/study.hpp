#pragma once

#include "distvar/config.hpp"
#include "distvar/opf.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace distvar {

enum class SweepQuantity { pv_output, load_scale };

/// Uniform sweep of one scenario field. PV values are pu real output applied
/// to every inverter; load values are fractions of peak.
struct SweepSpec {
    SweepQuantity quantity = SweepQuantity::pv_output;
    double lo = 0.0;
    double hi = 1.0;
    int steps = 21;
    Scenario base; // fixed fields; the swept one is overwritten
    OpfConfig config;
    unsigned workers = 0;

    /// Throws ScenarioError unless lo < hi and steps >= 2.
    void validate() const;
    double value(int k) const;
    Scenario scenario(const FeederModel& model, int k) const;
};

struct SweepRow {
    double value = 0.0;
    conic::Status status = conic::Status::max_iter;
    std::vector<double> q_g_star; // pu, per inverter
    CostBreakdown costs;
    double objective = 0.0;
    double max_gap = 0.0;
    bool exact = false; // passed the tightness check
    bool usable() const { return status == conic::Status::optimal && exact; }
};

struct SweepResult {
    SweepSpec spec;
    std::vector<int> inverter_ids; // bus ids, for column names
    std::vector<SweepRow> rows;

    /// Columns: p_g_mw or load_scale, q_g_star_mvar (one per inverter, suffixed
    /// by bus id when there are several), line_loss_mw, cvr_cost_mw,
    /// inverter_loss_mw, total_mw, status, exact. Failed rows leave numbers empty.
    void write_csv(std::ostream& out, const Bases& bases) const;
    /// q* of the first inverter over usable rows, in row order.
    std::vector<double> q_series(std::size_t inverter = 0) const;
};

SweepResult sweep_pv(const FeederModel& model, SweepSpec spec);
SweepResult sweep_load(const FeederModel& model, SweepSpec spec);

struct ProfileRow {
    double p_g = 0.0; // pu, every inverter
    bool converged = false;
    double v_pcc = 0.0;
    double v_min = 0.0;
    double v_max = 0.0;
    int v_min_bus = 0; // bus ids
    int v_max_bus = 0;
};

struct VoltageProfile {
    int pcc_bus = 0;
    std::vector<ProfileRow> rows;

    /// max - min of the PCC voltage over converged rows.
    double pcc_span() const;
    /// Columns: p_g_mw,v_pcc,v_min,v_min_bus,v_max,v_max_bus,status.
    void write_csv(std::ostream& out, const Bases& bases) const;
};

/// PV sweep with every inverter at unity power factor, solved by sweep only.
/// The PCC is the first inverter's bus.
VoltageProfile voltage_profile_nocontrol(const FeederModel& model, const SweepSpec& spec);

enum class DayClass { clear, cloudy, intermittent_clear, intermittent_cloudy };

std::string_view to_string(DayClass c);
/// Throws ScenarioError on an unknown name.
DayClass parse_day_class(std::string_view name);

struct DaySample {
    double t = 0.0; // hours after midnight
    double pv_fraction = 0.0;
    double load_fraction = 0.0;
};

struct DayProfile {
    DayClass day_class = DayClass::clear;
    double cadence_minutes = 15.0;
    std::vector<DaySample> samples;

    /// Sample variance of pv_fraction between sunrise and sunset.
    double daylight_variance(const ProfileParameters& params = {}) const;
    /// Columns: t_h,pv_fraction,load_fraction.
    void write_csv(std::ostream& out) const;
};

/// Deterministic in (class, seed, cadence, params). Throws ScenarioError when
/// the cadence is not positive or does not divide a day into at least 2 samples.
DayProfile synth_profile(DayClass c, std::uint64_t seed, double cadence_minutes,
                         const ProfileParameters& params = {});

/// Mixed-class year: day d uses a class drawn from `seed` and seed + d.
std::vector<DayProfile> synth_year(std::uint64_t seed, double cadence_minutes, int days = 365,
                                   const ProfileParameters& params = {});

struct ToleranceSavings {
    double tolerance = 0.0; // fraction
    int samples = 0;
    int unity_feasible = 0;
    int optimal_feasible = 0;
    int jointly_feasible = 0;
    int failed = 0; // solver or sweep failures, counted as infeasible
    double hours_infeasible_unity = 0.0;
    double hours_infeasible_optimal = 0.0;
    double average_saving_pct = 0.0; // over jointly feasible samples
};

struct SavingsReport {
    double total_hours = 0.0;
    std::vector<ToleranceSavings> rows;
    std::vector<std::string> failures; // one line per failed sample

    /// Columns: tolerance_pct,hours_infeasible_unity,hours_infeasible_optimal,
    /// jointly_feasible,average_saving_pct.
    void write_csv(std::ostream& out) const;
};

struct TimeseriesSpec {
    std::vector<double> tolerances{0.03, 0.04, 0.05};
    double pv_capacity = 5.0; // pu output at profile fraction 1, capped at each rating
    double power_factor = 0.9;
    bool caps_on = false;
    OpfConfig config;
    unsigned workers = 0;
};

/// For every sample and tolerance: unity power factor feasibility and cost by
/// sweep, optimal control feasibility and cost by solve_opf. Savings are
/// (unity - optimal) / unity averaged over samples where both are feasible.
SavingsReport run_timeseries(const FeederModel& model, const std::vector<DayProfile>& profiles,
                             const TimeseriesSpec& spec = {});

/// Gnuplot script plotting column `y` against column 1 of a CSV file.
std::string plot_script(const std::string& csv_path, const std::string& title,
                        const std::string& xlabel, const std::string& ylabel, int y_column);

} // namespace distvar
