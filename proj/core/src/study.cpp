#include "distvar/study.hpp"

#include "distvar/error.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace distvar {

void SweepSpec::validate() const
{
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
        throw ScenarioError(fmt::format("sweep range must satisfy lo < hi, got [{}, {}]", lo, hi));
    }
    if (steps < 2) {
        throw ScenarioError("a sweep needs at least 2 steps");
    }
}

double SweepSpec::value(int k) const
{
    return k == steps - 1 ? hi : lo + (hi - lo) * k / (steps - 1);
}

Scenario SweepSpec::scenario(const FeederModel& model, int k) const
{
    Scenario sc = base;
    if (quantity == SweepQuantity::pv_output) {
        sc.pv_output.assign(model.inverter_buses().size(), value(k));
    } else {
        sc.load_scale = value(k);
    }
    sc.validate(model);
    return sc;
}

namespace {

unsigned workers_or_default(unsigned w)
{
    return w ? w : detail::default_workers();
}

SweepResult run_sweep(const FeederModel& model, SweepSpec spec, SweepQuantity quantity)
{
    spec.quantity = quantity;
    spec.validate();
    if (model.inverter_buses().empty()) {
        throw ScenarioError("sweeps need a model with at least one inverter");
    }
    std::vector<Scenario> scenarios;
    for (int k = 0; k < spec.steps; ++k) {
        scenarios.push_back(spec.scenario(model, k));
    }
    SweepResult out;
    out.spec = spec;
    for (auto i : model.inverter_buses()) {
        out.inverter_ids.push_back(model.buses()[i].id);
    }
    out.rows.resize(scenarios.size());
    detail::parallel_for(scenarios.size(), workers_or_default(spec.workers), [&](std::size_t k) {
        SweepRow& row = out.rows[k];
        row.value = spec.value(static_cast<int>(k));
        const OpfSolution sol = solve_opf(model, scenarios[k], spec.config);
        row.status = sol.status;
        if (sol.status != conic::Status::optimal) {
            return;
        }
        row.q_g_star = sol.q_g_star;
        row.costs = sol.costs;
        row.objective = sol.objective;
        row.max_gap = sol.tightness.max_relative_gap;
        row.exact = sol.tightness.pass;
    });
    return out;
}

} // namespace

SweepResult sweep_pv(const FeederModel& model, SweepSpec spec)
{
    return run_sweep(model, std::move(spec), SweepQuantity::pv_output);
}

SweepResult sweep_load(const FeederModel& model, SweepSpec spec)
{
    return run_sweep(model, std::move(spec), SweepQuantity::load_scale);
}

void SweepResult::write_csv(std::ostream& out, const Bases& bases) const
{
    const bool pv = spec.quantity == SweepQuantity::pv_output;
    out << (pv ? "p_g_mw" : "load_scale");
    for (int id : inverter_ids) {
        if (inverter_ids.size() == 1) {
            out << ",q_g_star_mvar";
        } else {
            fmt::print(out, ",q_g_star_mvar_{}", id);
        }
    }
    out << ",line_loss_mw,cvr_cost_mw,inverter_loss_mw,total_mw,status,exact\n";
    for (const SweepRow& row : rows) {
        fmt::print(out, "{:.10g}", pv ? bases.pu_to_mva(row.value) : row.value);
        const bool ok = row.status == conic::Status::optimal;
        for (std::size_t k = 0; k < inverter_ids.size(); ++k) {
            if (ok) {
                fmt::print(out, ",{:.10g}", bases.pu_to_mva(row.q_g_star[k]));
            } else {
                out << ',';
            }
        }
        if (ok) {
            fmt::print(out, ",{:.10g},{:.10g},{:.10g},{:.10g}", bases.pu_to_mva(row.costs.line_loss),
                       bases.pu_to_mva(row.costs.cvr_cost), bases.pu_to_mva(row.costs.inverter_loss),
                       bases.pu_to_mva(row.costs.total));
        } else {
            out << ",,,,";
        }
        fmt::print(out, ",{},{}\n", conic::to_string(row.status), row.exact ? 1 : 0);
    }
}

std::vector<double> SweepResult::q_series(std::size_t inverter) const
{
    std::vector<double> q;
    for (const SweepRow& row : rows) {
        if (row.usable()) {
            q.push_back(row.q_g_star[inverter]);
        }
    }
    return q;
}

VoltageProfile voltage_profile_nocontrol(const FeederModel& model, const SweepSpec& spec)
{
    spec.validate();
    if (spec.quantity != SweepQuantity::pv_output) {
        throw ScenarioError("voltage profile sweeps PV output");
    }
    const auto inv = model.inverter_buses();
    if (inv.empty()) {
        throw ScenarioError("voltage profile needs a model with at least one inverter");
    }
    std::vector<Scenario> scenarios;
    for (int k = 0; k < spec.steps; ++k) {
        scenarios.push_back(spec.scenario(model, k));
    }
    VoltageProfile out;
    out.pcc_bus = model.buses()[inv.front()].id;
    out.rows.resize(scenarios.size());
    detail::parallel_for(scenarios.size(), workers_or_default(spec.workers), [&](std::size_t k) {
        ProfileRow& row = out.rows[k];
        row.p_g = spec.value(static_cast<int>(k));
        SweepOptions opt;
        opt.v_root = scenarios[k].v_root;
        PowerFlowState st;
        try {
            st = sweep_solve(model, scenarios[k].injections(model), opt);
        } catch (const ConvergenceError&) {
            return;
        }
        row.converged = true;
        row.v_pcc = std::sqrt(st.nu[inv.front()]);
        const auto [lo, hi] = std::minmax_element(st.nu.begin(), st.nu.end());
        row.v_min = std::sqrt(*lo);
        row.v_max = std::sqrt(*hi);
        row.v_min_bus = model.buses()[static_cast<std::size_t>(lo - st.nu.begin())].id;
        row.v_max_bus = model.buses()[static_cast<std::size_t>(hi - st.nu.begin())].id;
    });
    return out;
}

double VoltageProfile::pcc_span() const
{
    double lo = INFINITY;
    double hi = -INFINITY;
    for (const ProfileRow& r : rows) {
        if (r.converged) {
            lo = std::min(lo, r.v_pcc);
            hi = std::max(hi, r.v_pcc);
        }
    }
    return hi >= lo ? hi - lo : 0.0;
}

void VoltageProfile::write_csv(std::ostream& out, const Bases& bases) const
{
    out << "p_g_mw,v_pcc,v_min,v_min_bus,v_max,v_max_bus,status\n";
    for (const ProfileRow& r : rows) {
        if (r.converged) {
            fmt::print(out, "{:.10g},{:.10g},{:.10g},{},{:.10g},{},converged\n",
                       bases.pu_to_mva(r.p_g), r.v_pcc, r.v_min, r.v_min_bus, r.v_max, r.v_max_bus);
        } else {
            fmt::print(out, "{:.10g},,,,,,diverged\n", bases.pu_to_mva(r.p_g));
        }
    }
}

std::string_view to_string(DayClass c)
{
    switch (c) {
    case DayClass::clear:
        return "clear";
    case DayClass::cloudy:
        return "cloudy";
    case DayClass::intermittent_clear:
        return "intermittent_clear";
    case DayClass::intermittent_cloudy:
        return "intermittent_cloudy";
    }
    return "?";
}

DayClass parse_day_class(std::string_view name)
{
    for (DayClass c : {DayClass::clear, DayClass::cloudy, DayClass::intermittent_clear,
                       DayClass::intermittent_cloudy}) {
        if (name == to_string(c)) {
            return c;
        }
    }
    throw ScenarioError(fmt::format("unknown day class '{}' (expected clear, cloudy, "
                                    "intermittent_clear or intermittent_cloudy)",
                                    name));
}

namespace {

struct Pulse {
    double start;
    double end;
    double factor;
};

std::vector<Pulse> poisson_dropouts(std::mt19937_64& rng, const ProfileParameters& p)
{
    std::exponential_distribution<double> gap(p.int_clear_rate);
    std::uniform_real_distribution<double> minutes(p.int_clear_min_minutes, p.int_clear_max_minutes);
    std::uniform_real_distribution<double> depth(p.int_clear_depth_lo, p.int_clear_depth_hi);
    std::vector<Pulse> out;
    for (double t = p.sunrise + gap(rng); t < p.sunset; t += gap(rng)) {
        const double len = minutes(rng) / 60.0;
        out.push_back({t, t + len, 1.0 - depth(rng)});
    }
    return out;
}

std::vector<Pulse> square_dropouts(std::mt19937_64& rng, const ProfileParameters& p)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double period =
        (p.int_cloudy_period_lo + (p.int_cloudy_period_hi - p.int_cloudy_period_lo) * unit(rng)) / 60.0;
    std::uniform_real_distribution<double> depth(p.int_cloudy_depth_lo, p.int_cloudy_depth_hi);
    std::vector<Pulse> out;
    for (double t = p.sunrise - period * unit(rng); t < p.sunset; t += period) {
        out.push_back({t, t + p.int_cloudy_duty * period, 1.0 - depth(rng)});
    }
    return out;
}

double arc(const ProfileParameters& p, double t)
{
    if (t <= p.sunrise || t >= p.sunset) {
        return 0.0;
    }
    const double x = (t - p.sunrise) / (p.sunset - p.sunrise);
    return std::pow(std::sin(std::numbers::pi * x), p.arc_exponent);
}

double load_shape(const ProfileParameters& p, double t)
{
    // Smooth daytime plateau between 7 and 17 h plus a Gaussian evening peak.
    auto logistic = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
    const double day = logistic(2.0 * (t - 7.5)) * logistic(2.0 * (16.5 - t));
    const double eve = std::exp(-std::pow((t - p.load_evening_hour) / 1.5, 2));
    return p.load_night + (p.load_day - p.load_night) * day + (p.load_evening - p.load_night) * eve;
}

} // namespace

DayProfile synth_profile(DayClass c, std::uint64_t seed, double cadence_minutes,
                         const ProfileParameters& params)
{
    if (!(cadence_minutes > 0.0) || !std::isfinite(cadence_minutes)) {
        throw ScenarioError("profile cadence must be a positive number of minutes");
    }
    const auto n = static_cast<std::size_t>(std::floor(1440.0 / cadence_minutes + 1e-9));
    if (n < 2) {
        throw ScenarioError("profile cadence must give at least 2 samples per day");
    }
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(c)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    double peak = 1.0;
    double ripple_phase = 0.0;
    std::vector<Pulse> pulses;
    switch (c) {
    case DayClass::clear:
        peak = between(params.clear_peak_lo, params.clear_peak_hi);
        break;
    case DayClass::cloudy:
        peak = between(params.cloudy_peak_lo, params.cloudy_peak_hi);
        ripple_phase = between(0.0, 2.0 * std::numbers::pi);
        break;
    case DayClass::intermittent_clear:
        peak = between(params.clear_peak_lo, params.clear_peak_hi);
        pulses = poisson_dropouts(rng, params);
        break;
    case DayClass::intermittent_cloudy:
        peak = between(params.int_cloudy_peak_lo, params.int_cloudy_peak_hi);
        pulses = square_dropouts(rng, params);
        break;
    }

    std::normal_distribution<double> noise(0.0, params.load_noise);
    DayProfile out;
    out.day_class = c;
    out.cadence_minutes = cadence_minutes;
    out.samples.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        DaySample s;
        s.t = static_cast<double>(k) * cadence_minutes / 60.0;
        double pv = peak * arc(params, s.t);
        if (c == DayClass::cloudy) {
            pv *= 1.0 + params.cloudy_ripple *
                            std::sin(2.0 * std::numbers::pi * s.t / params.cloudy_ripple_period +
                                     ripple_phase);
        }
        for (const Pulse& p : pulses) {
            if (s.t >= p.start && s.t < p.end) {
                pv *= p.factor;
            }
        }
        s.pv_fraction = std::clamp(pv, 0.0, 1.0);
        s.load_fraction = std::max(0.0, load_shape(params, s.t) * (1.0 + noise(rng)));
        out.samples.push_back(s);
    }
    return out;
}

std::vector<DayProfile> synth_year(std::uint64_t seed, double cadence_minutes, int days,
                                   const ProfileParameters& params)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, 3);
    std::vector<DayProfile> out;
    for (int d = 0; d < days; ++d) {
        const auto c = static_cast<DayClass>(pick(rng));
        out.push_back(synth_profile(c, seed + static_cast<std::uint64_t>(d), cadence_minutes, params));
    }
    return out;
}

double DayProfile::daylight_variance(const ProfileParameters& params) const
{
    double sum = 0.0;
    double sq = 0.0;
    int n = 0;
    for (const DaySample& s : samples) {
        if (s.t > params.sunrise && s.t < params.sunset) {
            sum += s.pv_fraction;
            sq += s.pv_fraction * s.pv_fraction;
            ++n;
        }
    }
    if (n < 2) {
        return 0.0;
    }
    const double mean = sum / n;
    return (sq - n * mean * mean) / (n - 1);
}

void DayProfile::write_csv(std::ostream& out) const
{
    out << "t_h,pv_fraction,load_fraction\n";
    for (const DaySample& s : samples) {
        fmt::print(out, "{:.6g},{:.10g},{:.10g}\n", s.t, s.pv_fraction, s.load_fraction);
    }
}

namespace {

struct SampleOutcome {
    std::vector<char> unity_ok;
    std::vector<char> optimal_ok;
    std::vector<double> optimal_cost;
    double unity_cost = 0.0;
    double hours = 0.0;
    bool failed = false;
    std::string failure;
};

bool inside_band(const FeederModel& model, const std::vector<double>& nu, double tol, double margin)
{
    const double lo = (1.0 - tol) * (1.0 - tol);
    const double hi = (1.0 + tol) * (1.0 + tol);
    for (std::size_t i = 0; i < nu.size(); ++i) {
        if (i != model.root() && (nu[i] < lo + margin || nu[i] > hi - margin)) {
            return false;
        }
    }
    return true;
}

} // namespace

SavingsReport run_timeseries(const FeederModel& model, const std::vector<DayProfile>& profiles,
                             const TimeseriesSpec& spec)
{
    const auto inv = model.inverter_buses();
    if (inv.empty()) {
        throw ScenarioError("time series needs a model with at least one inverter");
    }
    spec.config.validate();
    std::vector<double> tols = spec.tolerances;
    std::sort(tols.begin(), tols.end());
    for (double t : tols) {
        if (!(t > 0.0 && t < 1.0)) {
            throw ScenarioError("voltage tolerances must lie in (0, 1)");
        }
    }

    struct Ref {
        std::size_t day;
        std::size_t sample;
    };
    std::vector<Ref> refs;
    for (std::size_t d = 0; d < profiles.size(); ++d) {
        for (std::size_t s = 0; s < profiles[d].samples.size(); ++s) {
            refs.push_back({d, s});
        }
    }
    const std::size_t m = tols.size();
    std::vector<SampleOutcome> outcomes(refs.size());

    std::vector<LossModel> loss = inverter_losses(model, spec.config);
    if (spec.config.drop_standby) {
        for (auto& l : loss) {
            l.standby = 0.0;
        }
    }

    detail::parallel_for(refs.size(), workers_or_default(spec.workers), [&](std::size_t idx) {
        const DayProfile& day = profiles[refs[idx].day];
        const DaySample& sample = day.samples[refs[idx].sample];
        SampleOutcome& o = outcomes[idx];
        o.hours = day.cadence_minutes / 60.0;
        o.unity_ok.assign(m, 0);
        o.optimal_ok.assign(m, 0);
        o.optimal_cost.assign(m, 0.0);

        Scenario sc;
        sc.load_scale = sample.load_fraction;
        sc.power_factor = spec.power_factor;
        for (auto i : inv) {
            sc.pv_output.push_back(
                std::min(sample.pv_fraction * spec.pv_capacity, model.buses()[i].inverter->s_rated));
        }
        if (!spec.caps_on) {
            sc.cap_states.assign(model.capacitor_buses().size(), false);
        }
        const Injections inj = sc.injections(model);

        try {
            const PowerFlowState st = sweep_solve(model, inj);
            std::vector<InverterOutput> outputs;
            for (auto i : inv) {
                outputs.push_back({i, inj.p_g[i], 0.0});
            }
            o.unity_cost =
                objective_terms(model, st, outputs, cvr_weights(model, inj, spec.config), loss).total;
            for (std::size_t k = 0; k < m; ++k) {
                o.unity_ok[k] = inside_band(model, st.nu, tols[k], 0.0) ? 1 : 0;
            }
        } catch (const ConvergenceError& e) {
            o.failed = true;
            o.failure = fmt::format("day {} t {:.2f}h unity sweep: {}", refs[idx].day, sample.t, e.what());
        }

        // A solution whose voltages stay strictly inside a tighter band is also
        // optimal for every looser band, so it is reused.
        const OpfSolution* reusable = nullptr;
        double solved_at = 0.0;
        OpfSolution last;
        for (std::size_t k = 0; k < m; ++k) {
            if (reusable && inside_band(model, reusable->state.nu, solved_at, 1e-7)) {
                o.optimal_ok[k] = 1;
                o.optimal_cost[k] = reusable->objective;
                continue;
            }
            sc.voltage_tolerance = tols[k];
            last = solve_opf(model, sc, spec.config);
            if (last.status == conic::Status::optimal) {
                o.optimal_ok[k] = 1;
                o.optimal_cost[k] = last.objective;
                reusable = &last;
                solved_at = tols[k];
            } else {
                reusable = nullptr;
                if (last.status != conic::Status::infeasible) {
                    o.failed = true;
                    o.failure = fmt::format("day {} t {:.2f}h tol {}: solver {}", refs[idx].day,
                                            sample.t, tols[k], conic::to_string(last.status));
                }
            }
        }
    });

    SavingsReport rep;
    for (const SampleOutcome& o : outcomes) {
        rep.total_hours += o.hours;
        if (o.failed) {
            rep.failures.push_back(o.failure);
        }
    }
    for (std::size_t k = 0; k < m; ++k) {
        ToleranceSavings row;
        row.tolerance = tols[k];
        double saving_sum = 0.0;
        for (const SampleOutcome& o : outcomes) {
            ++row.samples;
            row.failed += o.failed ? 1 : 0;
            const bool u = o.unity_ok[k] != 0;
            const bool p = o.optimal_ok[k] != 0;
            row.unity_feasible += u ? 1 : 0;
            row.optimal_feasible += p ? 1 : 0;
            if (!u) {
                row.hours_infeasible_unity += o.hours;
            }
            if (!p) {
                row.hours_infeasible_optimal += o.hours;
            }
            if (u && p && o.unity_cost > 0.0) {
                ++row.jointly_feasible;
                saving_sum += 100.0 * (o.unity_cost - o.optimal_cost[k]) / o.unity_cost;
            }
        }
        row.average_saving_pct = row.jointly_feasible ? saving_sum / row.jointly_feasible : 0.0;
        rep.rows.push_back(row);
    }
    return rep;
}

void SavingsReport::write_csv(std::ostream& out) const
{
    out << "tolerance_pct,hours_infeasible_unity,hours_infeasible_optimal,jointly_feasible,"
           "average_saving_pct\n";
    for (const ToleranceSavings& r : rows) {
        fmt::print(out, "{:g},{:.6g},{:.6g},{},{:.6f}\n", 100.0 * r.tolerance,
                   r.hours_infeasible_unity, r.hours_infeasible_optimal, r.jointly_feasible,
                   r.average_saving_pct);
    }
}

std::string plot_script(const std::string& csv_path, const std::string& title,
                        const std::string& xlabel, const std::string& ylabel, int y_column)
{
    return fmt::format("set datafile separator ','\n"
                       "set key autotitle columnhead\n"
                       "set title '{}'\n"
                       "set xlabel '{}'\n"
                       "set ylabel '{}'\n"
                       "set grid\n"
                       "plot '{}' using 1:{} with linespoints\n",
                       title, xlabel, ylabel, csv_path, y_column);
}

} // namespace distvar
