#include "cli.hpp"

#include "distvar/config.hpp"
#include "distvar/error.hpp"
#include "distvar/oracle.hpp"
#include "distvar/study.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

namespace distvar::cli {

namespace {

struct Common {
    std::string config;
    std::string caps; // empty: config value
    unsigned workers = 0;
    bool workers_set = false;
};

struct OperatingPoint {
    double load = 0.2;
    double pf = 0.9;
    double pv_mw = 0.0;
    double vtol_pct = 0.0; // 0: config or feeder bounds
    bool oversat = false;
};

StudyConfig study_config(const Common& c)
{
    StudyConfig cfg = c.config.empty() ? StudyConfig{} : load_study_config(c.config);
    if (!c.caps.empty()) {
        cfg.caps_on = c.caps == "on";
    }
    if (c.workers_set) {
        cfg.workers = c.workers;
    }
    return cfg;
}

Scenario make_scenario(const FeederModel& model, const StudyConfig& cfg, const OperatingPoint& op)
{
    Scenario sc;
    sc.load_scale = op.load;
    sc.power_factor = op.pf;
    sc.pv_output.assign(model.inverter_buses().size(), model.bases().mva_to_pu(op.pv_mw));
    if (!cfg.caps_on) {
        sc.cap_states.assign(model.capacitor_buses().size(), false);
    }
    sc.over_satisfaction = op.oversat;
    if (op.vtol_pct > 0.0) {
        sc.voltage_tolerance = op.vtol_pct / 100.0;
    } else {
        sc.voltage_tolerance = cfg.voltage_tolerance;
    }
    return sc;
}

void add_operating_point(CLI::App* app, OperatingPoint& op, bool with_pv = true)
{
    app->add_option("--load", op.load, "Load as a fraction of peak")->capture_default_str();
    app->add_option("--pf", op.pf, "Lagging load power factor")->capture_default_str();
    if (with_pv) {
        app->add_option("--pv", op.pv_mw, "PV output per inverter, MW")->capture_default_str();
    }
    app->add_option("--vtol", op.vtol_pct, "Voltage tolerance, percent (default: feeder bounds)");
    app->add_flag("--oversat", op.oversat, "Treat loads as lower bounds");
}

// Writes to `path`, or to `fallback` when the path is empty.
void emit(const std::string& path, std::ostream& fallback, const std::function<void(std::ostream&)>& fn)
{
    if (path.empty()) {
        fn(fallback);
        return;
    }
    std::ofstream file(path);
    if (!file) {
        throw Error(fmt::format("cannot write {}", path));
    }
    fn(file);
}

void emit_plot(const std::string& csv, const std::string& title, const std::string& xlabel,
               const std::string& ylabel, int column)
{
    std::ofstream gp(csv + ".gp");
    if (!gp) {
        throw Error(fmt::format("cannot write {}.gp", csv));
    }
    gp << plot_script(csv, title, xlabel, ylabel, column);
}

std::vector<double> parse_list(const std::string& s)
{
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto comma = std::min(s.find(',', pos), s.size());
        const std::string item = s.substr(pos, comma - pos);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) {
            throw Error(fmt::format("bad number '{}' in list '{}'", item, s));
        }
        out.push_back(v);
        pos = comma + 1;
    }
    return out;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Inverter var control studies on radial distribution feeders", "distvar"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--config", common.config, "Study settings file (key = value)");
    app.add_option("--caps", common.caps, "Shunt capacitors in service")
        ->check(CLI::IsMember({"on", "off"}));
    app.add_option_function<unsigned>(
        "--workers", [&](unsigned w) { common.workers = w, common.workers_set = true; },
        "Worker threads, 0 = all cores");

    std::function<int()> action;

    // feeder validate
    auto* feeder = app.add_subcommand("feeder", "Feeder files")->require_subcommand(1);
    std::string feeder_file;
    auto* validate = feeder->add_subcommand("validate", "Parse and check a feeder file");
    validate->add_option("file", feeder_file)->required();
    validate->callback([&] {
        action = [&] {
            const FeederModel model = load_feeder(feeder_file);
            double load = 0.0;
            for (const Bus& b : model.buses()) {
                load += b.peak_load;
            }
            fmt::print(out, "buses,lines,inverters,capacitors,peak_load_mva,root\n{},{},{},{},{:.6g},{}\n",
                       model.bus_count(), model.line_count(), model.inverter_buses().size(),
                       model.capacitor_buses().size(), model.bases().pu_to_mva(load),
                       model.buses()[model.root()].id);
            return ok;
        };
    });

    // opf solve
    auto* opf = app.add_subcommand("opf", "Optimal var dispatch")->require_subcommand(1);
    std::string opf_file;
    std::string bus_out;
    std::string line_out;
    OperatingPoint opf_point;
    auto* solve = opf->add_subcommand("solve", "Solve one operating point");
    solve->add_option("file", opf_file)->required();
    add_operating_point(solve, opf_point);
    solve->add_option("--bus-out", bus_out, "Bus table CSV (bus,nu,v,q_g)");
    solve->add_option("--line-out", line_out, "Line table CSV (from,to,P,Q,l)");
    solve->callback([&] {
        action = [&] {
            const FeederModel model = load_feeder(opf_file);
            const StudyConfig cfg = study_config(common);
            const Scenario sc = make_scenario(model, cfg, opf_point);
            const OpfSolution sol = solve_opf(model, sc, cfg.opf);
            write_summary_csv(out, sol);
            if (sol.status == conic::Status::infeasible) {
                err << "no operating point meets the voltage bounds\n";
                return infeasible;
            }
            if (sol.status != conic::Status::optimal) {
                err << "error: conic solver stopped with status " << conic::to_string(sol.status) << '\n';
                return error;
            }
            out << "\ninverter_bus,p_g_mw,q_g_star_mvar,q_limit_mvar\n";
            for (std::size_t k = 0; k < sol.inverter_buses.size(); ++k) {
                fmt::print(out, "{},{:.10g},{:.10g},{:.10g}\n", model.buses()[sol.inverter_buses[k]].id,
                           model.bases().pu_to_mva(sol.p_g[k]), model.bases().pu_to_mva(sol.q_g_star[k]),
                           model.bases().pu_to_mva(sol.q_limit[k]));
            }
            if (!bus_out.empty() || !line_out.empty()) {
                std::ostringstream discard;
                std::ofstream b;
                std::ofstream l;
                if (!bus_out.empty() && !(b.open(bus_out), b)) {
                    throw Error(fmt::format("cannot write {}", bus_out));
                }
                if (!line_out.empty() && !(l.open(line_out), l)) {
                    throw Error(fmt::format("cannot write {}", line_out));
                }
                write_solution_csv(bus_out.empty() ? static_cast<std::ostream&>(discard) : b,
                                   line_out.empty() ? static_cast<std::ostream&>(discard) : l, model, sol);
            }
            if (!sol.tightness.pass) {
                err << fmt::format("warning: relaxation gap {:.3g} exceeds {:.3g}\n",
                                   sol.tightness.max_relative_gap, cfg.opf.exactness_tol);
            }
            return ok;
        };
    });

    // sweep pv | load | voltage
    auto* sweep = app.add_subcommand("sweep", "Parameter sweeps")->require_subcommand(1);
    std::string sweep_file;
    std::string sweep_out;
    bool sweep_plot = false;
    OperatingPoint sweep_point;
    double lo = NAN;
    double hi = NAN;
    int steps = 21;
    auto sweep_common = [&](CLI::App* sub, const std::string& range_help) {
        sub->add_option("file", sweep_file)->required();
        sub->add_option("--lo", lo, "Start of the range, " + range_help);
        sub->add_option("--hi", hi, "End of the range, " + range_help);
        sub->add_option("--steps", steps, "Points, endpoints included")->capture_default_str();
        sub->add_option("--out", sweep_out, "CSV path (default: stdout)");
        sub->add_flag("--plot", sweep_plot, "Also write a gnuplot script next to --out");
    };
    auto build_spec = [&](const FeederModel& model, const StudyConfig& cfg, SweepQuantity q) {
        SweepSpec spec;
        spec.quantity = q;
        spec.base = make_scenario(model, cfg, sweep_point);
        spec.config = cfg.opf;
        spec.workers = cfg.workers;
        spec.steps = steps;
        if (q == SweepQuantity::pv_output) {
            spec.lo = model.bases().mva_to_pu(std::isnan(lo) ? 0.0 : lo);
            spec.hi = model.bases().mva_to_pu(std::isnan(hi) ? 5.0 : hi);
        } else {
            spec.lo = std::isnan(lo) ? 0.05 : lo;
            spec.hi = std::isnan(hi) ? 1.0 : hi;
        }
        return spec;
    };
    auto check_plot = [&] {
        if (sweep_plot && sweep_out.empty()) {
            throw Error("--plot needs --out");
        }
    };

    auto* sweep_pv_cmd = sweep->add_subcommand("pv", "q* against PV output at fixed load");
    sweep_common(sweep_pv_cmd, "MW (default 0 to 5)");
    add_operating_point(sweep_pv_cmd, sweep_point, false);
    sweep_pv_cmd->get_option("--load")->default_val(0.1);
    sweep_pv_cmd->callback([&] {
        action = [&] {
            check_plot();
            const FeederModel model = load_feeder(sweep_file);
            const StudyConfig cfg = study_config(common);
            const SweepResult res = sweep_pv(model, build_spec(model, cfg, SweepQuantity::pv_output));
            emit(sweep_out, out, [&](std::ostream& o) { res.write_csv(o, model.bases()); });
            if (sweep_plot) {
                emit_plot(sweep_out, "Optimal inverter var vs PV output", "PV output (MW)",
                          "q* (Mvar)", 2);
            }
            return ok;
        };
    });

    auto* sweep_load_cmd = sweep->add_subcommand("load", "q* against load at fixed PV output");
    sweep_common(sweep_load_cmd, "fraction of peak (default 0.05 to 1)");
    add_operating_point(sweep_load_cmd, sweep_point);
    sweep_load_cmd->get_option("--pv")->default_val(1.0);
    sweep_load_cmd->callback([&] {
        action = [&] {
            check_plot();
            const FeederModel model = load_feeder(sweep_file);
            const StudyConfig cfg = study_config(common);
            const SweepResult res = sweep_load(model, build_spec(model, cfg, SweepQuantity::load_scale));
            emit(sweep_out, out, [&](std::ostream& o) { res.write_csv(o, model.bases()); });
            if (sweep_plot) {
                emit_plot(sweep_out, "Optimal inverter var vs load", "Load (fraction of peak)",
                          "q* (Mvar)", 2);
            }
            return ok;
        };
    });

    auto* sweep_v_cmd = sweep->add_subcommand("voltage", "PCC voltage against PV output, no var control");
    sweep_common(sweep_v_cmd, "MW (default 0 to 5)");
    add_operating_point(sweep_v_cmd, sweep_point, false);
    sweep_v_cmd->callback([&] {
        action = [&] {
            check_plot();
            const FeederModel model = load_feeder(sweep_file);
            const StudyConfig cfg = study_config(common);
            const VoltageProfile prof =
                voltage_profile_nocontrol(model, build_spec(model, cfg, SweepQuantity::pv_output));
            emit(sweep_out, out, [&](std::ostream& o) { prof.write_csv(o, model.bases()); });
            err << fmt::format("PCC (bus {}) voltage span {:.6f} pu\n", prof.pcc_bus, prof.pcc_span());
            if (sweep_plot) {
                emit_plot(sweep_out, "PCC voltage vs PV output", "PV output (MW)", "|V| (pu)", 2);
            }
            return ok;
        };
    });

    // profile synth
    auto* profile = app.add_subcommand("profile", "Synthetic day profiles")->require_subcommand(1);
    std::string day_class;
    std::uint64_t seed = 1;
    double cadence = 15.0;
    std::string profile_out;
    auto* synth = profile->add_subcommand("synth", "Generate one day");
    synth->add_option("--class", day_class, "clear, cloudy, intermittent_clear, intermittent_cloudy")
        ->required();
    synth->add_option("--seed", seed)->capture_default_str();
    synth->add_option("--cadence", cadence, "Minutes between samples")->capture_default_str();
    synth->add_option("--out", profile_out, "CSV path (default: stdout)");
    synth->callback([&] {
        action = [&] {
            const StudyConfig cfg = study_config(common);
            const DayProfile p = synth_profile(parse_day_class(day_class), seed, cadence, cfg.profile);
            emit(profile_out, out, [&](std::ostream& o) { p.write_csv(o); });
            return ok;
        };
    });

    // timeseries run
    auto* ts = app.add_subcommand("timeseries", "Synthetic year studies")->require_subcommand(1);
    std::string ts_file;
    int days = 365;
    std::uint64_t ts_seed = 1;
    double ts_cadence = 60.0;
    std::string tolerances = "3,4,5";
    double ts_pf = 0.9;
    std::string ts_out;
    auto* ts_run = ts->add_subcommand("run", "Infeasible hours and savings per voltage tolerance");
    ts_run->add_option("file", ts_file)->required();
    ts_run->add_option("--days", days)->capture_default_str()->check(CLI::PositiveNumber);
    ts_run->add_option("--seed", ts_seed)->capture_default_str();
    ts_run->add_option("--cadence", ts_cadence, "Minutes between samples")->capture_default_str();
    ts_run->add_option("--tol", tolerances, "Voltage tolerances, percent, comma separated")
        ->capture_default_str();
    ts_run->add_option("--pf", ts_pf)->capture_default_str();
    ts_run->add_option("--out", ts_out, "CSV path (default: stdout)");
    ts_run->callback([&] {
        action = [&] {
            const FeederModel model = load_feeder(ts_file);
            const StudyConfig cfg = study_config(common);
            TimeseriesSpec spec;
            spec.tolerances.clear();
            for (double t : parse_list(tolerances)) {
                spec.tolerances.push_back(t / 100.0);
            }
            spec.pv_capacity = model.bases().mva_to_pu(cfg.pv_capacity_mw);
            spec.power_factor = ts_pf;
            spec.caps_on = cfg.caps_on;
            spec.config = cfg.opf;
            spec.workers = cfg.workers;
            const auto year = synth_year(ts_seed, ts_cadence, days, cfg.profile);
            const SavingsReport rep = run_timeseries(model, year, spec);
            emit(ts_out, out, [&](std::ostream& o) { rep.write_csv(o); });
            for (const auto& f : rep.failures) {
                err << f << '\n';
            }
            return ok;
        };
    });

    // oracle check
    auto* oracle = app.add_subcommand("oracle", "Brute-force certification")->require_subcommand(1);
    std::string oracle_file;
    OperatingPoint oracle_point;
    int grid = 2001;
    std::string landscape;
    auto* check = oracle->add_subcommand("check", "Compare the relaxation with a var grid search");
    check->add_option("file", oracle_file)->required();
    add_operating_point(check, oracle_point);
    check->add_option("--steps", grid, "Grid points per inverter")->capture_default_str();
    check->add_option("--landscape", landscape, "Write q,objective,feasible CSV");
    check->callback([&] {
        action = [&] {
            const FeederModel model = load_feeder(oracle_file);
            const StudyConfig cfg = study_config(common);
            const Scenario sc = make_scenario(model, cfg, oracle_point);
            const OpfSolution sol = solve_opf(model, sc, cfg.opf);
            OracleSettings os;
            os.grid_steps = grid;
            os.workers = cfg.workers;
            OracleSolution orc;
            try {
                orc = brute_force_opf(model, sc, os, cfg.opf);
            } catch (const ScenarioError& e) {
                if (sol.status == conic::Status::infeasible) {
                    err << e.what() << '\n';
                    return infeasible;
                }
                throw;
            }
            if (!landscape.empty()) {
                emit(landscape, out, [&](std::ostream& o) { write_landscape_csv(o, orc); });
            }
            if (sol.status != conic::Status::optimal) {
                err << "relaxation " << conic::to_string(sol.status) << " but the grid has a feasible point\n";
                return error;
            }
            bool agree = true;
            out << "inverter_bus,q_socp_mvar,q_grid_mvar,spacing_mvar\n";
            for (std::size_t k = 0; k < sol.q_g_star.size(); ++k) {
                const double d = std::abs(sol.q_g_star[k] - orc.q_grid_best[k]);
                agree = agree && d <= orc.grid_spacing[k] + 1e-12;
                fmt::print(out, "{},{:.10g},{:.10g},{:.6g}\n", model.buses()[sol.inverter_buses[k]].id,
                           model.bases().pu_to_mva(sol.q_g_star[k]),
                           model.bases().pu_to_mva(orc.q_grid_best[k]),
                           model.bases().pu_to_mva(orc.grid_spacing[k]));
            }
            fmt::print(out, "\nobjective_socp,objective_grid,difference\n{:.12g},{:.12g},{:.3g}\n",
                       sol.objective, orc.objective_best, orc.objective_best - sol.objective);
            if (!agree) {
                err << "grid argmin is more than one spacing from the relaxation\n";
                return error;
            }
            return ok;
        };
    });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : error;
    }
    try {
        return action ? action() : error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return error;
    }
}

} // namespace distvar::cli
