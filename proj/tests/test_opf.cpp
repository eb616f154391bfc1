#include "distvar/error.hpp"
#include "distvar/opf.hpp"

#include "feeders.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace distvar;

namespace {

const FeederModel& bundled_feeder()
{
    static const FeederModel model = load_feeder(DISTVAR_BUNDLED_FEEDER);
    return model;
}

Scenario bundled_scenario(double load, double pv_mw, bool caps_on = false)
{
    Scenario sc;
    sc.load_scale = load;
    sc.pv_output = {bundled_feeder().bases().mva_to_pu(pv_mw)};
    if (!caps_on) {
        sc.cap_states.assign(bundled_feeder().capacitor_buses().size(), false);
    }
    return sc;
}

// Objective of a fixed var setting, evaluated on the nonlinear equations.
// Returns NaN when the sweep fails or a voltage leaves its bounds.
double heuristic_objective(const FeederModel& model, const Scenario& scen,
                           const std::vector<double>& q, const OpfConfig& config = {})
{
    Injections inj = scen.injections(model);
    const auto inv = model.inverter_buses();
    std::vector<InverterOutput> outputs;
    for (std::size_t k = 0; k < inv.size(); ++k) {
        inj.q_g[inv[k]] += q[k];
        outputs.push_back({inv[k], inj.p_g[inv[k]], q[k]});
    }
    PowerFlowState st;
    try {
        st = sweep_solve(model, inj);
    } catch (const ConvergenceError&) {
        return std::nan("");
    }
    for (std::size_t i = 0; i < model.bus_count(); ++i) {
        if (i == model.root()) {
            continue;
        }
        const double v = std::sqrt(st.nu[i]);
        if (v < scen.v_min(model, i) || v > scen.v_max(model, i)) {
            return std::nan("");
        }
    }
    return objective_terms(model, st, outputs, cvr_weights(model, inj, config),
                           inverter_losses(model, config))
        .total;
}

} // namespace

TEST_CASE("two-bus program layout")
{
    const auto model = testing::two_bus(0.01, 0.02, 0.5);
    Scenario sc;
    sc.load_scale = 1.0;
    const auto a = assemble_socp(model, sc);
    CHECK(a.map.flow_equalities == 3);
    CHECK(a.map.line_cones == 1);
    CHECK(a.map.voltage_bounds == 2);
    CHECK(a.map.inverter_soc == 0);
    CHECK(a.map.inverter_rsoc == 0);
    CHECK(a.map.nu.size() == 2);
    CHECK(a.map.P.size() == 1);
    CHECK(a.map.l.size() == 1);
    CHECK(a.map.q_g.empty());
    CHECK(a.map.p_c[1] == -1);
}

TEST_CASE("bundled feeder program layout")
{
    const auto a = assemble_socp(bundled_feeder(), bundled_scenario(0.2, 2.0, true));
    CHECK(a.map.line_cones == 55);
    CHECK(a.map.inverter_soc == 1);
    CHECK(a.map.inverter_rsoc == 1);
    CHECK(a.map.flow_equalities == 3 * 55);
    CHECK(a.map.voltage_bounds == 2 * 55);
    CHECK(a.map.objective_constant == doctest::Approx(0.01 * 5.5));

    OpfConfig no_quad;
    no_quad.loss = LossCoefficients{0.01, 0.01, 0.0};
    CHECK(assemble_socp(bundled_feeder(), bundled_scenario(0.2, 2.0), no_quad).map.inverter_rsoc == 0);
}

TEST_CASE("var box follows the scenario's real output")
{
    const auto a = assemble_socp(bundled_feeder(), bundled_scenario(0.2, 4.0));
    REQUIRE(a.map.q_limit.size() == 1);
    CHECK(a.map.q_limit[0] == doctest::Approx(3.7749172176).epsilon(1e-9));

    // At the rating there is no var room and q_g is not a variable.
    const auto full = assemble_socp(bundled_feeder(), bundled_scenario(0.2, 5.5));
    CHECK(full.map.q_limit[0] == doctest::Approx(0.0));
    CHECK(full.map.q_g[0] == -1);

    const auto sol = solve_opf(bundled_feeder(), bundled_scenario(1.0, 4.0));
    REQUIRE(sol.status == conic::Status::optimal);
    CHECK(std::abs(sol.q_g_star[0]) <= sol.q_limit[0] + 1e-9);
}

TEST_CASE("no-flow optimum")
{
    Scenario sc = bundled_scenario(0.0, 0.0);
    const auto sol = solve_opf(bundled_feeder(), sc);
    REQUIRE(sol.status == conic::Status::optimal);
    CHECK(sol.q_g_star[0] == doctest::Approx(0.0).epsilon(1e-7));
    for (double nu : sol.state.nu) {
        CHECK(nu == doctest::Approx(1.0).epsilon(1e-8));
    }
    CHECK(sol.costs.line_loss == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(sol.costs.cvr_cost == 0.0);
    CHECK(sol.costs.inverter_loss == doctest::Approx(0.01 * 5.5).epsilon(1e-7));
    CHECK(sol.objective == doctest::Approx(0.01 * 5.5).epsilon(1e-7));

    const auto rep = check_exactness(bundled_feeder(), sol, 1e-6);
    CHECK(rep.pass);
    CHECK(rep.max_relative_gap <= 1e-7);

    const auto cv = cross_validate(bundled_feeder(), sc, sol);
    CHECK(cv.pass);
    CHECK(cv.sweep_objective == doctest::Approx(0.01 * 5.5).epsilon(1e-7));

    OpfConfig cfg;
    cfg.drop_standby = true;
    const auto dropped = solve_opf(bundled_feeder(), sc, cfg);
    CHECK(dropped.objective == doctest::Approx(0.0).epsilon(1e-8));
    CHECK(cross_validate(bundled_feeder(), sc, dropped, 1e-6, cfg).pass);
}

TEST_CASE("bundled feeder solves are exact and match the sweep")
{
    for (double load : {0.05, 0.2, 0.6, 1.0}) {
        for (double pv : {0.0, 1.0, 2.5, 4.0, 5.0}) {
            for (bool caps : {false, true}) {
                CAPTURE(load);
                CAPTURE(pv);
                CAPTURE(caps);
                const Scenario sc = bundled_scenario(load, pv, caps);
                const auto sol = solve_opf(bundled_feeder(), sc);
                if (sol.status != conic::Status::optimal) {
                    CHECK(sol.status == conic::Status::infeasible);
                    continue;
                }
                CHECK(sol.tightness.pass);
                CHECK(sol.tightness.max_relative_gap <= 1e-6);
                const auto cv = cross_validate(bundled_feeder(), sc, sol);
                CHECK(cv.max_state_error <= 1e-6);
                CHECK(cv.objective_error <= 1e-6);
            }
        }
    }
}

TEST_CASE("cross validation at 20% load and 2.5 MW")
{
    const Scenario sc = bundled_scenario(0.2, 2.5);
    const auto sol = solve_opf(bundled_feeder(), sc);
    REQUIRE(sol.status == conic::Status::optimal);
    const auto cv = cross_validate(bundled_feeder(), sc, sol);
    CHECK(cv.pass);
    CHECK(std::abs(cv.socp_objective - cv.sweep_objective) <= 1e-6 * std::abs(cv.sweep_objective));
    CHECK(cv.socp_objective == doctest::Approx(sol.objective));
}

TEST_CASE("loose solver tolerance shows up in cross validation")
{
    const Scenario sc = bundled_scenario(0.2, 2.5);
    OpfConfig loose;
    loose.solver.tol = 1e-3;
    loose.retry_on_inexact = false;
    const auto sol = solve_opf(bundled_feeder(), sc, loose);
    REQUIRE(sol.status == conic::Status::optimal);
    const auto tight = cross_validate(bundled_feeder(), sc, solve_opf(bundled_feeder(), sc));
    const auto cv = cross_validate(bundled_feeder(), sc, sol, 1e-6, loose);
    CHECK_FALSE(cv.pass);
    CHECK(cv.max_state_error > 100 * tight.max_state_error);
    CHECK(cv.max_state_error < 1e-1);
}

TEST_CASE("an inflated current fails the tightness check on that line")
{
    auto sol = solve_opf(bundled_feeder(), bundled_scenario(0.5, 2.0));
    REQUIRE(sol.status == conic::Status::optimal);
    REQUIRE(check_exactness(bundled_feeder(), sol).pass);
    const std::size_t k = 17;
    sol.state.l[k] += 0.1;
    const auto rep = check_exactness(bundled_feeder(), sol, 1e-6);
    CHECK_FALSE(rep.pass);
    CHECK(rep.worst_line == k);
    CHECK(rep.line_gap[k] > 0.09);
}

TEST_CASE("inverter cone gaps are reported")
{
    auto sol = solve_opf(bundled_feeder(), bundled_scenario(0.5, 3.0));
    REQUIRE(sol.status == conic::Status::optimal);
    REQUIRE(sol.tightness.pass);
    sol.t[0] += 0.5;
    const auto rep = check_exactness(bundled_feeder(), sol, 1e-6);
    CHECK_FALSE(rep.pass);
    CHECK(rep.worst_inverter == 0);
    CHECK(rep.inverter_quad_gap[0] == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("relaxation bounds fixed var heuristics from below")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> load(0.05, 1.0);
    std::uniform_real_distribution<double> pv(0.0, 5.0);
    int compared = 0;
    for (int trial = 0; trial < 12; ++trial) {
        const Scenario sc = bundled_scenario(load(rng), pv(rng), trial % 3 == 0);
        const auto sol = solve_opf(bundled_feeder(), sc);
        if (sol.status != conic::Status::optimal) {
            continue;
        }
        const double qbar = sol.q_limit[0];
        for (double f : {0.0, 0.05, -0.05, 0.1, -0.1, 0.25, -0.25, 0.5, -0.5, 1.0, -1.0}) {
            const double q = f * qbar;
            const double h = heuristic_objective(bundled_feeder(), sc, {q});
            if (std::isnan(h)) {
                continue;
            }
            CAPTURE(q);
            CHECK(sol.objective <= h + 1e-7);
            ++compared;
        }
    }
    CHECK(compared > 30);
}

TEST_CASE("over-satisfaction serves at least the scenario loads")
{
    const Scenario fixed = bundled_scenario(0.3, 4.5);
    Scenario over = fixed;
    over.over_satisfaction = true;
    const auto a = assemble_socp(bundled_feeder(), over);
    const auto base = fixed.injections(bundled_feeder());
    int loaded = 0;
    for (std::size_t i = 0; i < bundled_feeder().bus_count(); ++i) {
        const bool has_load = base.p_c[i] > 0.0 && i != bundled_feeder().root();
        loaded += has_load ? 1 : 0;
        CHECK((a.map.p_c[i] >= 0) == has_load);
    }
    CHECK(loaded > 0);

    const auto f = solve_opf(bundled_feeder(), fixed);
    const auto o = solve_opf(bundled_feeder(), over);
    REQUIRE(f.status == conic::Status::optimal);
    REQUIRE(o.status == conic::Status::optimal);
    for (std::size_t i = 0; i < bundled_feeder().bus_count(); ++i) {
        CHECK(o.p_c[i] >= base.p_c[i] - 1e-8);
        CHECK(o.q_c[i] >= base.q_c[i] - 1e-8);
        CHECK(f.p_c[i] == base.p_c[i]);
    }
    CHECK(o.objective <= f.objective + 1e-8);
    CHECK(o.tightness.pass);
    CHECK(cross_validate(bundled_feeder(), over, o).pass);
}

TEST_CASE("unreachable voltage bounds are reported as infeasible")
{
    Scenario sc = bundled_scenario(1.0, 0.0);
    sc.voltage_tolerance = 0.005;
    const auto sol = solve_opf(bundled_feeder(), sc);
    CHECK(sol.status == conic::Status::infeasible);

    CHECK_THROWS_AS(solve_opf(bundled_feeder(), bundled_scenario(0.2, 6.0)), ScenarioError);
    Scenario bad = bundled_scenario(0.2, 1.0);
    bad.pv_output = {1.0, 1.0};
    CHECK_THROWS_AS(assemble_socp(bundled_feeder(), bad), ScenarioError);
    OpfConfig cfg;
    cfg.cvr_exponent = 2.5;
    CHECK_THROWS_AS(assemble_socp(bundled_feeder(), bundled_scenario(0.2, 1.0), cfg), ScenarioError);
}

TEST_CASE("feasibility is monotone in the voltage tolerance")
{
    int feasible_at_3 = 0;
    for (double load : {0.05, 0.3, 0.7, 1.0}) {
        for (double pv : {0.0, 2.5, 5.0}) {
            bool prev = false;
            for (double tol : {0.03, 0.04, 0.05}) {
                Scenario sc = bundled_scenario(load, pv, true);
                sc.voltage_tolerance = tol;
                const bool ok = solve_opf(bundled_feeder(), sc).status == conic::Status::optimal;
                if (tol == 0.03) {
                    feasible_at_3 += ok ? 1 : 0;
                }
                CHECK((ok || !prev));
                prev = ok;
            }
        }
    }
    CHECK(feasible_at_3 > 0);
}

TEST_CASE("q* rises then falls with PV at 20% load")
{
    std::vector<double> q;
    for (int k = 0; k <= 20; ++k) {
        const auto sol = solve_opf(bundled_feeder(), bundled_scenario(0.2, 0.25 * k));
        REQUIRE(sol.status == conic::Status::optimal);
        q.push_back(sol.q_g_star[0]);
    }
    bool rose = false;
    bool fell_after_rise = false;
    for (std::size_t k = 1; k < q.size(); ++k) {
        const double d = q[k] - q[k - 1];
        if (d > 0.0) {
            rose = true;
        } else if (d < 0.0 && rose) {
            fell_after_rise = true;
        }
    }
    CHECK(rose);
    CHECK(fell_after_rise);
    CHECK(q.back() < q[q.size() / 2]);
}

TEST_CASE("q* moves continuously with the CVR weights")
{
    const Scenario sc = bundled_scenario(0.5, 2.0);
    std::vector<double> q;
    for (double n : {1.0, 1.025, 1.05, 1.1}) {
        OpfConfig cfg;
        cfg.cvr_exponent = n;
        const auto sol = solve_opf(bundled_feeder(), sc, cfg);
        REQUIRE(sol.status == conic::Status::optimal);
        q.push_back(sol.q_g_star[0]);
    }
    REQUIRE(std::abs(q[0]) < 0.99 * solve_opf(bundled_feeder(), sc).q_limit[0]);
    const double d1 = std::abs(q[1] - q[0]);
    const double d2 = std::abs(q[2] - q[0]);
    const double d3 = std::abs(q[3] - q[0]);
    CHECK(d1 > 0.0);
    CHECK(d1 < d2);
    CHECK(d2 < d3);
    CHECK(d3 < 6.0 * d1);
}

TEST_CASE("random radial feeders are exact")
{
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int optimal = 0;
    for (int trial = 0; trial < 12; ++trial) {
        const int n = 10 + static_cast<int>(40 * unit(rng));
        const auto model = testing::random_feeder(rng, n, 1 + trial % 2);
        Scenario sc;
        sc.load_scale = 0.1 + 0.9 * unit(rng);
        for (auto i : model.inverter_buses()) {
            sc.pv_output.push_back(unit(rng) * model.buses()[i].inverter->s_rated);
        }
        CAPTURE(trial);
        const auto sol = solve_opf(model, sc);
        if (sol.status != conic::Status::optimal) {
            CHECK(sol.status == conic::Status::infeasible);
            continue;
        }
        ++optimal;
        CHECK(sol.tightness.pass);
        CHECK(cross_validate(model, sc, sol).pass);
    }
    CHECK(optimal >= 8);
}

TEST_CASE("solution tables")
{
    const auto sol = solve_opf(bundled_feeder(), bundled_scenario(0.2, 2.0));
    std::ostringstream buses;
    std::ostringstream lines;
    write_solution_csv(buses, lines, bundled_feeder(), sol);
    CHECK(buses.str().rfind("bus,nu,v,q_g\n", 0) == 0);
    CHECK(lines.str().rfind("from,to,P,Q,l\n", 0) == 0);
    const std::string b = buses.str();
    const std::string l = lines.str();
    CHECK(std::count(b.begin(), b.end(), '\n') == 57);
    CHECK(std::count(l.begin(), l.end(), '\n') == 56);

    std::ostringstream summary;
    write_summary_csv(summary, sol);
    write_summary_csv(summary, sol, false);
    const std::string s = summary.str();
    CHECK(s.rfind("status,objective,line_loss,cvr_cost,inverter_loss,total,max_gap,iterations\n"
                  "optimal,",
                  0) == 0);
    CHECK(std::count(s.begin(), s.end(), '\n') == 3);
}
