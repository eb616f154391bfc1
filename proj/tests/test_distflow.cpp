#include "distvar/distflow.hpp"
#include "distvar/error.hpp"

#include "feeders.hpp"
#include "two_bus_oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace distvar;

namespace {

Injections bundled_injections(const FeederModel& model, double load_scale, double pf, double pv,
                            bool caps_on)
{
    auto inj = Injections::zeros(model.bus_count());
    const double sin_phi = std::sqrt(1.0 - pf * pf);
    for (std::size_t i = 0; i < model.bus_count(); ++i) {
        const auto& b = model.buses()[i];
        inj.p_c[i] = load_scale * b.peak_load * pf;
        inj.q_c[i] = load_scale * b.peak_load * sin_phi;
        if (caps_on) {
            inj.q_sc[i] = b.shunt_cap;
        }
        if (b.inverter) {
            inj.p_g[i] = pv;
        }
    }
    return inj;
}

double sum(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s;
}

} // namespace

TEST_CASE("no flow fixed point")
{
    const auto model = load_feeder(DISTVAR_BUNDLED_FEEDER);
    const auto inj = Injections::zeros(model.bus_count());
    const auto st = sweep_solve(model, inj);
    for (double nu : st.nu) {
        CHECK(nu == 1.0);
    }
    for (std::size_t k = 0; k < model.line_count(); ++k) {
        CHECK(st.P[k] == 0.0);
        CHECK(st.Q[k] == 0.0);
        CHECK(st.l[k] == 0.0);
    }
    CHECK(st.root_injection == std::complex<double>(0.0, 0.0));
    const auto r = residuals(model, inj, st);
    CHECK(r.max() == 0.0);
}

TEST_CASE("two-bus sweep matches the closed-form quadratic")
{
    const auto model = testing::two_bus(0.01, 0.01, 0.0);
    auto inj = Injections::zeros(2);
    inj.p_c[1] = 0.2;
    inj.q_c[1] = 0.1;
    const auto st = sweep_solve(model, inj);
    const auto ref = testing::two_bus_flow(0.01, 0.01, 0.2, 0.1);
    CHECK(std::abs(st.l[0] - ref.l) <= 1e-8);
    CHECK(std::abs(st.P[0] - ref.P) <= 1e-8);
    CHECK(std::abs(st.Q[0] - ref.Q) <= 1e-8);
    CHECK(std::abs(st.nu[1] - ref.nu2) <= 1e-8);
    CHECK(st.nu[0] == 1.0);

    // Frozen from a 40-digit evaluation of the same quadratic.
    CHECK(std::abs(ref.l - 0.05030231998458669) <= 1e-15);
    CHECK(std::abs(ref.nu2 - 0.9939899395360031) <= 1e-15);
    CHECK(std::abs(st.nu[1] - 0.9939899395360031) <= 1e-8);

    SUBCASE("cvr cost uses nu at the load bus")
    {
        const auto w = CvrWeights::from_loads(model, inj.p_c);
        CHECK(w.alpha[1] == doctest::Approx(0.1));
        const auto c = objective_terms(model, st, {}, w, {});
        CHECK(c.cvr_cost == doctest::Approx(0.1 * ref.nu2).epsilon(1e-12));
        CHECK(c.line_loss == doctest::Approx(0.01 * ref.l).epsilon(1e-9));
        CHECK(c.total == doctest::Approx(c.line_loss + c.cvr_cost));
    }
}

TEST_CASE("two-bus root voltage and generation")
{
    const auto model = testing::two_bus(0.02, 0.05, 0.0, 1.0);
    auto inj = Injections::zeros(2);
    inj.p_c[1] = 0.3;
    inj.q_c[1] = 0.1;
    inj.p_g[1] = 0.8;
    inj.q_g[1] = -0.2;
    SweepOptions opt;
    opt.v_root = 1.02;
    const auto st = sweep_solve(model, inj, opt);
    const auto ref = testing::two_bus_flow(0.02, 0.05, -0.5, 0.3, 1.02 * 1.02);
    CHECK(st.nu[0] == doctest::Approx(1.02 * 1.02));
    CHECK(std::abs(st.nu[1] - ref.nu2) <= 1e-8);
    CHECK(std::abs(st.P[0] - ref.P) <= 1e-8);
    CHECK(st.root_injection.real() < 0.0);
}

TEST_CASE("objective terms")
{
    const auto model = load_feeder(DISTVAR_BUNDLED_FEEDER);
    const auto st = PowerFlowState::flat(model);
    const CvrWeights zero{std::vector<double>(model.bus_count(), 0.0)};

    const LossModel standby{0.01, 0.0, 0.0};
    const InverterOutput idle{model.inverter_buses()[0], 0.0, 0.0};
    const auto c = objective_terms(model, st, {&idle, 1}, zero, {&standby, 1});
    CHECK(c.line_loss == 0.0);
    CHECK(c.cvr_cost == 0.0);
    CHECK(c.inverter_loss == doctest::Approx(0.01));
    CHECK(c.total == doctest::Approx(0.01));

    const LossModel linear{0.0, 1.0, 0.0};
    const InverterOutput out{model.inverter_buses()[0], 0.6, 0.8};
    CHECK(objective_terms(model, st, {&out, 1}, zero, {&linear, 1}).inverter_loss ==
          doctest::Approx(1.0));
    CHECK_THROWS_AS(objective_terms(model, st, {&out, 1}, zero, {}), Error);
}

TEST_CASE("bundled feeder residuals at several load levels")
{
    const auto model = load_feeder(DISTVAR_BUNDLED_FEEDER);
    for (double scale : {0.05, 0.2, 0.5, 0.8, 1.0}) {
        CAPTURE(scale);
        const auto inj = bundled_injections(model, scale, 0.9, 0.0, true);
        const auto st = sweep_solve(model, inj);
        const auto r = residuals(model, inj, st);
        CHECK(r.p_balance <= 1e-10);
        CHECK(r.q_balance <= 1e-10);
        CHECK(r.voltage_drop <= 1e-10);
        CHECK(r.current <= 1e-10);
        CHECK(st.iterations <= 50);

        double loss = 0.0;
        double peak = 0.0;
        for (std::size_t k = 0; k < model.line_count(); ++k) {
            loss += model.lines()[k].r * st.l[k];
            peak = std::max(peak, st.P[k] * st.P[k] + st.Q[k] * st.Q[k]);
        }
        CHECK(std::abs(st.root_injection.real() - (sum(inj.p_c) - sum(inj.p_g) + loss)) <= 1e-9);
        for (std::size_t k = 0; k < model.line_count(); ++k) {
            const auto& ln = model.lines()[k];
            const double gap = st.l[k] * st.nu[ln.from] - (st.P[k] * st.P[k] + st.Q[k] * st.Q[k]);
            CHECK(std::abs(gap) <= 1e-10 * (1.0 + peak));
        }
    }
}

TEST_CASE("voltage falls along every path under pure consumption")
{
    const auto model = load_feeder(DISTVAR_BUNDLED_FEEDER);
    const auto inj = bundled_injections(model, 1.0, 0.9, 0.0, false);
    const auto st = sweep_solve(model, inj);
    for (const auto& ln : model.lines()) {
        CHECK(st.nu[ln.to] <= st.nu[ln.from]);
    }
}

TEST_CASE("reverse flow lifts the PV bus above nominal")
{
    const auto model = load_feeder(DISTVAR_BUNDLED_FEEDER);
    const auto pcc = model.index_of(45);
    for (bool caps : {false, true}) {
        const auto inj = bundled_injections(model, 0.2, 0.9, 5.0, caps);
        const auto st = sweep_solve(model, inj);
        CHECK(st.nu[pcc] > 1.0);
        CHECK(st.root_injection.real() < 0.0);
    }
}

TEST_CASE("halving the load moves the state continuously")
{
    const auto model = load_feeder(DISTVAR_BUNDLED_FEEDER);
    const auto full = sweep_solve(model, bundled_injections(model, 1.0, 0.9, 0.0, true));
    const auto half = sweep_solve(model, bundled_injections(model, 0.5, 0.9, 0.0, true));
    const auto quarter = sweep_solve(model, bundled_injections(model, 0.25, 0.9, 0.0, true));
    double d1 = 0.0;
    double d2 = 0.0;
    for (std::size_t i = 0; i < model.bus_count(); ++i) {
        d1 = std::max(d1, std::abs(full.nu[i] - half.nu[i]));
        d2 = std::max(d2, std::abs(half.nu[i] - quarter.nu[i]));
    }
    // Voltage drop is close to linear in load: the second half-step moves about half as far.
    CHECK(d2 < d1);
    CHECK(d2 > 0.3 * d1);
    CHECK(full.iterations <= 50);
}

TEST_CASE("perturbing a leaf voltage shows up in the drop residual only")
{
    const auto model = load_feeder(DISTVAR_BUNDLED_FEEDER);
    const auto inj = bundled_injections(model, 0.5, 0.9, 1.0, true);
    auto st = sweep_solve(model, inj);
    std::size_t leaf = npos;
    for (std::size_t i = 0; i < model.bus_count(); ++i) {
        if (model.topology().child_lines[i].empty() && model.buses()[i].shunt_cap == 0.0) {
            leaf = i;
            break;
        }
    }
    REQUIRE(leaf != npos);
    st.nu[leaf] += 1e-3;
    const auto r = residuals(model, inj, st);
    CHECK(r.voltage_drop == doctest::Approx(1e-3).epsilon(1e-6));
    CHECK(r.p_balance <= 1e-10);
    CHECK(r.q_balance <= 1e-10);
    CHECK(r.current <= 1e-10);
}

TEST_CASE("capacitor output scales with squared voltage")
{
    // Two-bus line with only a capacitor at the far end: Q = -q_sc nu_2 + x l.
    const auto model = testing::two_bus(0.01, 0.03, 0.0);
    auto inj = Injections::zeros(2);
    inj.q_sc[1] = 0.5;
    const auto st = sweep_solve(model, inj);
    CHECK(st.nu[1] > 1.0);
    CHECK(std::abs(st.Q[0] - (-0.5 * st.nu[1] + 0.03 * st.l[0])) <= 1e-10);
}

TEST_CASE("collapse and bad inputs are reported")
{
    const auto model = testing::two_bus(0.05, 0.05, 0.0);
    auto inj = Injections::zeros(2);
    inj.p_c[1] = 50.0;
    CHECK_THROWS_AS(sweep_solve(model, inj), ConvergenceError);

    inj = Injections::zeros(3);
    CHECK_THROWS_AS(sweep_solve(model, inj), Error);

    SweepOptions opt;
    opt.v_root = 0.0;
    CHECK_THROWS_AS(sweep_solve(model, Injections::zeros(2), opt), Error);
}

TEST_CASE("state csv dump")
{
    const auto model = testing::two_bus(0.01, 0.01, 0.0);
    auto inj = Injections::zeros(2);
    inj.p_c[1] = 0.2;
    const auto st = sweep_solve(model, inj);
    std::ostringstream buses, lines;
    write_state_csv(buses, lines, model, st);
    CHECK(buses.str().rfind("bus,nu\n1,1\n2,", 0) == 0);
    CHECK(lines.str().rfind("from,to,P,Q,l\n1,2,", 0) == 0);
}
