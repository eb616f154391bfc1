#include "distvar/distflow.hpp"

#include "distvar/error.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace distvar {

Injections Injections::zeros(std::size_t bus_count)
{
    Injections inj;
    inj.p_c.assign(bus_count, 0.0);
    inj.q_c.assign(bus_count, 0.0);
    inj.p_g.assign(bus_count, 0.0);
    inj.q_g.assign(bus_count, 0.0);
    inj.q_sc.assign(bus_count, 0.0);
    return inj;
}

PowerFlowState PowerFlowState::flat(const FeederModel& model, double v_root)
{
    PowerFlowState s;
    s.P.assign(model.line_count(), 0.0);
    s.Q.assign(model.line_count(), 0.0);
    s.l.assign(model.line_count(), 0.0);
    s.nu.assign(model.bus_count(), v_root * v_root);
    return s;
}

double FlowResiduals::max() const
{
    return std::max({p_balance, q_balance, voltage_drop, current});
}

CvrWeights CvrWeights::from_loads(const FeederModel& model, std::span<const double> p_c)
{
    CvrWeights w;
    w.alpha.assign(model.bus_count(), 0.0);
    for (std::size_t i = 0; i < model.bus_count(); ++i) {
        w.alpha[i] = 0.5 * model.buses()[i].load_exponent * p_c[i];
    }
    return w;
}

namespace {

void check_dimensions(const FeederModel& model, const Injections& inj)
{
    const std::size_t n = model.bus_count();
    if (inj.p_c.size() != n || inj.q_c.size() != n || inj.p_g.size() != n ||
        inj.q_g.size() != n || inj.q_sc.size() != n) {
        throw Error("injection vectors must have one entry per bus");
    }
}

// Net consumption at a bus, including the voltage-dependent capacitor term.
double net_p(const Injections& inj, std::size_t j)
{
    return inj.p_c[j] - inj.p_g[j];
}

double net_q(const Injections& inj, std::size_t j, double nu_j)
{
    return inj.q_c[j] - inj.q_g[j] - inj.q_sc[j] * nu_j;
}

} // namespace

std::complex<double> root_injection(const FeederModel& model, const Injections& inj,
                                    const PowerFlowState& s)
{
    const std::size_t root = model.root();
    double p = net_p(inj, root);
    double q = net_q(inj, root, s.nu[root]);
    for (std::size_t k : model.topology().child_lines[root]) {
        p += s.P[k];
        q += s.Q[k];
    }
    return {p, q};
}

PowerFlowState sweep_solve(const FeederModel& model, const Injections& inj,
                           const SweepOptions& options)
{
    check_dimensions(model, inj);
    if (!(options.v_root > 0.0) || !(options.tol > 0.0) || options.max_iter < 1) {
        throw Error("sweep_solve needs v_root > 0, tol > 0 and max_iter >= 1");
    }

    const auto& lines = model.lines();
    const auto& topo = model.topology();
    PowerFlowState s = PowerFlowState::flat(model, options.v_root);

    for (int iter = 1; iter <= options.max_iter; ++iter) {
        // Backward: accumulate flows from the leaves.
        for (auto it = topo.order.rbegin(); it != topo.order.rend(); ++it) {
            const std::size_t j = *it;
            const std::size_t k = topo.parent_line[j];
            if (k == npos) {
                continue;
            }
            double p = net_p(inj, j) + lines[k].r * s.l[k];
            double q = net_q(inj, j, s.nu[j]) + lines[k].x * s.l[k];
            for (std::size_t c : topo.child_lines[j]) {
                p += s.P[c];
                q += s.Q[c];
            }
            s.P[k] = p;
            s.Q[k] = q;
        }
        // Forward: currents from the sending-end voltage, then the drop.
        for (std::size_t i : topo.order) {
            for (std::size_t k : topo.child_lines[i]) {
                const Line& ln = lines[k];
                s.l[k] = (s.P[k] * s.P[k] + s.Q[k] * s.Q[k]) / s.nu[i];
                const double nu_j = s.nu[i] - 2.0 * (ln.r * s.P[k] + ln.x * s.Q[k]) +
                                    (ln.r * ln.r + ln.x * ln.x) * s.l[k];
                if (!(nu_j > 0.0)) {
                    throw ConvergenceError(fmt::format(
                        "voltage collapse at bus {} in sweep iteration {}",
                        model.buses()[ln.to].id, iter));
                }
                s.nu[ln.to] = nu_j;
            }
        }
        s.iterations = iter;
        const double res = residuals(model, inj, s).max();
        if (!std::isfinite(res)) {
            throw ConvergenceError("sweep diverged");
        }
        if (res <= options.tol) {
            s.root_injection = root_injection(model, inj, s);
            return s;
        }
    }
    throw ConvergenceError(
        fmt::format("sweep did not converge within {} iterations", options.max_iter));
}

FlowResiduals residuals(const FeederModel& model, const Injections& inj,
                        const PowerFlowState& s)
{
    check_dimensions(model, inj);
    const auto& lines = model.lines();
    const auto& topo = model.topology();
    FlowResiduals out;
    for (std::size_t k = 0; k < lines.size(); ++k) {
        const Line& ln = lines[k];
        const std::size_t i = ln.from;
        const std::size_t j = ln.to;
        const double s2 = s.P[k] * s.P[k] + s.Q[k] * s.Q[k];
        const double l_true = s2 / s.nu[i];

        double p = net_p(inj, j) + ln.r * l_true;
        double q = net_q(inj, j, s.nu[j]) + ln.x * l_true;
        for (std::size_t c : topo.child_lines[j]) {
            p += s.P[c];
            q += s.Q[c];
        }
        const double drop = s.nu[i] - 2.0 * (ln.r * s.P[k] + ln.x * s.Q[k]) +
                            (ln.r * ln.r + ln.x * ln.x) * l_true;

        out.p_balance = std::max(out.p_balance, std::abs(s.P[k] - p));
        out.q_balance = std::max(out.q_balance, std::abs(s.Q[k] - q));
        out.voltage_drop = std::max(out.voltage_drop, std::abs(s.nu[j] - drop));
        out.current = std::max(out.current, std::abs(s.l[k] - l_true));
    }
    return out;
}

CostBreakdown objective_terms(const FeederModel& model, const PowerFlowState& state,
                              std::span<const InverterOutput> inverter_outputs,
                              const CvrWeights& weights, std::span<const LossModel> loss)
{
    if (inverter_outputs.size() != loss.size()) {
        throw Error("one loss model per inverter output is required");
    }
    CostBreakdown c;
    for (std::size_t k = 0; k < model.line_count(); ++k) {
        c.line_loss += model.lines()[k].r * state.l[k];
    }
    for (std::size_t i = 0; i < model.bus_count(); ++i) {
        c.cvr_cost += weights.alpha[i] * state.nu[i];
    }
    for (std::size_t k = 0; k < inverter_outputs.size(); ++k) {
        c.inverter_loss += loss[k](inverter_outputs[k].p, inverter_outputs[k].q);
    }
    c.total = c.line_loss + c.cvr_cost + c.inverter_loss;
    return c;
}

void write_state_csv(std::ostream& bus_out, std::ostream& line_out, const FeederModel& model,
                     const PowerFlowState& state)
{
    bus_out << "bus,nu\n";
    for (std::size_t i = 0; i < model.bus_count(); ++i) {
        fmt::print(bus_out, "{},{:.12g}\n", model.buses()[i].id, state.nu[i]);
    }
    line_out << "from,to,P,Q,l\n";
    for (std::size_t k = 0; k < model.line_count(); ++k) {
        const Line& ln = model.lines()[k];
        fmt::print(line_out, "{},{},{:.12g},{:.12g},{:.12g}\n", model.buses()[ln.from].id,
                   model.buses()[ln.to].id, state.P[k], state.Q[k], state.l[k]);
    }
}

} // namespace distvar
