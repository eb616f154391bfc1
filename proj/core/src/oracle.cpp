#include "distvar/oracle.hpp"

#include "distvar/error.hpp"

#include "parallel.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace distvar {

std::size_t OracleSolution::feasible_count() const
{
    std::size_t n = 0;
    for (bool f : feasible_mask) {
        n += f ? 1 : 0;
    }
    return n;
}

std::vector<double> OracleSolution::point(std::size_t index) const
{
    const std::size_t m = q_limit.size();
    const auto steps = static_cast<std::size_t>(grid_steps);
    std::vector<double> q(m, 0.0);
    for (std::size_t k = m; k-- > 0;) {
        const std::size_t j = index % steps;
        index /= steps;
        if (grid_spacing[k] > 0.0) {
            q[k] = -q_limit[k] + static_cast<double>(j) * grid_spacing[k];
        }
    }
    return q;
}

OracleSolution brute_force_opf(const FeederModel& model, const Scenario& scen,
                               const OracleSettings& settings, const OpfConfig& config)
{
    config.validate();
    const auto inv = model.inverter_buses();
    if (inv.size() > 2) {
        throw ScenarioError(fmt::format("grid search supports at most 2 inverters, model has {}",
                                        inv.size()));
    }
    if (settings.grid_steps < 3) {
        throw ScenarioError("grid search needs at least 3 steps per inverter");
    }
    const Injections base = scen.injections(model);

    OracleSolution out;
    out.grid_steps = settings.grid_steps;
    for (std::size_t k = 0; k < inv.size(); ++k) {
        const double qbar = model.buses()[inv[k]].inverter->var_limit(base.p_g[inv[k]]);
        out.q_limit.push_back(qbar);
        out.grid_spacing.push_back(2.0 * qbar / (settings.grid_steps - 1));
    }
    std::size_t total = 1;
    for (std::size_t k = 0; k < inv.size(); ++k) {
        total *= static_cast<std::size_t>(settings.grid_steps);
    }

    const CvrWeights weights = cvr_weights(model, base, config);
    std::vector<LossModel> loss = inverter_losses(model, config);
    if (config.drop_standby) {
        for (auto& m : loss) {
            m.standby = 0.0;
        }
    }
    SweepOptions opt = settings.sweep;
    opt.v_root = scen.v_root;

    out.feasible_mask.assign(total, false);
    out.objective.assign(total, std::numeric_limits<double>::quiet_NaN());
    std::vector<char> feasible(total, 0);
    const unsigned workers = settings.workers ? settings.workers : detail::default_workers();
    detail::parallel_for(total, workers, [&](std::size_t g) {
        const std::vector<double> q = out.point(g);
        Injections inj = base;
        std::vector<InverterOutput> outputs;
        for (std::size_t k = 0; k < inv.size(); ++k) {
            inj.q_g[inv[k]] += q[k];
            outputs.push_back({inv[k], base.p_g[inv[k]], q[k]});
        }
        PowerFlowState st;
        try {
            st = sweep_solve(model, inj, opt);
        } catch (const ConvergenceError&) {
            return;
        }
        out.objective[g] = objective_terms(model, st, outputs, weights, loss).total;
        bool ok = true;
        for (std::size_t i = 0; i < model.bus_count() && ok; ++i) {
            if (i == model.root()) {
                continue;
            }
            const double v = std::sqrt(st.nu[i]);
            ok = v >= scen.v_min(model, i) && v <= scen.v_max(model, i);
        }
        feasible[g] = ok ? 1 : 0;
    });

    bool found = false;
    for (std::size_t g = 0; g < total; ++g) {
        out.feasible_mask[g] = feasible[g] != 0;
        if (out.feasible_mask[g] && (!found || out.objective[g] < out.objective_best)) {
            out.objective_best = out.objective[g];
            out.best_index = g;
            found = true;
        }
    }
    if (!found) {
        throw ScenarioError(
            fmt::format("no feasible point on a {}-step var grid", settings.grid_steps));
    }
    out.q_grid_best = out.point(out.best_index);
    return out;
}

void write_landscape_csv(std::ostream& out, const OracleSolution& solution)
{
    for (std::size_t k = 0; k < solution.q_limit.size(); ++k) {
        fmt::print(out, "q_{},", k + 1);
    }
    out << "objective,feasible\n";
    for (std::size_t g = 0; g < solution.objective.size(); ++g) {
        for (double q : solution.point(g)) {
            fmt::print(out, "{:.10g},", q);
        }
        fmt::print(out, "{:.12g},{}\n", solution.objective[g], solution.feasible_mask[g] ? 1 : 0);
    }
}

} // namespace distvar
