#pragma once

#include "distvar/opf.hpp"

#include <iosfwd>
#include <vector>

namespace distvar {

struct OracleSettings {
    int grid_steps = 2001; // points per inverter, endpoints included
    unsigned workers = 0;  // 0 = hardware concurrency
    SweepOptions sweep;
};

/// Exhaustive grid search over inverter var injections, evaluated on the
/// nonlinear branch-flow equations.
struct OracleSolution {
    std::vector<double> q_grid_best;  // per inverter, pu
    double objective_best = 0.0;      // includes standby losses unless dropped
    std::vector<double> q_limit;      // per inverter
    std::vector<double> grid_spacing; // per inverter, 0 when the inverter has no var room
    int grid_steps = 0;
    /// Row-major over the grid, first inverter slowest.
    std::vector<bool> feasible_mask;
    std::vector<double> objective; // NaN where the sweep failed
    std::size_t best_index = 0;

    std::size_t feasible_count() const;
    /// Var injections of grid point `index`.
    std::vector<double> point(std::size_t index) const;
};

/// Evaluates every grid point of [-qbar, qbar]^m with sweep_solve and
/// objective_terms and returns the cheapest point whose voltages are within
/// the scenario bounds. Ties go to the lowest index.
///
/// Throws ScenarioError for more than two inverters, grid_steps < 3, or when
/// no grid point is feasible.
OracleSolution brute_force_opf(const FeederModel& model, const Scenario& scen,
                               const OracleSettings& settings = {}, const OpfConfig& config = {});

/// Landscape dump: q_1[,q_2],objective,feasible.
void write_landscape_csv(std::ostream& out, const OracleSolution& solution);

} // namespace distvar
