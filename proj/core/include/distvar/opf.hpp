#pragma once

#include "distvar/conic.hpp"
#include "distvar/distflow.hpp"
#include "distvar/feeder.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace distvar {

/// One operating point of a feeder.
struct Scenario {
    double load_scale = 0.2;   // fraction of peak
    double power_factor = 0.9; // lagging, applied to every load
    /// Real output per inverter in model.inverter_buses() order, pu. Empty means all zero.
    std::vector<double> pv_output;
    /// In-service flag per capacitor in model.capacitor_buses() order. Empty means all on.
    std::vector<bool> cap_states;
    double v_root = 1.0;
    bool over_satisfaction = false;
    /// When set, every non-root bus gets bounds [1 - tol, 1 + tol] instead of its own.
    std::optional<double> voltage_tolerance;

    /// Throws ScenarioError when the scenario does not fit the model.
    void validate(const FeederModel& model) const;
    /// Loads, PV output and capacitors of this scenario, with q_g = 0.
    Injections injections(const FeederModel& model) const;
    double v_min(const FeederModel& model, std::size_t bus) const;
    double v_max(const FeederModel& model, std::size_t bus) const;
};

struct OpfConfig {
    /// Overrides every bus's load exponent in the CVR weights.
    std::optional<double> cvr_exponent;
    /// Overrides the loss coefficients of every inverter.
    std::optional<LossCoefficients> loss;
    /// Leave the standby loss out of reported costs as well as the program.
    bool drop_standby = false;
    conic::Settings solver;
    /// Relative tightness bound used to decide whether to re-solve at tol / 100.
    double exactness_tol = 1e-6;
    bool retry_on_inexact = true;

    /// Throws ScenarioError on an exponent outside [0, 2] or negative loss coefficients.
    void validate() const;
};

/// CVR weights for the scenario's loads, with the config's exponent override applied.
CvrWeights cvr_weights(const FeederModel& model, const Injections& inj, const OpfConfig& config = {});
/// Loss polynomial per inverter in model.inverter_buses() order, system pu.
std::vector<LossModel> inverter_losses(const FeederModel& model, const OpfConfig& config = {});

/// Slot of every symbol in the conic variable vector; -1 where a symbol is absent.
struct VariableMap {
    std::vector<int> P, Q, l, omega; // per line; omega = nu_from / 2 inside the line cone
    std::vector<int> nu;             // per bus
    std::vector<int> q_g;            // per inverter; -1 when fixed at zero (p_g at the rating)
    std::vector<int> p_c, q_c;       // per bus, over-satisfaction on loaded buses only
    std::vector<int> s, t;           // per inverter, present when c_v > 0 / c_r > 0
    std::vector<double> q_limit;     // var bound per inverter, pu
    std::vector<LossModel> loss;     // per inverter, system pu
    CvrWeights weights;
    double objective_constant = 0.0; // standby losses left out of the program

    int flow_equalities = 0; // real, reactive and voltage-drop rows
    int voltage_bounds = 0;
    int line_cones = 0;
    int inverter_soc = 0;
    int inverter_rsoc = 0;
};

struct AssembledOpf {
    conic::ConicProgram program;
    VariableMap map;
};

/// Builds the relaxed volt/var program: linear branch-flow balances with the
/// capacitor term q_sc * nu, the linear voltage drop, line cones
/// l nu >= P^2 + Q^2, inverter cones s >= |(p, q)| and t >= p^2 + q^2, the var
/// box, voltage bounds, optional load lower bounds, and the root voltage pinned.
AssembledOpf assemble_socp(const FeederModel& model, const Scenario& scen,
                           const OpfConfig& config = {});

struct TightnessReport {
    std::vector<double> line_gap;          // l nu_from - (P^2 + Q^2)
    std::vector<double> inverter_norm_gap; // s^2 - (p^2 + q^2)
    std::vector<double> inverter_quad_gap; // t - (p^2 + q^2)
    double max_relative_gap = 0.0;         // each gap over (1 + its larger side)
    std::size_t worst_line = npos;
    std::size_t worst_inverter = npos;
    bool pass = false;
};

struct OpfSolution {
    conic::Status status = conic::Status::max_iter;
    std::vector<std::size_t> inverter_buses;
    std::vector<double> p_g;
    std::vector<double> q_g_star;
    std::vector<double> q_limit;
    std::vector<double> s, t;        // NaN where the term is absent
    std::vector<double> p_c, q_c;    // loads as served (above the scenario under over-satisfaction)
    PowerFlowState state;
    CostBreakdown costs;             // includes standby unless dropped
    double objective = 0.0;          // program objective plus the constant
    TightnessReport tightness;
    conic::ConicSolution solver;
    bool resolved = false;           // re-solved at a tighter tolerance
    VariableMap map;
};

/// Solves the relaxed program and recovers the physical quantities. The
/// status of the conic solver is propagated; infeasible means the voltage
/// bounds cannot be met for this scenario.
OpfSolution solve_opf(const FeederModel& model, const Scenario& scen, const OpfConfig& config = {});

TightnessReport check_exactness(const FeederModel& model, const OpfSolution& solution,
                                double tol = 1e-6);

struct CrossValidation {
    double max_state_error = 0.0; // |socp - sweep| / (1 + |sweep|) over nu, P, Q, l
    double socp_objective = 0.0;
    double sweep_objective = 0.0;
    double objective_error = 0.0; // relative, same normalisation
    bool pass = false;
};

/// Re-solves the branch-flow equations by sweep with the optimal var
/// injections and loads as served, and compares state and objective.
CrossValidation cross_validate(const FeederModel& model, const Scenario& scen,
                               const OpfSolution& solution, double tol = 1e-6,
                               const OpfConfig& config = {});

/// Bus table: bus,nu,v,q_g. Line table: from,to,P,Q,l.
void write_solution_csv(std::ostream& bus_out, std::ostream& line_out, const FeederModel& model,
                        const OpfSolution& solution);
/// Header and one row: status,objective,line_loss,cvr_cost,inverter_loss,total,max_gap,iterations.
/// Only status and iterations are filled for a non-optimal solution.
void write_summary_csv(std::ostream& out, const OpfSolution& solution, bool header = true);

} // namespace distvar
