#pragma once

#include "distvar/feeder.hpp"

#include <complex>
#include <iosfwd>
#include <span>
#include <vector>

namespace distvar {

/// Per-bus power injections for one operating point, all in pu.
/// Consumption is positive in p_c/q_c, generation positive in p_g/q_g.
struct Injections {
    std::vector<double> p_c;
    std::vector<double> q_c;
    std::vector<double> p_g;
    std::vector<double> q_g;
    std::vector<double> q_sc; // capacitor rating in service

    static Injections zeros(std::size_t bus_count);
};

/// Branch-flow state: sending-end flows and squared current per line,
/// squared voltage per bus.
struct PowerFlowState {
    std::vector<double> P;
    std::vector<double> Q;
    std::vector<double> l;
    std::vector<double> nu;
    std::complex<double> root_injection{0.0, 0.0}; // negative real part = reverse flow
    int iterations = 0;

    static PowerFlowState flat(const FeederModel& model, double v_root = 1.0);
};

/// Max absolute residual of each branch-flow equation.
struct FlowResiduals {
    double p_balance = 0.0;
    double q_balance = 0.0;
    double voltage_drop = 0.0;
    double current = 0.0;

    double max() const;
};

struct CostBreakdown {
    double line_loss = 0.0;
    double cvr_cost = 0.0;
    double inverter_loss = 0.0;
    double total = 0.0;
};

/// Conservation-voltage-reduction weights alpha_i = (n_i / 2) p_i^c.
struct CvrWeights {
    std::vector<double> alpha;

    static CvrWeights from_loads(const FeederModel& model, std::span<const double> p_c);
};

struct InverterOutput {
    std::size_t bus = 0;
    double p = 0.0;
    double q = 0.0;
};

struct SweepOptions {
    double v_root = 1.0;
    double tol = 1e-10;
    int max_iter = 100;
};

/// Backward/forward sweep for the branch-flow equations with loads held at
/// their given values. Flows are accumulated leaf-to-root with the current
/// squared-current estimates, then voltages and currents are updated
/// root-to-leaf. Stops when every equation residual is at most `tol`.
///
/// Throws ConvergenceError on voltage collapse (nu <= 0) or when the
/// iteration limit is reached.
PowerFlowState sweep_solve(const FeederModel& model, const Injections& inj,
                           const SweepOptions& options = {});

/// Complex power drawn from the substation: flows on the root's lines plus
/// the root bus's own net load.
std::complex<double> root_injection(const FeederModel& model, const Injections& inj,
                                    const PowerFlowState& state);

FlowResiduals residuals(const FeederModel& model, const Injections& inj,
                        const PowerFlowState& state);

CostBreakdown objective_terms(const FeederModel& model, const PowerFlowState& state,
                              std::span<const InverterOutput> inverter_outputs,
                              const CvrWeights& weights, std::span<const LossModel> loss);

/// Debug dump: `bus,id,nu` rows and `line,from,to,P,Q,l` rows.
void write_state_csv(std::ostream& bus_out, std::ostream& line_out, const FeederModel& model,
                     const PowerFlowState& state);

} // namespace distvar
