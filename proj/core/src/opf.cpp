#include "distvar/opf.hpp"

#include "distvar/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace distvar {

using conic::ConeKind;

void Scenario::validate(const FeederModel& model) const
{
    if (!(load_scale >= 0.0) || !std::isfinite(load_scale)) {
        throw ScenarioError("load scale must be a nonnegative number");
    }
    if (!(power_factor > 0.0 && power_factor <= 1.0)) {
        throw ScenarioError("power factor must lie in (0, 1]");
    }
    if (!(v_root > 0.0)) {
        throw ScenarioError("root voltage must be positive");
    }
    if (voltage_tolerance && !(*voltage_tolerance > 0.0 && *voltage_tolerance < 1.0)) {
        throw ScenarioError("voltage tolerance must lie in (0, 1)");
    }
    const auto inv = model.inverter_buses();
    if (!pv_output.empty() && pv_output.size() != inv.size()) {
        throw ScenarioError(fmt::format("scenario gives {} PV outputs for {} inverters",
                                        pv_output.size(), inv.size()));
    }
    for (std::size_t k = 0; k < pv_output.size(); ++k) {
        if (!(pv_output[k] >= 0.0)) {
            throw ScenarioError("PV output must be nonnegative");
        }
        model.buses()[inv[k]].inverter->var_limit(pv_output[k]);
    }
    if (!cap_states.empty() && cap_states.size() != model.capacitor_buses().size()) {
        throw ScenarioError(fmt::format("scenario gives {} capacitor states for {} capacitors",
                                        cap_states.size(), model.capacitor_buses().size()));
    }
}

Injections Scenario::injections(const FeederModel& model) const
{
    validate(model);
    auto inj = Injections::zeros(model.bus_count());
    const double sin_phi = std::sqrt(std::max(0.0, 1.0 - power_factor * power_factor));
    for (std::size_t i = 0; i < model.bus_count(); ++i) {
        const double s = load_scale * model.buses()[i].peak_load;
        inj.p_c[i] = s * power_factor;
        inj.q_c[i] = s * sin_phi;
    }
    const auto caps = model.capacitor_buses();
    for (std::size_t k = 0; k < caps.size(); ++k) {
        if (cap_states.empty() || cap_states[k]) {
            inj.q_sc[caps[k]] = model.buses()[caps[k]].shunt_cap;
        }
    }
    const auto inv = model.inverter_buses();
    for (std::size_t k = 0; k < pv_output.size(); ++k) {
        inj.p_g[inv[k]] = pv_output[k];
    }
    return inj;
}

double Scenario::v_min(const FeederModel& model, std::size_t bus) const
{
    return voltage_tolerance ? 1.0 - *voltage_tolerance : model.buses()[bus].v_min;
}

double Scenario::v_max(const FeederModel& model, std::size_t bus) const
{
    return voltage_tolerance ? 1.0 + *voltage_tolerance : model.buses()[bus].v_max;
}

namespace {

// Var bounds this small are treated as zero: the box would have no interior.
constexpr double kTinyVarLimit = 1e-9;

class ProgramBuilder {
public:
    int free_var() { return free_count_++; }
    int nonneg_var() { return nonneg_count_++; }
    int cone(ConeKind kind, int dim)
    {
        cones_.push_back({kind, dim});
        const int first = cone_count_;
        cone_count_ += dim;
        return first;
    }

    int row(double rhs)
    {
        b_.push_back(rhs);
        return static_cast<int>(b_.size()) - 1;
    }
    // Variables are numbered within their group until finish() lays the groups out.
    enum class Group { free, nonneg, cone };
    struct Ref {
        Group group;
        int index;
    };
    void coef(int r, Ref v, double value)
    {
        if (value != 0.0) {
            entries_.push_back({r, v, value});
        }
    }
    void cost(Ref v, double value) { costs_.push_back({0, v, value}); }

    int resolve(Ref v) const
    {
        switch (v.group) {
        case Group::free:
            return v.index;
        case Group::nonneg:
            return free_count_ + v.index;
        case Group::cone:
            return free_count_ + nonneg_count_ + v.index;
        }
        return -1;
    }

    conic::ConicProgram finish() const
    {
        conic::ConicProgram p;
        const int n = free_count_ + nonneg_count_ + cone_count_;
        if (free_count_ > 0) {
            p.cones.push_back({ConeKind::free, free_count_});
        }
        if (nonneg_count_ > 0) {
            p.cones.push_back({ConeKind::nonneg, nonneg_count_});
        }
        p.cones.insert(p.cones.end(), cones_.begin(), cones_.end());
        p.c = Eigen::VectorXd::Zero(n);
        for (const auto& e : costs_) {
            p.c[resolve(e.var)] += e.value;
        }
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(entries_.size());
        for (const auto& e : entries_) {
            trips.emplace_back(e.row, resolve(e.var), e.value);
        }
        p.A.resize(static_cast<int>(b_.size()), n);
        p.A.setFromTriplets(trips.begin(), trips.end());
        p.b = Eigen::Map<const Eigen::VectorXd>(b_.data(), static_cast<int>(b_.size()));
        return p;
    }

private:
    struct Entry {
        int row;
        Ref var;
        double value;
    };
    int free_count_ = 0;
    int nonneg_count_ = 0;
    int cone_count_ = 0;
    std::vector<conic::ConeBlock> cones_;
    std::vector<double> b_;
    std::vector<Entry> entries_;
    std::vector<Entry> costs_;
};

using Ref = ProgramBuilder::Ref;
using Group = ProgramBuilder::Group;

struct Refs {
    std::vector<Ref> P, Q, l, omega, nu, q_g, p_c, q_c, s, t;
};

constexpr Ref kNone{Group::free, -1};

bool present(Ref r) { return r.index >= 0; }

} // namespace

void OpfConfig::validate() const
{
    if (cvr_exponent && !(*cvr_exponent >= 0.0 && *cvr_exponent <= 2.0)) {
        throw ScenarioError("CVR exponent must lie in [0, 2]");
    }
    if (loss && !(loss->c_s >= 0.0 && loss->c_v >= 0.0 && loss->c_r >= 0.0)) {
        throw ScenarioError("inverter loss coefficients must be nonnegative");
    }
}

CvrWeights cvr_weights(const FeederModel& model, const Injections& inj, const OpfConfig& config)
{
    auto w = CvrWeights::from_loads(model, inj.p_c);
    if (config.cvr_exponent) {
        for (std::size_t i = 0; i < model.bus_count(); ++i) {
            w.alpha[i] = 0.5 * *config.cvr_exponent * inj.p_c[i];
        }
    }
    return w;
}

std::vector<LossModel> inverter_losses(const FeederModel& model, const OpfConfig& config)
{
    std::vector<LossModel> out;
    for (auto i : model.inverter_buses()) {
        const auto& bus = model.buses()[i];
        const LossCoefficients c = config.loss ? *config.loss : bus.inverter->loss;
        out.push_back(InverterSpec{bus.inverter->s_rated, c}.loss_pu());
    }
    return out;
}

AssembledOpf assemble_socp(const FeederModel& model, const Scenario& scen, const OpfConfig& config)
{
    config.validate();
    const Injections inj = scen.injections(model);
    const auto& lines = model.lines();
    const auto& topo = model.topology();
    const std::size_t n_bus = model.bus_count();
    const std::size_t n_line = model.line_count();
    const auto inv_buses = model.inverter_buses();
    const std::size_t n_inv = inv_buses.size();

    ProgramBuilder pb;
    Refs ref;
    VariableMap map;
    map.loss = inverter_losses(model, config);
    map.weights = cvr_weights(model, inj, config);

    // Free group: var injections and served loads.
    ref.q_g.assign(n_inv, kNone);
    map.q_limit.assign(n_inv, 0.0);
    for (std::size_t k = 0; k < n_inv; ++k) {
        const auto& spec = *model.buses()[inv_buses[k]].inverter;
        map.q_limit[k] = spec.var_limit(inj.p_g[inv_buses[k]]);
        if (map.q_limit[k] > kTinyVarLimit) {
            ref.q_g[k] = {Group::free, pb.free_var()};
        }
    }
    ref.p_c.assign(n_bus, kNone);
    ref.q_c.assign(n_bus, kNone);
    if (scen.over_satisfaction) {
        for (std::size_t i = 0; i < n_bus; ++i) {
            if (i != model.root() && (inj.p_c[i] > 0.0 || inj.q_c[i] > 0.0)) {
                ref.p_c[i] = {Group::free, pb.free_var()};
                ref.q_c[i] = {Group::free, pb.free_var()};
            }
        }
    }

    // Nonneg group: squared voltages (slacks are added as rows are written).
    ref.nu.resize(n_bus);
    for (std::size_t i = 0; i < n_bus; ++i) {
        ref.nu[i] = {Group::nonneg, pb.nonneg_var()};
    }

    // One rotated cone per line: (l, omega, P, Q) with 2 l omega >= P^2 + Q^2.
    ref.l.resize(n_line);
    ref.omega.resize(n_line);
    ref.P.resize(n_line);
    ref.Q.resize(n_line);
    for (std::size_t k = 0; k < n_line; ++k) {
        const int first = pb.cone(ConeKind::rsoc, 4);
        ref.l[k] = {Group::cone, first};
        ref.omega[k] = {Group::cone, first + 1};
        ref.P[k] = {Group::cone, first + 2};
        ref.Q[k] = {Group::cone, first + 3};
    }
    map.line_cones = static_cast<int>(n_line);

    // Inverter cones. The copies of (p, q) inside each cone are tied to p_g and q_g by rows.
    ref.s.assign(n_inv, kNone);
    ref.t.assign(n_inv, kNone);
    for (std::size_t k = 0; k < n_inv; ++k) {
        const double p = inj.p_g[inv_buses[k]];
        const LossModel& lm = map.loss[k];
        map.objective_constant += lm.standby;
        if (lm.linear > 0.0) {
            const int first = pb.cone(ConeKind::soc, 3);
            ref.s[k] = {Group::cone, first};
            pb.cost(ref.s[k], lm.linear);
            pb.coef(pb.row(p), {Group::cone, first + 1}, 1.0);
            const int rq = pb.row(0.0);
            pb.coef(rq, {Group::cone, first + 2}, 1.0);
            if (present(ref.q_g[k])) {
                pb.coef(rq, ref.q_g[k], -1.0);
            }
            ++map.inverter_soc;
        }
        if (lm.quadratic > 0.0) {
            const int first = pb.cone(ConeKind::rsoc, 4);
            ref.t[k] = {Group::cone, first};
            pb.cost(ref.t[k], lm.quadratic);
            pb.coef(pb.row(0.5), {Group::cone, first + 1}, 1.0);
            pb.coef(pb.row(p), {Group::cone, first + 2}, 1.0);
            const int rq = pb.row(0.0);
            pb.coef(rq, {Group::cone, first + 3}, 1.0);
            if (present(ref.q_g[k])) {
                pb.coef(rq, ref.q_g[k], -1.0);
            }
            ++map.inverter_rsoc;
        }
    }

    // Which inverter sits at each bus.
    std::vector<std::vector<std::size_t>> inv_at(n_bus);
    for (std::size_t k = 0; k < n_inv; ++k) {
        inv_at[inv_buses[k]].push_back(k);
    }

    for (std::size_t k = 0; k < n_line; ++k) {
        const Line& ln = lines[k];
        const std::size_t i = ln.from;
        const std::size_t j = ln.to;

        // Real power balance at the receiving end.
        const int rp = pb.row(present(ref.p_c[j]) ? -inj.p_g[j] : inj.p_c[j] - inj.p_g[j]);
        pb.coef(rp, ref.P[k], 1.0);
        pb.coef(rp, ref.l[k], -ln.r);
        for (std::size_t c : topo.child_lines[j]) {
            pb.coef(rp, ref.P[c], -1.0);
        }
        if (present(ref.p_c[j])) {
            pb.coef(rp, ref.p_c[j], -1.0);
        }

        // Reactive power balance, capacitor output q_sc * nu_j.
        const int rq = pb.row(present(ref.q_c[j]) ? 0.0 : inj.q_c[j]);
        pb.coef(rq, ref.Q[k], 1.0);
        pb.coef(rq, ref.l[k], -ln.x);
        for (std::size_t c : topo.child_lines[j]) {
            pb.coef(rq, ref.Q[c], -1.0);
        }
        pb.coef(rq, ref.nu[j], inj.q_sc[j]);
        for (std::size_t g : inv_at[j]) {
            if (present(ref.q_g[g])) {
                pb.coef(rq, ref.q_g[g], 1.0);
            }
        }
        if (present(ref.q_c[j])) {
            pb.coef(rq, ref.q_c[j], -1.0);
        }

        // Voltage drop.
        const int rv = pb.row(0.0);
        pb.coef(rv, ref.nu[j], 1.0);
        pb.coef(rv, ref.nu[i], -1.0);
        pb.coef(rv, ref.P[k], 2.0 * ln.r);
        pb.coef(rv, ref.Q[k], 2.0 * ln.x);
        pb.coef(rv, ref.l[k], -(ln.r * ln.r + ln.x * ln.x));
        map.flow_equalities += 3;

        // omega = nu_from / 2.
        const int rw = pb.row(0.0);
        pb.coef(rw, ref.omega[k], 1.0);
        pb.coef(rw, ref.nu[i], -0.5);

        pb.cost(ref.l[k], ln.r);
    }

    pb.coef(pb.row(scen.v_root * scen.v_root), ref.nu[model.root()], 1.0);
    for (std::size_t i = 0; i < n_bus; ++i) {
        pb.cost(ref.nu[i], map.weights.alpha[i]);
        if (i == model.root()) {
            continue;
        }
        const double lo = scen.v_min(model, i);
        const double hi = scen.v_max(model, i);
        const int rl = pb.row(lo * lo);
        pb.coef(rl, ref.nu[i], 1.0);
        pb.coef(rl, {Group::nonneg, pb.nonneg_var()}, -1.0);
        const int rh = pb.row(hi * hi);
        pb.coef(rh, ref.nu[i], 1.0);
        pb.coef(rh, {Group::nonneg, pb.nonneg_var()}, 1.0);
        map.voltage_bounds += 2;
    }

    for (std::size_t k = 0; k < n_inv; ++k) {
        if (!present(ref.q_g[k])) {
            continue;
        }
        const int rl = pb.row(-map.q_limit[k]);
        pb.coef(rl, ref.q_g[k], 1.0);
        pb.coef(rl, {Group::nonneg, pb.nonneg_var()}, -1.0);
        const int rh = pb.row(map.q_limit[k]);
        pb.coef(rh, ref.q_g[k], 1.0);
        pb.coef(rh, {Group::nonneg, pb.nonneg_var()}, 1.0);
    }

    for (std::size_t i = 0; i < n_bus; ++i) {
        if (!present(ref.p_c[i])) {
            continue;
        }
        const int rp = pb.row(inj.p_c[i]);
        pb.coef(rp, ref.p_c[i], 1.0);
        pb.coef(rp, {Group::nonneg, pb.nonneg_var()}, -1.0);
        const int rq = pb.row(inj.q_c[i]);
        pb.coef(rq, ref.q_c[i], 1.0);
        pb.coef(rq, {Group::nonneg, pb.nonneg_var()}, -1.0);
    }

    AssembledOpf out;
    out.program = pb.finish();
    auto resolve_all = [&](const std::vector<Ref>& refs) {
        std::vector<int> idx(refs.size(), -1);
        for (std::size_t k = 0; k < refs.size(); ++k) {
            if (present(refs[k])) {
                idx[k] = pb.resolve(refs[k]);
            }
        }
        return idx;
    };
    map.P = resolve_all(ref.P);
    map.Q = resolve_all(ref.Q);
    map.l = resolve_all(ref.l);
    map.omega = resolve_all(ref.omega);
    map.nu = resolve_all(ref.nu);
    map.q_g = resolve_all(ref.q_g);
    map.p_c = resolve_all(ref.p_c);
    map.q_c = resolve_all(ref.q_c);
    map.s = resolve_all(ref.s);
    map.t = resolve_all(ref.t);
    out.map = std::move(map);
    return out;
}

namespace {

OpfSolution recover(const FeederModel& model, const Scenario& scen, const OpfConfig& config,
                    const AssembledOpf& assembled, conic::ConicSolution sol)
{
    const VariableMap& map = assembled.map;
    const Eigen::VectorXd& x = sol.x;
    const Injections base = scen.injections(model);
    OpfSolution out;
    out.status = sol.status;
    out.map = map;
    out.inverter_buses = model.inverter_buses();
    const std::size_t n_inv = out.inverter_buses.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();

    out.p_g.resize(n_inv);
    out.q_g_star.resize(n_inv);
    out.s.assign(n_inv, nan);
    out.t.assign(n_inv, nan);
    out.q_limit = map.q_limit;
    for (std::size_t k = 0; k < n_inv; ++k) {
        out.p_g[k] = base.p_g[out.inverter_buses[k]];
        out.q_g_star[k] = map.q_g[k] >= 0 ? x[map.q_g[k]] : 0.0;
        if (map.s[k] >= 0) {
            out.s[k] = x[map.s[k]];
        }
        if (map.t[k] >= 0) {
            out.t[k] = x[map.t[k]];
        }
    }
    out.p_c = base.p_c;
    out.q_c = base.q_c;
    for (std::size_t i = 0; i < model.bus_count(); ++i) {
        if (map.p_c[i] >= 0) {
            out.p_c[i] = x[map.p_c[i]];
            out.q_c[i] = x[map.q_c[i]];
        }
    }

    PowerFlowState& st = out.state;
    st.P.resize(model.line_count());
    st.Q.resize(model.line_count());
    st.l.resize(model.line_count());
    st.nu.resize(model.bus_count());
    for (std::size_t k = 0; k < model.line_count(); ++k) {
        st.P[k] = x[map.P[k]];
        st.Q[k] = x[map.Q[k]];
        st.l[k] = x[map.l[k]];
    }
    for (std::size_t i = 0; i < model.bus_count(); ++i) {
        st.nu[i] = x[map.nu[i]];
    }
    st.iterations = sol.iterations;

    Injections served = base;
    served.p_c = out.p_c;
    served.q_c = out.q_c;
    for (std::size_t k = 0; k < n_inv; ++k) {
        served.q_g[out.inverter_buses[k]] += out.q_g_star[k];
    }
    st.root_injection = root_injection(model, served, st);

    std::vector<InverterOutput> outputs;
    for (std::size_t k = 0; k < n_inv; ++k) {
        outputs.push_back({out.inverter_buses[k], out.p_g[k], out.q_g_star[k]});
    }
    std::vector<LossModel> loss = map.loss;
    if (config.drop_standby) {
        for (auto& m : loss) {
            m.standby = 0.0;
        }
    }
    out.costs = objective_terms(model, st, outputs, map.weights, loss);
    out.objective = sol.primal_objective(assembled.program) +
                    (config.drop_standby ? 0.0 : map.objective_constant);
    out.solver = std::move(sol);
    return out;
}

} // namespace

OpfSolution solve_opf(const FeederModel& model, const Scenario& scen, const OpfConfig& config)
{
    const AssembledOpf assembled = assemble_socp(model, scen, config);
    auto sol = conic::solve_conic(assembled.program, config.solver);
    OpfSolution out = recover(model, scen, config, assembled, std::move(sol));
    if (out.status != conic::Status::optimal) {
        return out;
    }
    out.tightness = check_exactness(model, out, config.exactness_tol);
    if (!out.tightness.pass && config.retry_on_inexact) {
        conic::Settings tighter = config.solver;
        tighter.tol = config.solver.tol / 100.0;
        auto retry = conic::solve_conic(assembled.program, tighter);
        if (retry.status == conic::Status::optimal) {
            out = recover(model, scen, config, assembled, std::move(retry));
            out.tightness = check_exactness(model, out, config.exactness_tol);
            out.resolved = true;
        }
    }
    return out;
}

TightnessReport check_exactness(const FeederModel& model, const OpfSolution& solution, double tol)
{
    TightnessReport rep;
    const auto& st = solution.state;
    double worst_line = -1.0;
    double worst_inv = -1.0;
    for (std::size_t k = 0; k < model.line_count(); ++k) {
        const double lhs = st.l[k] * st.nu[model.lines()[k].from];
        const double rhs = st.P[k] * st.P[k] + st.Q[k] * st.Q[k];
        const double gap = lhs - rhs;
        rep.line_gap.push_back(gap);
        const double rel = std::abs(gap) / (1.0 + std::max(std::abs(lhs), rhs));
        if (rel > worst_line) {
            worst_line = rel;
            rep.worst_line = k;
        }
    }
    for (std::size_t k = 0; k < solution.q_g_star.size(); ++k) {
        const double sq = solution.p_g[k] * solution.p_g[k] + solution.q_g_star[k] * solution.q_g_star[k];
        double rel = 0.0;
        double norm_gap = 0.0;
        double quad_gap = 0.0;
        if (!std::isnan(solution.s[k])) {
            const double s2 = solution.s[k] * solution.s[k];
            norm_gap = s2 - sq;
            rel = std::max(rel, std::abs(norm_gap) / (1.0 + std::max(s2, sq)));
        }
        if (!std::isnan(solution.t[k])) {
            quad_gap = solution.t[k] - sq;
            rel = std::max(rel, std::abs(quad_gap) / (1.0 + std::max(std::abs(solution.t[k]), sq)));
        }
        rep.inverter_norm_gap.push_back(norm_gap);
        rep.inverter_quad_gap.push_back(quad_gap);
        if (rel > worst_inv) {
            worst_inv = rel;
            rep.worst_inverter = k;
        }
    }
    rep.max_relative_gap = std::max({0.0, worst_line, worst_inv});
    rep.pass = rep.max_relative_gap <= tol;
    return rep;
}

CrossValidation cross_validate(const FeederModel& model, const Scenario& scen,
                               const OpfSolution& solution, double tol, const OpfConfig& config)
{
    if (solution.status != conic::Status::optimal) {
        throw ScenarioError("cross validation needs an optimal solution");
    }
    Injections inj = scen.injections(model);
    inj.p_c = solution.p_c;
    inj.q_c = solution.q_c;
    for (std::size_t k = 0; k < solution.inverter_buses.size(); ++k) {
        inj.q_g[solution.inverter_buses[k]] += solution.q_g_star[k];
    }
    SweepOptions opt;
    opt.v_root = scen.v_root;
    const PowerFlowState phys = sweep_solve(model, inj, opt);

    CrossValidation cv;
    auto compare = [&](const std::vector<double>& a, const std::vector<double>& b) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            cv.max_state_error = std::max(cv.max_state_error, std::abs(a[i] - b[i]) / (1.0 + std::abs(b[i])));
        }
    };
    compare(solution.state.nu, phys.nu);
    compare(solution.state.P, phys.P);
    compare(solution.state.Q, phys.Q);
    compare(solution.state.l, phys.l);

    std::vector<InverterOutput> outputs;
    for (std::size_t k = 0; k < solution.inverter_buses.size(); ++k) {
        outputs.push_back({solution.inverter_buses[k], solution.p_g[k], solution.q_g_star[k]});
    }
    std::vector<LossModel> loss = solution.map.loss;
    if (config.drop_standby) {
        for (auto& m : loss) {
            m.standby = 0.0;
        }
    }
    cv.socp_objective = solution.objective;
    cv.sweep_objective = objective_terms(model, phys, outputs, solution.map.weights, loss).total;
    cv.objective_error =
        std::abs(cv.socp_objective - cv.sweep_objective) / (1.0 + std::abs(cv.sweep_objective));
    cv.pass = cv.max_state_error <= tol && cv.objective_error <= tol;
    return cv;
}

void write_solution_csv(std::ostream& bus_out, std::ostream& line_out, const FeederModel& model,
                        const OpfSolution& solution)
{
    std::vector<double> q(model.bus_count(), 0.0);
    for (std::size_t k = 0; k < solution.inverter_buses.size(); ++k) {
        q[solution.inverter_buses[k]] += solution.q_g_star[k];
    }
    bus_out << "bus,nu,v,q_g\n";
    for (std::size_t i = 0; i < model.bus_count(); ++i) {
        const double nu = solution.state.nu[i];
        fmt::print(bus_out, "{},{:.10g},{:.10g},{:.10g}\n", model.buses()[i].id, nu,
                   std::sqrt(std::max(nu, 0.0)), q[i]);
    }
    line_out << "from,to,P,Q,l\n";
    for (std::size_t k = 0; k < model.line_count(); ++k) {
        const Line& ln = model.lines()[k];
        fmt::print(line_out, "{},{},{:.10g},{:.10g},{:.10g}\n", model.buses()[ln.from].id,
                   model.buses()[ln.to].id, solution.state.P[k], solution.state.Q[k],
                   solution.state.l[k]);
    }
}

void write_summary_csv(std::ostream& out, const OpfSolution& solution, bool header)
{
    if (header) {
        out << "status,objective,line_loss,cvr_cost,inverter_loss,total,max_gap,iterations\n";
    }
    if (solution.status != conic::Status::optimal) {
        fmt::print(out, "{},,,,,,,{}\n", conic::to_string(solution.status), solution.solver.iterations);
        return;
    }
    fmt::print(out, "{},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.3g},{}\n",
               conic::to_string(solution.status), solution.objective, solution.costs.line_loss,
               solution.costs.cvr_cost, solution.costs.inverter_loss, solution.costs.total,
               solution.tightness.max_relative_gap, solution.solver.iterations);
}

} // namespace distvar
