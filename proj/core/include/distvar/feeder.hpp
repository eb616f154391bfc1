#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace distvar {

inline constexpr std::size_t npos = static_cast<std::size_t>(-1);

/// System bases in SI units. z_base is always v_base^2 / s_base.
struct Bases {
    double v_base = 12e3;  // V
    double s_base = 1e6;   // VA
    double z_base = 144.0; // ohm

    static Bases from_voltage_power(double v_base, double s_base);

    double ohm_to_pu(double ohm) const { return ohm / z_base; }
    double pu_to_ohm(double pu) const { return pu * z_base; }
    double mva_to_pu(double mva) const { return mva * 1e6 / s_base; }
    double pu_to_mva(double pu) const { return pu * s_base / 1e6; }

    friend bool operator==(const Bases&, const Bases&) = default;
};

/// Inverter loss coefficients normalised to the inverter rating:
/// loss(s) = S * (c_s + c_v * s/S + c_r * (s/S)^2).
struct LossCoefficients {
    double c_s = 0.01;
    double c_v = 0.01;
    double c_r = 0.01;

    friend bool operator==(const LossCoefficients&, const LossCoefficients&) = default;
};

/// Inverter loss polynomial in system per-unit: standby + linear*s + quadratic*s^2.
struct LossModel {
    double standby = 0.0;
    double linear = 0.0;
    double quadratic = 0.0;

    double operator()(double p, double q) const;
};

struct InverterSpec {
    double s_rated = 0.0; // pu
    LossCoefficients loss;

    LossModel loss_pu() const;
    /// Reactive capability sqrt(S^2 - p^2); throws ScenarioError when p exceeds the rating.
    double var_limit(double p) const;

    friend bool operator==(const InverterSpec&, const InverterSpec&) = default;
};

struct Bus {
    int id = 0;
    double peak_load = 0.0;     // apparent power at peak, pu
    double load_exponent = 1.0; // n in [0, 2]
    double shunt_cap = 0.0;     // pu var at nu = 1
    std::optional<InverterSpec> inverter;
    double v_min = 0.97;
    double v_max = 1.03;

    friend bool operator==(const Bus&, const Bus&) = default;
};

struct Line {
    std::size_t from = 0; // bus index, closer to the root
    std::size_t to = 0;
    double r = 0.0; // pu
    double x = 0.0; // pu

    friend bool operator==(const Line&, const Line&) = default;
};

/// Root-first ordering of a radial network.
struct Topology {
    std::vector<std::size_t> order;                      // buses, parents before children
    std::vector<std::size_t> parent;                     // npos for the root
    std::vector<std::size_t> parent_line;                // npos for the root
    std::vector<std::vector<std::size_t>> child_lines;   // per bus

    friend bool operator==(const Topology&, const Topology&) = default;
};

/// Checks that `lines` form a tree over `bus_count` buses rooted at `root`.
/// Lines may be given in either orientation. Throws TopologyError on a
/// cycle, a repeated edge or an unreachable bus.
Topology validate_radial(std::size_t bus_count, std::span<const Line> lines, std::size_t root);

/// Immutable per-unit radial feeder. Lines are oriented away from the root.
class FeederModel {
public:
    /// Validates the tree, orients every line away from the root and checks
    /// bus invariants.
    static FeederModel build(Bases bases, std::vector<Bus> buses, std::vector<Line> lines,
                             std::size_t root);

    const Bases& bases() const { return bases_; }
    const std::vector<Bus>& buses() const { return buses_; }
    const std::vector<Line>& lines() const { return lines_; }
    const Topology& topology() const { return topology_; }
    std::size_t root() const { return root_; }

    std::size_t bus_count() const { return buses_.size(); }
    std::size_t line_count() const { return lines_.size(); }

    /// Bus index for a file id; npos when absent.
    std::size_t index_of(int bus_id) const;
    /// Indices of buses that carry an inverter, ascending.
    std::vector<std::size_t> inverter_buses() const;
    /// Indices of buses with a nonzero shunt capacitor rating, ascending.
    std::vector<std::size_t> capacitor_buses() const;

    friend bool operator==(const FeederModel&, const FeederModel&) = default;

private:
    Bases bases_;
    std::vector<Bus> buses_;
    std::vector<Line> lines_;
    std::size_t root_ = 0;
    Topology topology_;
};

/// Defaults applied to quantities a feeder file leaves unspecified.
struct FeederDefaults {
    double v_min = 0.97;
    double v_max = 1.03;
    double load_exponent = 1.0;
    LossCoefficients loss;
};

/// Parses the sectioned CSV feeder format:
///
///   [bases]        v_kv,<kV> / s_mva,<MVA> / z_ohm,<ohm> (optional check)
///   [root]         <bus>
///   [buses]        bus[,v_min,v_max]   (optional; otherwise implied by lines)
///   [lines]        from,to,r_ohm,x_ohm
///   [loads]        bus,peak_mva[,n_exp]
///   [shunt_caps]   bus,mvar
///   [inverters]    bus,s_rated_mva[,c_s,c_v,c_r]
///
/// Lines starting with '#' are comments. Throws ParseError or TopologyError.
FeederModel parse_feeder(std::string_view text, const FeederDefaults& defaults = {});

FeederModel load_feeder(const std::filesystem::path& path, const FeederDefaults& defaults = {});

} // namespace distvar
