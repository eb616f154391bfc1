#include "distvar/feeder.hpp"

#include "distvar/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <queue>
#include <sstream>
#include <string>

namespace distvar {

Bases Bases::from_voltage_power(double v_base, double s_base)
{
    if (!(v_base > 0.0) || !(s_base > 0.0)) {
        throw ParseError("bases must be strictly positive");
    }
    return Bases{v_base, s_base, v_base * v_base / s_base};
}

double LossModel::operator()(double p, double q) const
{
    const double s2 = p * p + q * q;
    return standby + linear * std::sqrt(s2) + quadratic * s2;
}

LossModel InverterSpec::loss_pu() const
{
    return LossModel{loss.c_s * s_rated, loss.c_v, loss.c_r / s_rated};
}

double InverterSpec::var_limit(double p) const
{
    const double slack = s_rated * s_rated - p * p;
    if (slack < -1e-12 * s_rated * s_rated) {
        throw ScenarioError("inverter real output " + std::to_string(p) + " pu exceeds rating " +
                            std::to_string(s_rated) + " pu");
    }
    return std::sqrt(std::max(slack, 0.0));
}

Topology validate_radial(std::size_t bus_count, std::span<const Line> lines, std::size_t root)
{
    if (root >= bus_count) {
        throw TopologyError("root bus index out of range");
    }
    std::vector<std::vector<std::size_t>> incident(bus_count);
    for (std::size_t k = 0; k < lines.size(); ++k) {
        const Line& ln = lines[k];
        if (ln.from >= bus_count || ln.to >= bus_count) {
            throw TopologyError("line " + std::to_string(k) + " references an unknown bus");
        }
        if (ln.from == ln.to) {
            throw TopologyError("cycle detected: line " + std::to_string(k) + " is a self-loop");
        }
        incident[ln.from].push_back(k);
        incident[ln.to].push_back(k);
    }

    Topology topo;
    topo.parent.assign(bus_count, npos);
    topo.parent_line.assign(bus_count, npos);
    topo.child_lines.assign(bus_count, {});
    topo.order.reserve(bus_count);

    std::vector<bool> seen(bus_count, false);
    std::queue<std::size_t> frontier;
    frontier.push(root);
    seen[root] = true;
    while (!frontier.empty()) {
        const std::size_t bus = frontier.front();
        frontier.pop();
        topo.order.push_back(bus);
        for (std::size_t k : incident[bus]) {
            if (k == topo.parent_line[bus]) {
                continue;
            }
            const std::size_t other = lines[k].from == bus ? lines[k].to : lines[k].from;
            if (seen[other]) {
                throw TopologyError("cycle detected through line " + std::to_string(k));
            }
            seen[other] = true;
            topo.parent[other] = bus;
            topo.parent_line[other] = k;
            topo.child_lines[bus].push_back(k);
            frontier.push(other);
        }
    }
    for (std::size_t i = 0; i < bus_count; ++i) {
        if (!seen[i]) {
            throw TopologyError("unreachable bus at index " + std::to_string(i));
        }
    }
    for (auto& children : topo.child_lines) {
        std::sort(children.begin(), children.end());
    }
    return topo;
}

FeederModel FeederModel::build(Bases bases, std::vector<Bus> buses, std::vector<Line> lines,
                               std::size_t root)
{
    if (!(bases.v_base > 0.0) || !(bases.s_base > 0.0) || !(bases.z_base > 0.0)) {
        throw Error("bases must be strictly positive");
    }
    if (std::abs(bases.z_base - bases.v_base * bases.v_base / bases.s_base) >
        1e-9 * bases.z_base) {
        throw Error("z_base is inconsistent with v_base^2 / s_base");
    }
    {
        std::vector<int> ids;
        ids.reserve(buses.size());
        for (const Bus& b : buses) {
            ids.push_back(b.id);
        }
        std::sort(ids.begin(), ids.end());
        if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
            throw Error("duplicate bus id");
        }
    }
    for (const Bus& b : buses) {
        const std::string where = "bus " + std::to_string(b.id) + ": ";
        if (!(b.load_exponent >= 0.0 && b.load_exponent <= 2.0)) {
            throw Error(where + "load exponent must lie in [0, 2]");
        }
        if (!(b.v_min > 0.0) || !(b.v_min < b.v_max)) {
            throw Error(where + "voltage bounds must satisfy 0 < v_min < v_max");
        }
        if (!(b.peak_load >= 0.0) || !(b.shunt_cap >= 0.0)) {
            throw Error(where + "load and capacitor ratings must be nonnegative");
        }
        if (b.inverter) {
            const auto& inv = *b.inverter;
            if (!(inv.s_rated > 0.0)) {
                throw Error(where + "inverter rating must be positive");
            }
            if (!(inv.loss.c_s >= 0.0 && inv.loss.c_v >= 0.0 && inv.loss.c_r >= 0.0)) {
                throw Error(where + "inverter loss coefficients must be nonnegative");
            }
        }
    }
    for (const Line& ln : lines) {
        if (!(ln.r >= 0.0) || !std::isfinite(ln.x)) {
            throw Error("line resistance must be nonnegative and reactance finite");
        }
    }
    if (lines.size() + 1 != buses.size()) {
        // Let validate_radial name the actual defect when it can.
        validate_radial(buses.size(), lines, root);
        throw TopologyError("a radial feeder needs exactly one line fewer than buses");
    }

    Topology topo = validate_radial(buses.size(), lines, root);
    for (std::size_t bus = 0; bus < buses.size(); ++bus) {
        const std::size_t k = topo.parent_line[bus];
        if (k != npos && lines[k].to != bus) {
            std::swap(lines[k].from, lines[k].to);
        }
    }

    FeederModel model;
    model.bases_ = bases;
    model.buses_ = std::move(buses);
    model.lines_ = std::move(lines);
    model.root_ = root;
    model.topology_ = std::move(topo);
    return model;
}

std::size_t FeederModel::index_of(int bus_id) const
{
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        if (buses_[i].id == bus_id) {
            return i;
        }
    }
    return npos;
}

std::vector<std::size_t> FeederModel::inverter_buses() const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        if (buses_[i].inverter) {
            out.push_back(i);
        }
    }
    return out;
}

std::vector<std::size_t> FeederModel::capacitor_buses() const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        if (buses_[i].shunt_cap > 0.0) {
            out.push_back(i);
        }
    }
    return out;
}

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view row)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = row.find(',', start);
        out.push_back(trim(row.substr(start, comma - start)));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

double to_double(std::string_view field, int line)
{
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(value)) {
        throw ParseError("expected a number, got '" + std::string(field) + "'", line);
    }
    return value;
}

int to_int(std::string_view field, int line)
{
    int value = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw ParseError("expected a bus id, got '" + std::string(field) + "'", line);
    }
    return value;
}

struct RawLine {
    int from, to;
    double r_ohm, x_ohm;
    int line_no;
};

struct RawFeeder {
    std::optional<double> v_kv, s_mva, z_ohm;
    std::optional<int> root;
    bool explicit_buses = false;
    std::map<int, std::pair<double, double>> bus_bounds; // only for [buses] rows with bounds
    std::vector<int> bus_ids;
    std::vector<RawLine> lines;
    std::map<int, std::pair<double, double>> loads; // peak MVA, exponent
    std::map<int, double> caps;
    std::map<int, InverterSpec> inverters; // s_rated in MVA until conversion
};

void expect_fields(const std::vector<std::string_view>& f, std::size_t lo, std::size_t hi,
                   int line)
{
    if (f.size() < lo || f.size() > hi) {
        throw ParseError("expected " + std::to_string(lo) +
                             (hi == lo ? "" : "-" + std::to_string(hi)) + " fields, got " +
                             std::to_string(f.size()),
                         line);
    }
}

RawFeeder read_sections(std::string_view text, const FeederDefaults& defaults)
{
    RawFeeder raw;
    std::string section;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            nl = text.size();
        }
        const std::string_view row = trim(text.substr(pos, nl - pos));
        pos = nl + 1;
        ++line_no;
        if (row.empty() || row.front() == '#') {
            continue;
        }
        if (row.front() == '[') {
            if (row.back() != ']') {
                throw ParseError("malformed section header", line_no);
            }
            section = std::string(trim(row.substr(1, row.size() - 2)));
            static const char* known[] = {"bases", "root", "buses", "lines",
                                          "loads", "shunt_caps", "inverters"};
            if (std::find(std::begin(known), std::end(known), section) == std::end(known)) {
                throw ParseError("unknown section [" + section + "]", line_no);
            }
            if (section == "buses") {
                raw.explicit_buses = true;
            }
            continue;
        }
        if (section.empty()) {
            throw ParseError("data outside of a section", line_no);
        }
        const auto f = split_fields(row);
        if (section == "bases") {
            expect_fields(f, 2, 2, line_no);
            const double value = to_double(f[1], line_no);
            if (f[0] == "v_kv") {
                raw.v_kv = value;
            } else if (f[0] == "s_mva") {
                raw.s_mva = value;
            } else if (f[0] == "z_ohm") {
                raw.z_ohm = value;
            } else {
                throw ParseError("unknown base '" + std::string(f[0]) + "'", line_no);
            }
        } else if (section == "root") {
            expect_fields(f, 1, 1, line_no);
            if (raw.root) {
                throw ParseError("root given twice", line_no);
            }
            raw.root = to_int(f[0], line_no);
        } else if (section == "buses") {
            if (f.size() != 1 && f.size() != 3) {
                throw ParseError("expected bus[,v_min,v_max]", line_no);
            }
            const int id = to_int(f[0], line_no);
            if (std::find(raw.bus_ids.begin(), raw.bus_ids.end(), id) != raw.bus_ids.end()) {
                throw ParseError("duplicate bus id " + std::to_string(id), line_no);
            }
            raw.bus_ids.push_back(id);
            if (f.size() == 3) {
                raw.bus_bounds[id] = {to_double(f[1], line_no), to_double(f[2], line_no)};
            }
        } else if (section == "lines") {
            expect_fields(f, 4, 4, line_no);
            raw.lines.push_back({to_int(f[0], line_no), to_int(f[1], line_no),
                                 to_double(f[2], line_no), to_double(f[3], line_no), line_no});
        } else if (section == "loads") {
            expect_fields(f, 2, 3, line_no);
            const int id = to_int(f[0], line_no);
            const double n = f.size() == 3 ? to_double(f[2], line_no) : defaults.load_exponent;
            if (!raw.loads.emplace(id, std::pair{to_double(f[1], line_no), n}).second) {
                throw ParseError("duplicate bus id " + std::to_string(id) + " in [loads]",
                                 line_no);
            }
        } else if (section == "shunt_caps") {
            expect_fields(f, 2, 2, line_no);
            const int id = to_int(f[0], line_no);
            if (!raw.caps.emplace(id, to_double(f[1], line_no)).second) {
                throw ParseError("duplicate bus id " + std::to_string(id) + " in [shunt_caps]",
                                 line_no);
            }
        } else if (section == "inverters") {
            if (f.size() != 2 && f.size() != 5) {
                throw ParseError("expected bus,s_rated_mva[,c_s,c_v,c_r]", line_no);
            }
            const int id = to_int(f[0], line_no);
            InverterSpec inv;
            inv.s_rated = to_double(f[1], line_no);
            inv.loss = defaults.loss;
            if (f.size() == 5) {
                inv.loss = {to_double(f[2], line_no), to_double(f[3], line_no),
                            to_double(f[4], line_no)};
            }
            if (!raw.inverters.emplace(id, inv).second) {
                throw ParseError("duplicate bus id " + std::to_string(id) + " in [inverters]",
                                 line_no);
            }
        }
    }
    return raw;
}

} // namespace

FeederModel parse_feeder(std::string_view text, const FeederDefaults& defaults)
{
    RawFeeder raw = read_sections(text, defaults);

    if (!raw.v_kv || !raw.s_mva) {
        throw ParseError("[bases] must define v_kv and s_mva");
    }
    if (!(*raw.v_kv > 0.0) || !(*raw.s_mva > 0.0) || (raw.z_ohm && !(*raw.z_ohm > 0.0))) {
        throw ParseError("non-positive base");
    }
    const Bases bases = Bases::from_voltage_power(*raw.v_kv * 1e3, *raw.s_mva * 1e6);
    if (raw.z_ohm && std::abs(*raw.z_ohm - bases.z_base) > 1e-9 * bases.z_base) {
        throw ParseError("z_ohm disagrees with v_kv^2 / s_mva");
    }
    if (!raw.root) {
        throw ParseError("missing [root] section");
    }

    if (!raw.explicit_buses) {
        raw.bus_ids.push_back(*raw.root);
        for (const RawLine& ln : raw.lines) {
            raw.bus_ids.push_back(ln.from);
            raw.bus_ids.push_back(ln.to);
        }
        std::sort(raw.bus_ids.begin(), raw.bus_ids.end());
        raw.bus_ids.erase(std::unique(raw.bus_ids.begin(), raw.bus_ids.end()),
                          raw.bus_ids.end());
    } else {
        std::sort(raw.bus_ids.begin(), raw.bus_ids.end());
    }

    std::map<int, std::size_t> index;
    for (std::size_t i = 0; i < raw.bus_ids.size(); ++i) {
        index[raw.bus_ids[i]] = i;
    }
    auto lookup = [&](int id, int line_no, const char* what) {
        const auto it = index.find(id);
        if (it == index.end()) {
            throw ParseError(std::string(what) + " references unknown bus " + std::to_string(id),
                             line_no);
        }
        return it->second;
    };

    std::vector<Bus> buses(raw.bus_ids.size());
    for (std::size_t i = 0; i < buses.size(); ++i) {
        buses[i].id = raw.bus_ids[i];
        buses[i].load_exponent = defaults.load_exponent;
        buses[i].v_min = defaults.v_min;
        buses[i].v_max = defaults.v_max;
    }
    for (const auto& [id, bounds] : raw.bus_bounds) {
        Bus& b = buses[lookup(id, 0, "bus bounds")];
        b.v_min = bounds.first;
        b.v_max = bounds.second;
    }
    for (const auto& [id, load] : raw.loads) {
        Bus& b = buses[lookup(id, 0, "load")];
        b.peak_load = bases.mva_to_pu(load.first);
        b.load_exponent = load.second;
    }
    for (const auto& [id, mvar] : raw.caps) {
        buses[lookup(id, 0, "shunt capacitor")].shunt_cap = bases.mva_to_pu(mvar);
    }
    for (const auto& [id, inv] : raw.inverters) {
        InverterSpec spec = inv;
        spec.s_rated = bases.mva_to_pu(inv.s_rated);
        buses[lookup(id, 0, "inverter")].inverter = spec;
    }

    std::vector<Line> lines;
    lines.reserve(raw.lines.size());
    for (const RawLine& ln : raw.lines) {
        lines.push_back(Line{lookup(ln.from, ln.line_no, "line"), lookup(ln.to, ln.line_no, "line"),
                             bases.ohm_to_pu(ln.r_ohm), bases.ohm_to_pu(ln.x_ohm)});
    }
    const std::size_t root = lookup(*raw.root, 0, "root");

    try {
        return FeederModel::build(bases, std::move(buses), std::move(lines), root);
    } catch (const TopologyError&) {
        throw;
    } catch (const Error& e) {
        throw ParseError(e.what());
    }
}

FeederModel load_feeder(const std::filesystem::path& path, const FeederDefaults& defaults)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open feeder file " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_feeder(buffer.str(), defaults);
}

} // namespace distvar
