#include "distvar/error.hpp"
#include "distvar/feeder.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

using namespace distvar;

namespace {

std::string slurp(const char* path)
{
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Raw rows of one section, split on commas, comments skipped.
std::vector<std::vector<double>> raw_rows(const std::string& text, const std::string& section)
{
    std::vector<std::vector<double>> rows;
    std::istringstream in(text);
    std::string line;
    bool inside = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        if (line[0] == '[') {
            inside = line == "[" + section + "]";
            continue;
        }
        if (!inside) {
            continue;
        }
        std::vector<double> row;
        std::istringstream fields(line);
        std::string f;
        while (std::getline(fields, f, ',')) {
            row.push_back(std::stod(f));
        }
        rows.push_back(row);
    }
    return rows;
}

const char* two_bus = R"([bases]
v_kv,12
s_mva,1
[root]
1
[lines]
1,2,1.44,2.88
[loads]
)";

bool message_has(const std::function<void()>& fn, const std::string& needle)
{
    try {
        fn();
    } catch (const Error& e) {
        return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
}

} // namespace

TEST_CASE("bundled feeder shape")
{
    const auto model = load_feeder(DISTVAR_BUNDLED_FEEDER);
    CHECK(model.bus_count() == 56);
    CHECK(model.line_count() == 55);
    CHECK(model.buses()[model.root()].id == 1);

    const auto caps = model.capacitor_buses();
    REQUIRE(caps.size() == 4);
    std::vector<int> cap_ids;
    for (auto i : caps) {
        cap_ids.push_back(model.buses()[i].id);
        CHECK(model.buses()[i].shunt_cap == doctest::Approx(0.6));
    }
    CHECK(cap_ids == std::vector<int>{19, 21, 30, 53});

    const auto inv = model.inverter_buses();
    REQUIRE(inv.size() == 1);
    CHECK(model.buses()[inv[0]].id == 45);
    CHECK(model.buses()[inv[0]].inverter->s_rated == doctest::Approx(5.5));

    double total = 0.0;
    for (const auto& b : model.buses()) {
        total += b.peak_load;
    }
    CHECK(total == doctest::Approx(3.835).epsilon(1e-12));
}

TEST_CASE("first line converts to per unit")
{
    const auto model = load_feeder(DISTVAR_BUNDLED_FEEDER);
    const auto& bus_a = model.index_of(1);
    const auto& bus_b = model.index_of(2);
    bool found = false;
    for (const auto& ln : model.lines()) {
        if (ln.from == bus_a && ln.to == bus_b) {
            CHECK(ln.r == doctest::Approx(0.160 / 144.0).epsilon(1e-14));
            CHECK(ln.x == doctest::Approx(0.388 / 144.0).epsilon(1e-14));
            found = true;
        }
    }
    CHECK(found);
}

TEST_CASE("per-unit values round trip to the file data")
{
    const std::string text = slurp(DISTVAR_BUNDLED_FEEDER);
    const auto model = parse_feeder(text);
    const auto& bases = model.bases();

    const auto lines = raw_rows(text, "lines");
    REQUIRE(lines.size() == model.line_count());
    for (const auto& row : lines) {
        const auto i = model.index_of(static_cast<int>(row[0]));
        const auto j = model.index_of(static_cast<int>(row[1]));
        const auto& topo = model.topology();
        const auto child = topo.parent[j] == i ? j : i;
        const auto& ln = model.lines()[topo.parent_line[child]];
        CHECK(std::abs(bases.pu_to_ohm(ln.r) - row[2]) <= 1e-9 * row[2]);
        CHECK(std::abs(bases.pu_to_ohm(ln.x) - row[3]) <= 1e-9 * row[3]);
    }
    for (const auto& row : raw_rows(text, "loads")) {
        const auto& bus = model.buses()[model.index_of(static_cast<int>(row[0]))];
        CHECK(std::abs(bases.pu_to_mva(bus.peak_load) - row[1]) <= 1e-9 * row[1]);
    }
    for (const auto& row : raw_rows(text, "shunt_caps")) {
        const auto& bus = model.buses()[model.index_of(static_cast<int>(row[0]))];
        CHECK(std::abs(bases.pu_to_mva(bus.shunt_cap) - row[1]) <= 1e-9 * row[1]);
    }
}

TEST_CASE("parsing is deterministic")
{
    const std::string text = slurp(DISTVAR_BUNDLED_FEEDER);
    CHECK(parse_feeder(text) == parse_feeder(text));
}

TEST_CASE("absent loads default to zero")
{
    const auto model = parse_feeder(two_bus);
    CHECK(model.bus_count() == 2);
    CHECK(model.line_count() == 1);
    for (const auto& b : model.buses()) {
        CHECK(b.peak_load == 0.0);
        CHECK(b.shunt_cap == 0.0);
        CHECK_FALSE(b.inverter);
    }
    CHECK(model.lines()[0].r == doctest::Approx(0.01));
    CHECK(model.lines()[0].x == doctest::Approx(0.02));
}

TEST_CASE("optional columns and defaults")
{
    FeederDefaults d;
    d.v_min = 0.95;
    d.v_max = 1.05;
    const auto model = parse_feeder(std::string(two_bus) + "2,0.5,1.6\n[inverters]\n2,1.0,0.02,0,0.5\n", d);
    const auto& b = model.buses()[model.index_of(2)];
    CHECK(b.load_exponent == doctest::Approx(1.6));
    CHECK(b.v_min == doctest::Approx(0.95));
    CHECK(b.v_max == doctest::Approx(1.05));
    REQUIRE(b.inverter);
    CHECK(b.inverter->loss == LossCoefficients{0.02, 0.0, 0.5});
    CHECK(model.buses()[model.index_of(1)].load_exponent == doctest::Approx(1.0));
}

TEST_CASE("inverter var limit")
{
    InverterSpec inv{5.5, {}};
    CHECK(inv.var_limit(4.0) == doctest::Approx(std::sqrt(5.5 * 5.5 - 16.0)).epsilon(1e-14));
    CHECK(inv.var_limit(4.0) == doctest::Approx(3.7749172176).epsilon(1e-9));
    CHECK(inv.var_limit(5.5) == doctest::Approx(0.0));
    CHECK_THROWS_AS(inv.var_limit(5.6), ScenarioError);
}

TEST_CASE("inverter loss model in system per unit")
{
    InverterSpec inv{2.0, {0.01, 0.02, 0.03}};
    const auto m = inv.loss_pu();
    CHECK(m.standby == doctest::Approx(0.02));
    CHECK(m.linear == doctest::Approx(0.02));
    CHECK(m.quadratic == doctest::Approx(0.015));
    // At s = S: S (c_s + c_v + c_r).
    CHECK(m(1.2, 1.6) == doctest::Approx(2.0 * 0.06));
}

TEST_CASE("validate_radial orders a path")
{
    const std::vector<Line> lines{{1, 2, 0.1, 0.1}, {0, 1, 0.1, 0.1}};
    const auto topo = validate_radial(3, lines, 0);
    CHECK(topo.order == std::vector<std::size_t>{0, 1, 2});
    CHECK(topo.parent[0] == npos);
    CHECK(topo.parent[1] == 0);
    CHECK(topo.parent[2] == 1);
}

TEST_CASE("validate_radial rejects cycles and unreachable buses")
{
    const std::vector<Line> cycle{{0, 1, 0.1, 0.1}, {1, 2, 0.1, 0.1}, {2, 0, 0.1, 0.1}};
    CHECK(message_has([&] { validate_radial(3, cycle, 0); }, "cycle detected"));
    const std::vector<Line> split{{0, 1, 0.1, 0.1}, {2, 3, 0.1, 0.1}, {3, 2, 0.1, 0.1}};
    CHECK_THROWS_AS(validate_radial(4, split, 0), TopologyError);
    const std::vector<Line> short_tree{{0, 1, 0.1, 0.1}};
    CHECK(message_has([&] { validate_radial(3, short_tree, 0); }, "unreachable bus"));
}

TEST_CASE("bundled topology is rooted at bus 1 with parents first")
{
    const auto model = load_feeder(DISTVAR_BUNDLED_FEEDER);
    const auto& topo = model.topology();
    REQUIRE(topo.order.size() == 56);
    CHECK(model.buses()[topo.order[0]].id == 1);
    std::vector<int> seen(model.bus_count(), 0);
    for (auto b : topo.order) {
        if (topo.parent[b] != npos) {
            CHECK(seen[topo.parent[b]] == 1);
        }
        seen[b] = 1;
    }
    for (const auto& ln : model.lines()) {
        CHECK(topo.parent[ln.to] == ln.from);
    }
}

TEST_CASE("parse errors")
{
    const std::string head = "[bases]\nv_kv,12\ns_mva,1\n[root]\n1\n";
    CHECK(message_has([&] { parse_feeder(head + "[lines]\n1,2,1,1\n2,3,1,1\n3,1,1,1\n"); },
                      "cycle detected"));
    CHECK(message_has(
        [&] { parse_feeder(head + "[buses]\n1\n2\n[lines]\n1,2,1,1\n2,7,1,1\n"); },
        "unknown bus"));
    CHECK(message_has([&] { parse_feeder(head + "[buses]\n1\n2\n2\n[lines]\n1,2,1,1\n"); },
                      "duplicate bus id"));
    CHECK(message_has([&] { parse_feeder(head + "[lines]\n1,2,1,1\n[loads]\n2,0.1\n2,0.2\n"); },
                      "duplicate bus id"));
    CHECK(message_has([&] { parse_feeder("[bases]\nv_kv,0\ns_mva,1\n[root]\n1\n[lines]\n1,2,1,1\n"); },
                      "non-positive base"));
    CHECK(message_has([&] { parse_feeder("[bases]\nv_kv,12\ns_mva,-1\n[root]\n1\n[lines]\n1,2,1,1\n"); },
                      "non-positive base"));
    CHECK(message_has([&] { parse_feeder(head + "[lines]\n1,2,abc,1\n"); }, "line 7"));
    CHECK(message_has([&] { parse_feeder("[bases]\nv_kv,12\ns_mva,1\nz_ohm,100\n[root]\n1\n[lines]\n1,2,1,1\n"); },
                      "z_ohm"));
    CHECK(message_has([&] { parse_feeder(head + "[lines]\n1,2,1,1\n[weird]\n"); }, "unknown section"));
    CHECK(message_has([&] { parse_feeder(head + "[lines]\n1,2,1,1\n[loads]\n2,0.1,2.5\n"); },
                      "load exponent"));
    CHECK_THROWS_AS(load_feeder("/nonexistent/feeder.csv"), Error);
}

TEST_CASE("bases derive z from v and s")
{
    const auto b = Bases::from_voltage_power(12e3, 1e6);
    CHECK(b.z_base == doctest::Approx(144.0));
    CHECK(b.ohm_to_pu(0.160) == doctest::Approx(0.160 / 144.0));
    CHECK(b.mva_to_pu(0.6) == doctest::Approx(0.6));
    CHECK_THROWS_AS(Bases::from_voltage_power(0.0, 1e6), Error);
}
