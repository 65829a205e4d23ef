#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "ropf/matpower.hpp"
#include "ropf/network.hpp"
#include "test_support.hpp"

using namespace ropf;
using ropf_test::data_path;

TEST_CASE("case9 parses with the published table sizes") {
    RawCase rc = load_case(data_path("case9.m"));
    CHECK(rc.base_mva == 100.0);
    CHECK(rc.bus_rows.size() == 9);
    CHECK(rc.gen_rows.size() == 3);
    CHECK(rc.branch_rows.size() == 9);
    CHECK(rc.gencost_rows.size() == 3);
}

TEST_CASE("missing tables are reported by name") {
    std::string text = R"(mpc.baseMVA = 100;
mpc.bus = [ 1 3 0 0 0 0 1 1 0 230 1 1.1 0.9; ];
mpc.gen = [ 1 0 0 10 -10 1 100 1 10 0; ];
mpc.gencost = [ 2 0 0 2 1 0; ];
)";
    try {
        parse_case(std::string_view(text));
        FAIL("expected MissingTableError");
    } catch (const MissingTableError& e) {
        CHECK(e.table == "branch");
    }
}

TEST_CASE("hand-written 3-bus case round-trips every numeric field") {
    RawCase rc = parse_case(std::string_view(ropf_test::kToyCase3));
    REQUIRE(rc.bus_rows.size() == 3);
    REQUIRE(rc.gen_rows.size() == 1);
    REQUIRE(rc.branch_rows.size() == 2);
    REQUIRE(rc.gencost_rows.size() == 1);

    const BusRow& b3 = rc.bus_rows[2];
    CHECK(b3.id == 3);
    CHECK(b3.type == 1);
    CHECK(b3.pd == 25.5);
    CHECK(b3.qd == 10.2);
    CHECK(b3.gs == 4.0);
    CHECK(b3.bs == -2.5);
    CHECK(b3.vm == 1.0);
    CHECK(b3.va_deg == 5.0);
    CHECK(b3.vmax == 1.08);
    CHECK(b3.vmin == 0.92);

    const GenRow& g = rc.gen_rows[0];
    CHECK(g.bus == 1);
    CHECK(g.pg == 50.0);
    CHECK(g.qg == 10.0);
    CHECK(g.qmax == 80.0);
    CHECK(g.qmin == -80.0);
    CHECK(g.status == 1);
    CHECK(g.pmax == 250.0);
    CHECK(g.pmin == 10.0);

    const BranchRow& br = rc.branch_rows[1];
    CHECK(br.from == 2);
    CHECK(br.to == 3);
    CHECK(br.r == 0.02);
    CHECK(br.x == 0.11);
    CHECK(br.b_ch == 0.0);
    CHECK(br.rate_a == 0.0);
    CHECK(br.ratio == 0.98);
    CHECK(br.angle_deg == 2.0);
    CHECK(br.status == 1);
    CHECK(br.angmin_deg == -30.0);
    CHECK(br.angmax_deg == 30.0);

    const GenCostRow& c = rc.gencost_rows[0];
    CHECK(c.model == 2);
    CHECK(c.startup == 1500.0);
    CHECK(c.n == 3);
    REQUIRE(c.coeffs.size() == 3);
    CHECK(c.coeffs[0] == 0.11);
    CHECK(c.coeffs[1] == 5.0);
    CHECK(c.coeffs[2] == 150.0);
}

TEST_CASE("piecewise-linear cost models are rejected") {
    std::string text(ropf_test::kToyCase3);
    auto pos = text.find("2  1500  0  3");
    text.replace(pos, 1, "1");
    CHECK_THROWS_AS(parse_case(std::string_view(text)), UnsupportedCostModelError);
}

TEST_CASE("cubic and higher cost polynomials are rejected") {
    std::string text(ropf_test::kToyCase3);
    auto pos = text.find("2  1500  0  3  0.11  5  150;");
    text.replace(pos, 28, "2  1500  0  4  0.  0.11  5  150;");
    CHECK_THROWS_AS(parse_case(std::string_view(text)), UnsupportedCostModelError);
}

TEST_CASE("reactive cost rows beyond the generator count are ignored") {
    std::string text(ropf_test::kToyCase3);
    auto pos = text.find("mpc.gencost = [");
    std::string doubled =
        "mpc.gencost = [\n    2  1500  0  3  0.11  5  150;\n    2  0  0  3  1  1  1;\n];\n";
    text = text.substr(0, pos) + doubled;
    RawCase rc = parse_case(std::string_view(text));
    REQUIRE(rc.gencost_rows.size() == 1);
    CHECK(rc.gencost_rows[0].coeffs[0] == 0.11);
}

TEST_CASE("a short row is a malformed-row error with its line number") {
    std::string text(ropf_test::kToyCase3);
    auto pos = text.find("    2  1  90   30   0  0    1  1.0  0  230  1  1.1  0.9;");
    text.replace(pos, 57, "    2  1  90   30;");
    try {
        parse_case(std::string_view(text));
        FAIL("expected MalformedRowError");
    } catch (const MalformedRowError& e) {
        CHECK(e.line == 6);
    }
}

TEST_CASE("parsing is deterministic") {
    std::ifstream f(data_path("case14.m"));
    std::stringstream ss;
    ss << f.rdbuf();
    std::string text = ss.str();
    RawCase a = parse_case(std::string_view(text));
    RawCase b = parse_case(std::string_view(text));
    REQUIRE(a.bus_rows.size() == b.bus_rows.size());
    for (size_t i = 0; i < a.bus_rows.size(); ++i) {
        CHECK(a.bus_rows[i].pd == b.bus_rows[i].pd);
        CHECK(a.bus_rows[i].vmin == b.bus_rows[i].vmin);
    }
    Network na = to_network(a), nb = to_network(b);
    for (int i = 0; i < na.num_buses(); ++i) {
        CHECK(na.buses()[i].p_d == nb.buses()[i].p_d);
        CHECK(na.buses()[i].b_sh == nb.buses()[i].b_sh);
    }
    for (size_t e = 0; e < na.lines().size(); ++e) {
        CHECK(na.lines()[e].coeffs.b_ij == nb.lines()[e].coeffs.b_ij);
        CHECK(na.lines()[e].coeffs.g_c_ji == nb.lines()[e].coeffs.g_c_ji);
    }
}

TEST_CASE("per-unit load totals match the MW totals") {
    for (const char* name : {"case9.m", "case30.m", "case300.m"}) {
        RawCase rc = load_case(data_path(name));
        double mw = 0;
        for (const auto& b : rc.bus_rows) mw += b.pd;
        Network net = to_network(rc);
        double pu = 0;
        for (const auto& b : net.buses()) pu += b.p_d;
        INFO(name);
        CHECK(std::abs(pu * net.base_mva() - mw) <= 1e-9 * std::max(1.0, std::abs(mw)));
    }
}

TEST_CASE("all bundled cases parse and convert") {
    for (const char* name : {"case5.m", "case6ww.m", "case9.m", "case14.m", "case24_ieee_rts.m",
                             "case30.m", "case39.m", "case57.m", "case118.m", "case300.m"}) {
        INFO(name);
        Network net = to_network(load_case(data_path(name)));
        CHECK(net.num_buses() > 0);
        CHECK(net.ref_bus() >= 0);
    }
}
