#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <numbers>
#include <random>

#include "ropf/matpower.hpp"
#include "ropf/network.hpp"
#include "test_support.hpp"

using namespace ropf;
using ropf_test::data_path;
using cd = std::complex<double>;

TEST_CASE("purely reactive symmetric line") {
    LineCoefficients c = line_coefficients(cd(0, -1), 0.0, cd(1, 0));
    CHECK(c.g_ij == 0.0);
    CHECK(c.b_ij == 1.0);
    CHECK(c.g_c_ij == 0.0);
    CHECK(c.b_c_ij == 1.0);
    CHECK(c.g_ji == c.g_ij);
    CHECK(c.b_ji == c.b_ij);
    CHECK(c.g_c_ji == c.g_c_ij);
    CHECK(c.b_c_ji == c.b_c_ij);
}

TEST_CASE("resistive line with a real 2:1 tap") {
    // hand complex arithmetic: Y* = 1, |T|^2 = 4
    LineCoefficients c = line_coefficients(cd(1, 0), 0.0, cd(2, 0));
    CHECK(c.g_c_ij == 0.25);
    CHECK(c.g_ij == 0.5);
    CHECK(c.g_c_ji == 1.0);
    CHECK(c.g_ji == 0.5);
    CHECK(c.b_c_ij == 0.0);
    CHECK(c.b_ij == 0.0);
    CHECK(c.b_c_ji == 0.0);
    CHECK(c.b_ji == 0.0);
}

TEST_CASE("no transformer means ij and ji coefficients coincide") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int trial = 0; trial < 50; ++trial) {
        cd y(u(rng), u(rng));
        if (std::abs(y) < 1e-3) continue;
        LineCoefficients c = line_coefficients(y, 0.0, cd(1, 0));
        CHECK(c.g_ij == c.g_ji);
        CHECK(c.b_ij == c.b_ji);
        CHECK(c.g_c_ij == c.g_c_ji);
        CHECK(c.b_c_ij == c.b_c_ji);
    }
}

TEST_CASE("degenerate lines are rejected") {
    CHECK_THROWS_AS(line_coefficients(cd(0, -1), 0.0, cd(0, 0)), ZeroTapError);
    CHECK_THROWS_AS(line_coefficients(cd(0, 0), 0.0, cd(1, 0)), ZeroAdmittanceError);
}

TEST_CASE("per-unit conversion of the toy case") {
    Network net = to_network(parse_case(std::string_view(ropf_test::kToyCase3)));
    REQUIRE(net.num_buses() == 3);
    const Bus& b2 = net.buses()[1];
    CHECK(b2.p_d == 0.9);  // 90 MW on a 100 MVA base
    CHECK(b2.q_d == 0.3);
    const Bus& b3 = net.buses()[2];
    CHECK(b3.g_sh == 0.04);
    CHECK(b3.b_sh == -0.025);

    // branch 1: ratio 0 becomes tap magnitude 1
    CHECK(std::abs(net.lines()[0].tap) == 1.0);
    // branch 2: 2 degree shift
    CHECK(std::arg(net.lines()[1].tap) == Catch::Approx(2.0 * std::numbers::pi / 180.0));
    // angle bounds of branch 2: +-30 degrees in radians
    CHECK(net.lines()[1].theta_min == Catch::Approx(-std::numbers::pi / 6));
    CHECK(net.lines()[1].theta_max == Catch::Approx(std::numbers::pi / 6));
    // branch 1 has -360/360 angle rows: unconstrained
    CHECK_FALSE(net.lines()[0].has_angle_limits());
    // rate 250 MVA -> 2.5 p.u.; rate 0 -> none
    REQUIRE(net.lines()[0].s_max.has_value());
    CHECK(*net.lines()[0].s_max == 2.5);
    CHECK_FALSE(net.lines()[1].s_max.has_value());

    // generator cost rescaled to per-unit power
    const Generator& g = net.generators()[0];
    CHECK(g.c2 == 0.11 * 100 * 100);
    CHECK(g.c1 == 5.0 * 100);
    CHECK(g.c0 == 150.0);
    CHECK(g.cost(0.9) == Catch::Approx(0.11 * 90 * 90 + 5 * 90 + 150));
}

TEST_CASE("case9 branch 1 matches an independent conversion") {
    Network net = to_network(load_case(data_path("case9.m")));
    const Line& l = net.lines()[0];  // 1-4, r=0, x=0.0576, ratio 0
    CHECK(std::abs(l.tap) == 1.0);
    double b_expected = 1.0 / 0.0576;
    CHECK(l.coeffs.g_ij == Catch::Approx(0.0));
    CHECK(l.coeffs.b_ij == Catch::Approx(b_expected));
    CHECK(l.coeffs.b_c_ij == Catch::Approx(b_expected));
    CHECK(l.coeffs.b_c_ji == Catch::Approx(b_expected));
}

TEST_CASE("stored coefficients reproduce their defining formulas bit-for-bit") {
    for (const char* name : {"case9.m", "case57.m", "case300.m"}) {
        Network net = to_network(load_case(data_path(name)));
        INFO(name);
        for (const Line& l : net.lines()) {
            LineCoefficients again = line_coefficients(l.admittance, l.b_ch, l.tap);
            CHECK(again.g_c_ij == l.coeffs.g_c_ij);
            CHECK(again.b_c_ij == l.coeffs.b_c_ij);
            CHECK(again.g_ij == l.coeffs.g_ij);
            CHECK(again.b_ij == l.coeffs.b_ij);
            CHECK(again.g_c_ji == l.coeffs.g_c_ji);
            CHECK(again.b_c_ji == l.coeffs.b_c_ji);
            CHECK(again.g_ji == l.coeffs.g_ji);
            CHECK(again.b_ji == l.coeffs.b_ji);
        }
    }
}

TEST_CASE("neighbors") {
    SECTION("case9 generator buses are leaves") {
        Network net = to_network(load_case(data_path("case9.m")));
        for (int orig : {1, 2, 3}) {
            int idx = -1;
            for (const Bus& b : net.buses())
                if (b.original_id == orig) idx = b.index;
            REQUIRE(idx >= 0);
            CHECK(net.neighbors(idx).size() == 1);
        }
    }
    SECTION("single bus network has no neighbors") {
        std::vector<Bus> buses(1);
        buses[0].index = 0;
        buses[0].original_id = 1;
        buses[0].v_min = 0.9;
        buses[0].v_max = 1.1;
        buses[0].is_ref = true;
        Network net(100.0, buses, {}, {});
        CHECK(net.neighbors(0).empty());
    }
    SECTION("triangle nodes have two neighbors, parallel lines deduplicated") {
        std::vector<Bus> buses(3);
        for (int i = 0; i < 3; ++i) {
            buses[i].index = i;
            buses[i].original_id = i + 1;
            buses[i].v_min = 0.9;
            buses[i].v_max = 1.1;
        }
        buses[0].is_ref = true;
        std::vector<Line> lines(4);
        int pairs[4][2] = {{0, 1}, {1, 2}, {0, 2}, {0, 1}};  // one parallel pair
        for (int e = 0; e < 4; ++e) {
            lines[e].index = e;
            lines[e].from = pairs[e][0];
            lines[e].to = pairs[e][1];
            lines[e].admittance = cd(0, -5);
            lines[e].coeffs = line_coefficients(lines[e].admittance, 0, lines[e].tap);
        }
        Network net(100.0, buses, lines, {});
        for (int i = 0; i < 3; ++i) CHECK(net.neighbors(i).size() == 2);
        CHECK(net.lines_at(0).size() == 3);
    }
}

TEST_CASE("semantic case errors") {
    SECTION("isolated bus") {
        std::string text(ropf_test::kToyCase3);
        auto pos = text.find("3  1  25.5");
        text.replace(pos, 4, "3  4 ");
        CHECK_THROWS_AS(to_network(parse_case(std::string_view(text))), IslandedBusError);
    }
    SECTION("no reference bus") {
        std::string text(ropf_test::kToyCase3);
        auto pos = text.find("1  3  0");
        text.replace(pos, 4, "1  2 ");
        CHECK_THROWS_AS(to_network(parse_case(std::string_view(text))), NoReferenceBusError);
    }
    SECTION("out-of-service branch disconnects the graph") {
        std::string text(ropf_test::kToyCase3);
        auto pos = text.find("0.98  2  1");
        text.replace(pos, 10, "0.98  2  0");
        CHECK_THROWS_AS(to_network(parse_case(std::string_view(text))), DisconnectedGraphError);
    }
    SECTION("zero impedance branch") {
        std::string text(ropf_test::kToyCase3);
        auto pos = text.find("0.02  0.11");
        text.replace(pos, 10, "0.0   0.0 ");
        CHECK_THROWS_AS(to_network(parse_case(std::string_view(text))), CaseFormatError);
    }
}

TEST_CASE("out-of-service equipment is dropped") {
    std::string text(ropf_test::kToyCase3);
    // add an off generator at bus 2 and an off parallel branch
    auto pos = text.find("mpc.branch");
    text.insert(pos, "");
    pos = text.find("];", text.find("mpc.gen = ["));
    text.insert(pos, "    2  10  0  20 -20  1.0  100  0  50  0;\n");
    pos = text.find("];", text.find("mpc.gencost = ["));
    text.insert(pos, "    2  0  0  2  30  0;\n");
    pos = text.find("];", text.find("mpc.branch = ["));
    text.insert(pos, "    1  3  0.05  0.2  0  0  0  0  0  0  0  -360  360;\n");
    Network net = to_network(parse_case(std::string_view(text)));
    CHECK(net.generators().size() == 1);
    CHECK(net.lines().size() == 2);
}
