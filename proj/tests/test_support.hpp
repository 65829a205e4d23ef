#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ropf/partition.hpp"

namespace ropf_test {

inline std::string data_path(const std::string& name) {
    return std::string(ROPF_DATA_DIR) + "/" + name;
}

/// Hand-written 3-bus case: gen at bus 1 (ref), load at buses 2 and 3.
inline const char* kToyCase3 = R"(function mpc = toy3
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
    1  3  0    0    0  0    1  1.0  0  230  1  1.1  0.9;
    2  1  90   30   0  0    1  1.0  0  230  1  1.1  0.9;
    3  1  25.5 10.2 4  -2.5 1  1.0  5  230  1  1.08 0.92;
];
mpc.gen = [
    1  50  10  80  -80  1.0  100  1  250  10;
];
mpc.branch = [
    1  2  0.01  0.06  0.02  250  250  250  0     0  1  -360  360;
    2  3  0.02  0.11  0.0   0    0    0    0.98  2  1  -30   30;
];
mpc.gencost = [
    2  1500  0  3  0.11  5  150;
];
)";

/// Random connected graph: a random spanning tree plus extra edges.
inline ropf::Graph random_connected_graph(unsigned seed, int min_nodes = 5, int max_nodes = 200) {
    std::mt19937 rng(seed);
    int n = std::uniform_int_distribution<int>(min_nodes, max_nodes)(rng);
    std::vector<std::pair<int, int>> edges;
    for (int i = 1; i < n; ++i)
        edges.emplace_back(i, std::uniform_int_distribution<int>(0, i - 1)(rng));
    int extra = std::uniform_int_distribution<int>(0, 2 * n)(rng);
    for (int e = 0; e < extra; ++e) {
        int a = std::uniform_int_distribution<int>(0, n - 1)(rng);
        int b = std::uniform_int_distribution<int>(0, n - 1)(rng);
        if (a != b) edges.emplace_back(a, b);
    }
    return ropf::Graph(n, std::move(edges));
}

}  // namespace ropf_test
