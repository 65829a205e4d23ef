#pragma once

#include <algorithm>
#include <array>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ropf/errors.hpp"
#include "ropf/network.hpp"

namespace ropf {

/// Undirected multigraph view used for partitioning. Edges keep their ids
/// (so parallel network lines stay distinct), while adjacency queries are
/// over the simple underlying graph. Node labels drive the deterministic
/// start rule; for networks they are the original bus ids.
class Graph {
  public:
    Graph(int n, std::vector<std::pair<int, int>> edges, std::vector<int> labels = {})
        : edges_(std::move(edges)), labels_(std::move(labels)) {
        if (labels_.empty()) {
            labels_.resize(n);
            for (int i = 0; i < n; ++i) labels_[i] = i;
        }
        adj_.resize(n);
        for (const auto& [a, b] : edges_) {
            adj_[a].push_back(b);
            adj_[b].push_back(a);
        }
        for (auto& nb : adj_) {
            std::sort(nb.begin(), nb.end());
            nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
        }
    }

    static Graph from_network(const Network& net) {
        std::vector<std::pair<int, int>> edges;
        edges.reserve(net.lines().size());
        for (const Line& l : net.lines()) edges.emplace_back(l.from, l.to);
        std::vector<int> labels;
        labels.reserve(net.buses().size());
        for (const Bus& b : net.buses()) labels.push_back(b.original_id);
        return Graph(net.num_buses(), std::move(edges), std::move(labels));
    }

    int num_nodes() const { return static_cast<int>(adj_.size()); }
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }
    const std::vector<int>& neighbors(int u) const { return adj_[u]; }
    int label(int u) const { return labels_[u]; }
    const std::vector<int>& labels() const { return labels_; }

  private:
    std::vector<std::pair<int, int>> edges_;
    std::vector<int> labels_;
    std::vector<std::vector<int>> adj_;
};

/// Node sets V_k; every set induces a tree when produced by radial_partition.
struct Partition {
    std::vector<std::vector<int>> regions;

    int num_regions() const { return static_cast<int>(regions.size()); }
};

enum class StartRule { LowestLabel, SeededRandom };

/// Greedy radial partitioning. Repeatedly grows a region from a start node,
/// adding a popped stack node only when none of its non-parent neighbors is
/// already in the region (which is what keeps the region acyclic), and pushing
/// the node's unvisited neighbors only when it was added. Removing a finished
/// region may disconnect the residual graph; each new start node is picked
/// from the residual graph and the growth stays inside its component.
inline Partition radial_partition(const Graph& g, StartRule rule = StartRule::LowestLabel,
                                  unsigned seed = 0) {
    const int n = g.num_nodes();
    if (n == 0) throw EmptyGraphError();

    std::mt19937 rng(seed);
    std::vector<char> assigned(n, 0);
    std::vector<char> in_region(n, 0);
    int remaining = n;
    Partition part;

    while (remaining > 0) {
        int start = -1;
        if (rule == StartRule::LowestLabel) {
            int best_label = 0;
            for (int u = 0; u < n; ++u) {
                if (!assigned[u] && (start < 0 || g.label(u) < best_label)) {
                    start = u;
                    best_label = g.label(u);
                }
            }
        } else {
            std::vector<int> residual;
            for (int u = 0; u < n; ++u)
                if (!assigned[u]) residual.push_back(u);
            start = residual[std::uniform_int_distribution<size_t>(0, residual.size() - 1)(rng)];
        }

        std::vector<int> region{start};
        in_region[start] = 1;
        // stack entries carry the parent through which the node was reached
        std::vector<std::pair<int, int>> stack;
        auto push_neighbors = [&](int u) {
            std::vector<int> cand;
            for (int w : g.neighbors(u))
                if (!assigned[w] && !in_region[w]) cand.push_back(w);
            std::sort(cand.begin(), cand.end(), [&](int a, int b) { return g.label(a) < g.label(b); });
            for (int w : cand) stack.emplace_back(w, u);
        };
        push_neighbors(start);

        while (!stack.empty()) {
            auto [u, parent] = stack.back();
            stack.pop_back();
            if (in_region[u]) continue;  // stale entry from an earlier push
            bool blocked = false;
            for (int w : g.neighbors(u)) {
                if (w != parent && in_region[w]) {
                    blocked = true;
                    break;
                }
            }
            if (blocked) continue;
            in_region[u] = 1;
            region.push_back(u);
            push_neighbors(u);
        }

        std::sort(region.begin(), region.end());
        for (int u : region) {
            assigned[u] = 1;
            in_region[u] = 0;
        }
        remaining -= static_cast<int>(region.size());
        part.regions.push_back(std::move(region));
    }
    return part;
}

struct ValidityReport {
    bool valid = true;
    std::vector<std::string> violations;

    explicit operator bool() const { return valid; }
};

/// Checks the partition invariants: regions are nonempty, disjoint, cover all
/// nodes, and each induces a connected acyclic subgraph. Violations are
/// reported, not thrown.
inline ValidityReport verify_radial(const Graph& g, const Partition& part) {
    ValidityReport rep;
    auto fail = [&](std::string msg) {
        rep.valid = false;
        rep.violations.push_back(std::move(msg));
    };

    const int n = g.num_nodes();
    std::vector<int> owner(n, -1);
    for (size_t k = 0; k < part.regions.size(); ++k) {
        if (part.regions[k].empty()) fail("region " + std::to_string(k) + " is empty");
        for (int u : part.regions[k]) {
            if (u < 0 || u >= n) {
                fail("region " + std::to_string(k) + " references unknown node " + std::to_string(u));
                continue;
            }
            if (owner[u] >= 0)
                fail("node " + std::to_string(g.label(u)) + " appears in regions " +
                     std::to_string(owner[u]) + " and " + std::to_string(k));
            owner[u] = static_cast<int>(k);
        }
    }
    for (int u = 0; u < n; ++u)
        if (owner[u] < 0) fail("node " + std::to_string(g.label(u)) + " is not covered");
    if (!rep.valid) return rep;

    for (size_t k = 0; k < part.regions.size(); ++k) {
        const auto& nodes = part.regions[k];
        // connectivity by traversal within the region
        std::vector<int> stack{nodes[0]};
        std::vector<char> seen(n, 0);
        seen[nodes[0]] = 1;
        int reached = 1;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (int w : g.neighbors(u)) {
                if (owner[w] == static_cast<int>(k) && !seen[w]) {
                    seen[w] = 1;
                    ++reached;
                    stack.push_back(w);
                }
            }
        }
        if (reached != static_cast<int>(nodes.size()))
            fail("region " + std::to_string(k) + " induces a disconnected subgraph");
        // acyclic <=> edge count (simple graph) == |V| - 1
        int edge_count = 0;
        for (int u : nodes)
            for (int w : g.neighbors(u))
                if (w > u && owner[w] == static_cast<int>(k)) ++edge_count;
        if (edge_count != static_cast<int>(nodes.size()) - 1)
            fail("region " + std::to_string(k) + " induces a cycle (" + std::to_string(edge_count) +
                 " edges over " + std::to_string(nodes.size()) + " nodes)");
    }
    return rep;
}

/// A region's extended problem scope: the owned nodes V_k, the boundary
/// N(V_k)\V_k, and the line set. Lines are those with at least one owned
/// endpoint, so every duplicated flow variable is tied to an owned power
/// balance somewhere.
struct RegionClosure {
    int id = 0;
    std::vector<int> owned;
    std::vector<int> boundary;
    std::vector<int> nodes;  // owned + boundary, sorted
    std::vector<int> lines;  // edge ids

    bool owns(int node) const { return std::binary_search(owned.begin(), owned.end(), node); }
    bool contains(int node) const { return std::binary_search(nodes.begin(), nodes.end(), node); }
};

/// M_i and M_e: which closures contain each node / each directed line.
/// An entity is shared when it belongs to more than one closure. The two
/// orientations of a line are tracked separately (they carry distinct flow
/// variables) but are always shared by the same set of regions.
struct SharedEntityMap {
    std::vector<std::vector<int>> node_regions;                  // per node, sorted region ids
    std::vector<std::array<std::vector<int>, 2>> line_regions;   // per line, per direction

    bool node_shared(int i) const { return node_regions[i].size() > 1; }
    bool line_shared(int e) const { return line_regions[e][0].size() > 1; }
};

struct ClosureSet {
    std::vector<RegionClosure> closures;
    SharedEntityMap shared;
};

inline ClosureSet region_closures(const Graph& g, const Partition& part) {
    const int n = g.num_nodes();
    std::vector<int> owner(n, -1);
    for (size_t k = 0; k < part.regions.size(); ++k)
        for (int u : part.regions[k]) owner[u] = static_cast<int>(k);

    ClosureSet cs;
    cs.shared.node_regions.resize(n);
    cs.shared.line_regions.resize(g.edges().size());

    for (size_t k = 0; k < part.regions.size(); ++k) {
        RegionClosure cl;
        cl.id = static_cast<int>(k);
        cl.owned = part.regions[k];
        std::sort(cl.owned.begin(), cl.owned.end());
        for (int u : cl.owned)
            for (int w : g.neighbors(u))
                if (owner[w] != cl.id) cl.boundary.push_back(w);
        std::sort(cl.boundary.begin(), cl.boundary.end());
        cl.boundary.erase(std::unique(cl.boundary.begin(), cl.boundary.end()), cl.boundary.end());
        cl.nodes = cl.owned;
        cl.nodes.insert(cl.nodes.end(), cl.boundary.begin(), cl.boundary.end());
        std::sort(cl.nodes.begin(), cl.nodes.end());
        for (size_t e = 0; e < g.edges().size(); ++e) {
            const auto& [a, b] = g.edges()[e];
            if (owner[a] == cl.id || owner[b] == cl.id) cl.lines.push_back(static_cast<int>(e));
        }
        for (int u : cl.nodes) cs.shared.node_regions[u].push_back(cl.id);
        for (int e : cl.lines) {
            cs.shared.line_regions[e][0].push_back(cl.id);
            cs.shared.line_regions[e][1].push_back(cl.id);
        }
        cs.closures.push_back(std::move(cl));
    }
    return cs;
}

// -- JSON import/export ------------------------------------------------------

/// {"regions": [[labels...], ...]} with nodes identified by their labels
/// (original bus ids for network graphs).
inline nlohmann::json partition_to_json(const Graph& g, const Partition& part) {
    nlohmann::json regions = nlohmann::json::array();
    for (const auto& r : part.regions) {
        nlohmann::json ids = nlohmann::json::array();
        for (int u : r) ids.push_back(g.label(u));
        regions.push_back(std::move(ids));
    }
    return nlohmann::json{{"regions", std::move(regions)}};
}

inline Partition partition_from_json(const Graph& g, const nlohmann::json& j) {
    if (!j.contains("regions") || !j["regions"].is_array())
        throw IoError("partition document needs a \"regions\" array");
    std::unordered_map<int, int> by_label;
    for (int u = 0; u < g.num_nodes(); ++u) by_label[g.label(u)] = u;
    Partition part;
    for (const auto& r : j["regions"]) {
        std::vector<int> nodes;
        for (const auto& id : r) {
            auto it = by_label.find(id.get<int>());
            if (it == by_label.end())
                throw IoError("partition references unknown node " + id.dump());
            nodes.push_back(it->second);
        }
        std::sort(nodes.begin(), nodes.end());
        part.regions.push_back(std::move(nodes));
    }
    auto rep = verify_radial(g, part);
    // imported partitions must at least be a partition; radiality is advisory
    for (const auto& v : rep.violations) {
        if (v.find("induces") == std::string::npos) throw IoError("invalid partition: " + v);
    }
    return part;
}

}  // namespace ropf
