#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ropf/acopf.hpp"
#include "ropf/ipm.hpp"
#include "ropf/network.hpp"
#include "ropf/partition.hpp"

namespace ropf {

struct DicaParams {
    double rho = 400.0;
    double eps = 1e-4;
    int max_iter = 2000;
    bool warm_start = true;
    int threads = 1;  // 1 = sequential; 0 = hardware concurrency
    SolverOptions solver;

    /// One scalar controls all four penalty weights: rho for v, 2*rho for
    /// theta and the directed flows.
    double rho_for(Quantity q) const { return q == Quantity::NodeV ? rho : 2.0 * rho; }
};

/// Reference values beta for every shared quantity and the per-region duals y.
struct ConsensusState {
    int iteration = 0;
    std::map<ConsensusKey, double> beta;
    std::vector<std::map<ConsensusKey, double>> y;  // indexed by region
};

// -- the algebraic update and stopping rules ------------------------------------

/// beta = (1/|M|) * sum_k (w_k + y_k / rho)
inline double beta_update(const std::vector<double>& copies, const std::vector<double>& duals,
                          double rho) {
    double acc = 0;
    for (size_t k = 0; k < copies.size(); ++k) acc += copies[k] + duals[k] / rho;
    return acc / static_cast<double>(copies.size());
}

/// y <- y + rho * (w - beta)
inline double y_update(double y, double w, double beta, double rho) { return y + rho * (w - beta); }

struct ResidualPair {
    double primal = 0;  // ||w - beta||_2 over the region's shared quantities
    double dual = 0;    // ||rho*(beta - beta_prev)||_2 over the same
};

inline ResidualPair region_residuals(const std::vector<double>& copies,
                                     const std::vector<double>& beta_now,
                                     const std::vector<double>& beta_prev,
                                     const std::vector<double>& rho) {
    ResidualPair out;
    for (size_t i = 0; i < copies.size(); ++i) {
        double r = copies[i] - beta_now[i];
        double d = rho[i] * (beta_now[i] - beta_prev[i]);
        out.primal += r * r;
        out.dual += d * d;
    }
    out.primal = std::sqrt(out.primal);
    out.dual = std::sqrt(out.dual);
    return out;
}

struct RegionIterationStats {
    double primal_res = 0, dual_res = 0;
    double w_norm = 0, beta_norm = 0, y_norm = 0;
    double local_obj = 0;
    int solver_iters = 0;
};

/// Per-agent stopping test: every region must satisfy both
///   ||r|| <= eps * max(||w||, ||beta||)   and   ||d|| <= eps * ||y||.
/// When ||y|| is zero the dual test degenerates to an absolute ||d|| <= eps.
inline bool converged(const std::vector<RegionIterationStats>& regions, double eps) {
    for (const auto& s : regions) {
        if (s.primal_res > eps * std::max(s.w_norm, s.beta_norm)) return false;
        double dual_limit = s.y_norm > 0 ? eps * s.y_norm : eps;
        if (s.dual_res > dual_limit) return false;
    }
    return true;
}

// -- run ------------------------------------------------------------------------

struct IterationRecord {
    int t = 0;
    std::vector<RegionIterationStats> regions;
    double total_cost = 0;          // owned generator cost summed over regions
    double max_abs_dual_sum = 0;    // max over shared quantities of |sum_k y_k|
    double max_abs_dual = 0;
};

enum class DicaStatus { Converged, MaxIterReached, SubproblemFailure };

inline const char* to_string(DicaStatus s) {
    switch (s) {
        case DicaStatus::Converged: return "converged";
        case DicaStatus::MaxIterReached: return "max_iter";
        default: return "subproblem_failure";
    }
}

struct NetworkSolution {
    Eigen::VectorXd v, theta;  // per bus
    Eigen::MatrixXd flows;     // per line: p_fwd, q_fwd, p_rev, q_rev
    Eigen::VectorXd gen_p, gen_q;
};

struct DicaResult {
    DicaStatus status = DicaStatus::MaxIterReached;
    int iterations = 0;
    std::vector<IterationRecord> trace;
    ConsensusState state;
    NetworkSolution solution;
    double objective = 0;  // aggregate generation cost of the final iterate
    int failed_region = -1, failed_iteration = -1;
    std::string message;
};

/// Solves one region subproblem; implementations must be safe to drive from
/// the region's own thread. `prev` carries the previous iterate for warm
/// starts (null on the first iteration).
class OpfSolverBackend {
  public:
    virtual ~OpfSolverBackend() = default;
    virtual SolveResult solve(const OpfModel& model, const SolveResult* prev) = 0;
};

class BuiltinSolverBackend final : public OpfSolverBackend {
  public:
    explicit BuiltinSolverBackend(SolverOptions opts = {}) : opts_(opts) {}

    SolveResult solve(const OpfModel& model, const SolveResult* prev) override {
        OpfNlp nlp(model);
        InteriorPointSolver solver(opts_);
        Eigen::Map<const Eigen::VectorXd> x0(model.start.data(), model.start.size());
        if (prev && prev->x.size() == x0.size()) {
            WarmStart ws;
            ws.x = prev->x;
            ws.y_eq = prev->y_eq;
            ws.y_ineq = prev->y_ineq;
            ws.z_lower = prev->z_lower;
            ws.z_upper = prev->z_upper;
            ws.mu = std::max(prev->mu_final, 1e-9);
            return solver.solve(nlp, ws.x, &ws);
        }
        return solver.solve(nlp, x0);
    }

  private:
    SolverOptions opts_;
};

using BackendFactory = std::function<std::unique_ptr<OpfSolverBackend>()>;

inline ConsensusState init_consensus(const ClosureSet& cs,
                                     const std::vector<std::vector<ConsensusKey>>& region_keys) {
    ConsensusState st;
    st.y.resize(cs.closures.size());
    for (size_t k = 0; k < cs.closures.size(); ++k) {
        for (const ConsensusKey& key : region_keys[k]) {
            st.y[k][key] = 0.0;
            if (!st.beta.count(key))
                st.beta[key] = key.quantity == Quantity::NodeV ? 1.0 : 0.0;
        }
    }
    return st;
}

/// Runs the three-stage consensus iteration: parallel region solves, the
/// beta reduction, then the dual ascent, until the per-agent stopping rule
/// holds for every region or the iteration cap is reached. With an explicit
/// barrier between stages the trace is identical whether the region solves
/// run sequentially or on threads.
inline DicaResult run_dica(const Network& net, const Partition& part, const DicaParams& params,
                           const BackendFactory& make_backend = {},
                           const ConsensusState* resume = nullptr) {
    const Graph graph = Graph::from_network(net);
    const ClosureSet cs = region_closures(graph, part);
    const int num_regions = static_cast<int>(cs.closures.size());

    std::vector<std::vector<ConsensusKey>> region_keys(num_regions);
    for (int k = 0; k < num_regions; ++k)
        region_keys[k] = region_shared_keys(cs.closures[k], cs.shared);

    DicaResult out;
    out.state = resume ? *resume : init_consensus(cs, region_keys);

    BackendFactory factory = make_backend;
    if (!factory) {
        SolverOptions so = params.solver;
        factory = [so]() { return std::make_unique<BuiltinSolverBackend>(so); };
    }
    std::vector<std::unique_ptr<OpfSolverBackend>> backends;
    for (int k = 0; k < num_regions; ++k) backends.push_back(factory());

    std::vector<std::optional<SolveResult>> prev(num_regions);
    std::vector<SolveResult> results(num_regions);
    std::vector<std::string> failures(num_regions);

    // variable positions do not depend on the consensus values, so one
    // prototype build per region serves for all index lookups
    std::vector<RegionProblem> proto(num_regions);
    for (int k = 0; k < num_regions; ++k) {
        ConsensusParams cp0;
        for (const ConsensusKey& key : region_keys[k])
            cp0.terms.push_back({key, 0.0, 0.0, params.rho_for(key.quantity)});
        proto[k] = build_region(net, cs.closures[k], cs.shared, cp0);
    }

    int threads = params.threads == 0
                      ? static_cast<int>(std::max(1u, std::thread::hardware_concurrency()))
                      : params.threads;
    threads = std::min(std::max(threads, 1), num_regions);

    auto solve_region = [&](int k) {
        try {
            ConsensusParams cp;
            for (const ConsensusKey& key : region_keys[k])
                cp.terms.push_back(
                    {key, out.state.beta.at(key), out.state.y[k].at(key), params.rho_for(key.quantity)});
            RegionProblem rp = build_region(net, cs.closures[k], cs.shared, cp);
            const SolveResult* warm =
                params.warm_start && prev[k].has_value() ? &prev[k].value() : nullptr;
            results[k] = backends[k]->solve(rp.model, warm);
            if (results[k].status != SolveStatus::Optimal)
                failures[k] = "status " + std::string(to_string(results[k].status)) +
                              (results[k].message.empty() ? "" : ": " + results[k].message);
        } catch (const std::exception& e) {
            failures[k] = e.what();
        }
    };

    const int start_iter = out.state.iteration;
    for (int t = start_iter + 1; t <= start_iter + params.max_iter; ++t) {
        // stage 1: independent region solves (barrier at the join)
        std::fill(failures.begin(), failures.end(), std::string());
        if (threads == 1) {
            for (int k = 0; k < num_regions; ++k) solve_region(k);
        } else {
            std::vector<std::thread> pool;
            for (int w = 0; w < threads; ++w)
                pool.emplace_back([&, w]() {
                    for (int k = w; k < num_regions; k += threads) solve_region(k);
                });
            for (auto& th : pool) th.join();
        }
        for (int k = 0; k < num_regions; ++k) {
            if (!failures[k].empty()) {
                out.status = DicaStatus::SubproblemFailure;
                out.failed_region = k;
                out.failed_iteration = t;
                out.message = "region " + std::to_string(k) + " at iteration " + std::to_string(t) +
                              ": " + failures[k];
                out.iterations = t - 1 - start_iter;
                return out;
            }
        }

        // shared copies of this iterate
        std::vector<std::map<ConsensusKey, double>> copies(num_regions);
        for (int k = 0; k < num_regions; ++k)
            for (const auto& [key, var] : proto[k].shared_vars) copies[k][key] = results[k].x(var);

        // stage 2: beta reduction over the regions sharing each quantity
        std::map<ConsensusKey, double> beta_prev = out.state.beta;
        for (auto& [key, beta] : out.state.beta) {
            const std::vector<int>& members = key.node >= 0
                                                  ? cs.shared.node_regions[key.node]
                                                  : cs.shared.line_regions[key.line][key.dir];
            std::vector<double> w, yd;
            for (int k : members) {
                w.push_back(copies[k].at(key));
                yd.push_back(out.state.y[k].at(key));
            }
            beta = beta_update(w, yd, params.rho_for(key.quantity));
        }

        // stage 3: dual ascent
        for (int k = 0; k < num_regions; ++k)
            for (auto& [key, yk] : out.state.y[k])
                yk = y_update(yk, copies[k].at(key), out.state.beta.at(key),
                              params.rho_for(key.quantity));

        // residuals, cost, diagnostics
        IterationRecord rec;
        rec.t = t;
        rec.regions.resize(num_regions);
        for (int k = 0; k < num_regions; ++k) {
            std::vector<double> w, bn, bp, rho;
            RegionIterationStats& st = rec.regions[k];
            for (const ConsensusKey& key : region_keys[k]) {
                w.push_back(copies[k].at(key));
                bn.push_back(out.state.beta.at(key));
                bp.push_back(beta_prev.at(key));
                rho.push_back(params.rho_for(key.quantity));
                st.y_norm += out.state.y[k].at(key) * out.state.y[k].at(key);
            }
            ResidualPair res = region_residuals(w, bn, bp, rho);
            st.primal_res = res.primal;
            st.dual_res = res.dual;
            for (size_t i = 0; i < w.size(); ++i) {
                st.w_norm += w[i] * w[i];
                st.beta_norm += bn[i] * bn[i];
            }
            st.w_norm = std::sqrt(st.w_norm);
            st.beta_norm = std::sqrt(st.beta_norm);
            st.y_norm = std::sqrt(st.y_norm);
            st.local_obj = results[k].objective;
            st.solver_iters = results[k].iterations;
        }
        // owned generation cost from the region solutions
        double cost = 0;
        for (int k = 0; k < num_regions; ++k)
            for (const auto& [gi, idx] : proto[k].model.layout.gen_power)
                cost += net.generators()[gi].cost(results[k].x(idx[0]));
        rec.total_cost = cost;

        for (const auto& [key, beta] : out.state.beta) {
            const std::vector<int>& members = key.node >= 0
                                                  ? cs.shared.node_regions[key.node]
                                                  : cs.shared.line_regions[key.line][key.dir];
            double sum = 0;
            for (int k : members) {
                double yk = out.state.y[k].at(key);
                sum += yk;
                rec.max_abs_dual = std::max(rec.max_abs_dual, std::abs(yk));
            }
            rec.max_abs_dual_sum = std::max(rec.max_abs_dual_sum, std::abs(sum));
        }

        out.trace.push_back(rec);
        out.state.iteration = t;
        for (int k = 0; k < num_regions; ++k) prev[k] = results[k];

        if (converged(rec.regions, params.eps)) {
            out.status = DicaStatus::Converged;
            break;
        }
    }

    out.iterations = out.state.iteration - start_iter;
    if (out.status != DicaStatus::Converged) out.status = DicaStatus::MaxIterReached;

    // stitched solution: owned quantities from their owning region, shared
    // quantities from beta
    NetworkSolution& sol = out.solution;
    sol.v.setZero(net.num_buses());
    sol.theta.setZero(net.num_buses());
    sol.flows.setZero(static_cast<int>(net.lines().size()), 4);
    sol.gen_p.setZero(static_cast<int>(net.generators().size()));
    sol.gen_q.setZero(static_cast<int>(net.generators().size()));
    std::vector<int> node_owner(net.num_buses(), -1);
    for (int k = 0; k < num_regions; ++k)
        for (int i : cs.closures[k].owned) node_owner[i] = k;
    for (int k = 0; k < num_regions; ++k) {
        if (!prev[k].has_value()) continue;
        const RegionProblem& rp = proto[k];
        const Eigen::VectorXd& x = prev[k]->x;
        for (int i : cs.closures[k].owned) {
            sol.v(i) = x(rp.model.layout.v.at(i));
            sol.theta(i) = x(rp.model.layout.theta.at(i));
        }
        for (const auto& [e, idx] : rp.model.layout.line_flows) {
            const Line& l = net.lines()[e];
            if (node_owner[l.from] == k && node_owner[l.to] == k)
                for (int c = 0; c < 4; ++c) sol.flows(e, c) = x(idx[c]);
        }
        for (const auto& [gi, idx] : rp.model.layout.gen_power) {
            sol.gen_p(gi) = x(idx[0]);
            sol.gen_q(gi) = x(idx[1]);
        }
    }
    for (const auto& [key, beta] : out.state.beta) {
        switch (key.quantity) {
            case Quantity::NodeV: sol.v(key.node) = beta; break;
            case Quantity::NodeTheta: sol.theta(key.node) = beta; break;
            case Quantity::LineP: sol.flows(key.line, key.dir == 0 ? 0 : 2) = beta; break;
            case Quantity::LineQ: sol.flows(key.line, key.dir == 0 ? 1 : 3) = beta; break;
        }
    }
    if (!out.trace.empty()) out.objective = out.trace.back().total_cost;
    return out;
}

// -- consensus snapshot (JSON) ----------------------------------------------------

inline nlohmann::json consensus_key_to_json(const ConsensusKey& k) {
    static const char* names[] = {"v", "theta", "p", "q"};
    nlohmann::json j{{"quantity", names[static_cast<int>(k.quantity)]}};
    if (k.node >= 0) j["node"] = k.node;
    if (k.line >= 0) {
        j["line"] = k.line;
        j["dir"] = k.dir;
    }
    return j;
}

inline ConsensusKey consensus_key_from_json(const nlohmann::json& j) {
    std::string q = j.at("quantity").get<std::string>();
    if (q == "v") return ConsensusKey::v(j.at("node").get<int>());
    if (q == "theta") return ConsensusKey::theta(j.at("node").get<int>());
    if (q == "p") return ConsensusKey::p(j.at("line").get<int>(), j.at("dir").get<int>());
    if (q == "q") return ConsensusKey::q(j.at("line").get<int>(), j.at("dir").get<int>());
    throw IoError("unknown consensus quantity: " + q);
}

inline nlohmann::json consensus_to_json(const ConsensusState& st) {
    nlohmann::json beta = nlohmann::json::array();
    for (const auto& [key, value] : st.beta) {
        nlohmann::json e = consensus_key_to_json(key);
        e["value"] = value;
        beta.push_back(std::move(e));
    }
    nlohmann::json y = nlohmann::json::array();
    for (const auto& region : st.y) {
        nlohmann::json ry = nlohmann::json::array();
        for (const auto& [key, value] : region) {
            nlohmann::json e = consensus_key_to_json(key);
            e["value"] = value;
            ry.push_back(std::move(e));
        }
        y.push_back(std::move(ry));
    }
    return nlohmann::json{{"iteration", st.iteration}, {"beta", std::move(beta)}, {"y", std::move(y)}};
}

inline ConsensusState consensus_from_json(const nlohmann::json& j) {
    ConsensusState st;
    st.iteration = j.at("iteration").get<int>();
    for (const auto& e : j.at("beta")) st.beta[consensus_key_from_json(e)] = e.at("value").get<double>();
    for (const auto& region : j.at("y")) {
        std::map<ConsensusKey, double> ry;
        for (const auto& e : region) ry[consensus_key_from_json(e)] = e.at("value").get<double>();
        st.y.push_back(std::move(ry));
    }
    return st;
}

}  // namespace ropf
