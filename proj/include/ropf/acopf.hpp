#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <compare>
#include <map>
#include <string>
#include <vector>

#include "ropf/errors.hpp"
#include "ropf/network.hpp"
#include "ropf/nlp.hpp"
#include "ropf/partition.hpp"

namespace ropf {

// -- consensus keys -----------------------------------------------------------

enum class Quantity : int { NodeV = 0, NodeTheta = 1, LineP = 2, LineQ = 3 };

/// Identifies one shared scalar: a node voltage magnitude or angle, or a
/// directed line flow (dir 0 = from->to, dir 1 = to->from). Directed flows on
/// a shared line are distinct unknowns and carry separate consensus entries.
struct ConsensusKey {
    Quantity quantity = Quantity::NodeV;
    int node = -1;
    int line = -1;
    int dir = 0;

    auto operator<=>(const ConsensusKey&) const = default;

    static ConsensusKey v(int node) { return {Quantity::NodeV, node, -1, 0}; }
    static ConsensusKey theta(int node) { return {Quantity::NodeTheta, node, -1, 0}; }
    static ConsensusKey p(int line, int dir) { return {Quantity::LineP, -1, line, dir}; }
    static ConsensusKey q(int line, int dir) { return {Quantity::LineQ, -1, line, dir}; }
};

/// One consensus-augmented quantity in a region subproblem: reference beta,
/// region dual y and the penalty weight for the quantity's kind.
struct ConsensusTerm {
    ConsensusKey key;
    double beta = 0;
    double y = 0;
    double rho = 0;
};

/// All consensus data a region solve needs; keys must match the region's
/// shared entities exactly.
struct ConsensusParams {
    std::vector<ConsensusTerm> terms;  // sorted by key
};

// -- variable layout ----------------------------------------------------------

/// Dense index map for the variables of one (sub)problem: per node v and
/// theta, per line the four directed flows, per generator p and q.
struct VariableLayout {
    std::map<int, int> v;                          // node -> var index
    std::map<int, int> theta;                      // node -> var index
    std::map<int, std::array<int, 4>> line_flows;  // line -> {p_fwd, q_fwd, p_rev, q_rev}
    std::map<int, std::array<int, 2>> gen_power;   // gen -> {p, q}
    int size = 0;

    int flow_p(int line, int dir) const { return line_flows.at(line)[dir == 0 ? 0 : 2]; }
    int flow_q(int line, int dir) const { return line_flows.at(line)[dir == 0 ? 1 : 3]; }

    int index_of(const ConsensusKey& k) const {
        switch (k.quantity) {
            case Quantity::NodeV: return v.at(k.node);
            case Quantity::NodeTheta: return theta.at(k.node);
            case Quantity::LineP: return flow_p(k.line, k.dir);
            default: return flow_q(k.line, k.dir);
        }
    }
};

// -- model --------------------------------------------------------------------

struct QuadObjTerm {
    int var = 0;
    double quad = 0;  // contributes quad * x^2
    double lin = 0;   // contributes lin * x
};

/// Flow definition for one directed line observed from node a:
///   flow - (c_self*v_a^2 - g*v_a*v_b*cos(d) + b*v_a*v_b*sin(d)) = 0   (active)
///   flow - (c_self*v_a^2 - b*v_a*v_b*cos(d) - g*v_a*v_b*sin(d)) = 0   (reactive)
/// with d = theta_a - theta_b.
struct FlowConstraint {
    int flow = 0, v_a = 0, v_b = 0, th_a = 0, th_b = 0;
    double c_self = 0, g = 0, b = 0;
    bool reactive = false;
};

/// Power balance at a node: sum(flows out) + shunt*v^2 - sum(gen) + demand = 0.
/// shunt is +g_sh for active and -b_sh for reactive balance.
struct BalanceConstraint {
    int v = 0;
    double shunt = 0;
    double demand = 0;
    std::vector<int> flows;
    std::vector<int> gens;
};

struct VarFixConstraint {
    int var = 0;
    double value = 0;
};

/// Squared apparent-power limit p^2 + q^2 - s_max^2 <= 0 (smooth at the origin,
/// feasible set identical to the square-root form for s_max > 0).
struct LineLimitConstraint {
    int p = 0, q = 0;
    double s_max = 0;
};

/// lo <= th_a - th_b <= hi, expanded into one-sided rows where finite.
struct AngleSpreadConstraint {
    int th_a = 0, th_b = 0;
    double lo = -kInf, hi = kInf;
};

/// Data-level description of a (region or centralized) OPF problem. This is
/// what the evaluation adapter and the external-solver wire format consume.
struct OpfModel {
    std::vector<double> lb, ub, start;
    std::vector<std::string> var_names;
    std::vector<QuadObjTerm> obj_terms;
    double obj_constant = 0;
    std::vector<FlowConstraint> flows;
    std::vector<BalanceConstraint> balances;
    std::vector<VarFixConstraint> fixes;
    std::vector<LineLimitConstraint> line_limits;
    std::vector<AngleSpreadConstraint> angle_spreads;
    VariableLayout layout;

    int num_vars() const { return static_cast<int>(lb.size()); }
    int num_eq() const {
        return static_cast<int>(flows.size() + 2 * balances.size() + fixes.size());
    }
    int num_ineq() const {
        int rows = static_cast<int>(line_limits.size());
        for (const auto& a : angle_spreads)
            rows += static_cast<int>(std::isfinite(a.hi)) + static_cast<int>(std::isfinite(a.lo));
        return rows;
    }
};

// -- builders -------------------------------------------------------------------

namespace detail {

inline void add_node_vars(OpfModel& m, const Network& net, const std::vector<int>& nodes) {
    for (int i : nodes) {
        const Bus& b = net.buses()[i];
        m.layout.v[i] = m.num_vars();
        m.lb.push_back(b.v_min);
        m.ub.push_back(b.v_max);
        double margin = 1e-4 * (b.v_max - b.v_min);
        m.start.push_back(std::clamp(1.0, b.v_min + margin, b.v_max - margin));
        m.var_names.push_back("v@" + std::to_string(b.original_id));

        m.layout.theta[i] = m.num_vars();
        m.lb.push_back(-kInf);
        m.ub.push_back(kInf);
        m.start.push_back(0.0);
        m.var_names.push_back("th@" + std::to_string(b.original_id));
    }
}

inline void add_line_vars(OpfModel& m, const Network& net, const std::vector<int>& lines) {
    for (int e : lines) {
        const Line& l = net.lines()[e];
        std::string tag = "L" + std::to_string(e) + ":" + std::to_string(net.buses()[l.from].original_id) +
                          "-" + std::to_string(net.buses()[l.to].original_id);
        std::array<int, 4> idx{};
        const char* names[4] = {"p@", "q@", "pr@", "qr@"};
        for (int k = 0; k < 4; ++k) {
            idx[k] = m.num_vars();
            m.lb.push_back(-kInf);
            m.ub.push_back(kInf);
            m.start.push_back(0.0);
            m.var_names.push_back(names[k] + tag);
        }
        m.layout.line_flows[e] = idx;
    }
}

inline void add_gen_vars(OpfModel& m, const Network& net, const std::vector<int>& gens) {
    for (int gi : gens) {
        const Generator& g = net.generators()[gi];
        std::array<int, 2> idx{};
        idx[0] = m.num_vars();
        m.lb.push_back(g.p_min);
        m.ub.push_back(g.p_max);
        double mid = 0.5 * (g.p_min + g.p_max);
        double margin = 1e-4 * (g.p_max - g.p_min);
        m.start.push_back(std::clamp(mid, g.p_min + margin, g.p_max - margin));
        m.var_names.push_back("pg@G" + std::to_string(gi));

        idx[1] = m.num_vars();
        m.lb.push_back(g.q_min);
        m.ub.push_back(g.q_max);
        mid = 0.5 * (g.q_min + g.q_max);
        margin = 1e-4 * (g.q_max - g.q_min);
        m.start.push_back(std::clamp(mid, g.q_min + margin, g.q_max - margin));
        m.var_names.push_back("qg@G" + std::to_string(gi));

        m.layout.gen_power[gi] = idx;
        m.obj_terms.push_back({idx[0], g.c2, g.c1});
        m.obj_constant += g.c0;
    }
}

inline void add_line_constraints(OpfModel& m, const Network& net, const std::vector<int>& lines) {
    for (int e : lines) {
        const Line& l = net.lines()[e];
        const LineCoefficients& c = l.coeffs;
        const auto& f = m.layout.line_flows.at(e);
        int va = m.layout.v.at(l.from), vb = m.layout.v.at(l.to);
        int ta = m.layout.theta.at(l.from), tb = m.layout.theta.at(l.to);
        m.flows.push_back({f[0], va, vb, ta, tb, c.g_c_ij, c.g_ij, c.b_ij, false});
        m.flows.push_back({f[1], va, vb, ta, tb, c.b_c_ij, c.g_ij, c.b_ij, true});
        m.flows.push_back({f[2], vb, va, tb, ta, c.g_c_ji, c.g_ji, c.b_ji, false});
        m.flows.push_back({f[3], vb, va, tb, ta, c.b_c_ji, c.g_ji, c.b_ji, true});
        if (l.s_max) {
            m.line_limits.push_back({f[0], f[1], *l.s_max});
            m.line_limits.push_back({f[2], f[3], *l.s_max});
        }
        if (l.has_angle_limits())
            m.angle_spreads.push_back({ta, tb, l.theta_min, l.theta_max});
    }
}

inline void add_balance(OpfModel& m, const Network& net, const std::vector<int>& balance_nodes) {
    for (int i : balance_nodes) {
        const Bus& b = net.buses()[i];
        BalanceConstraint bp, bq;
        bp.v = bq.v = m.layout.v.at(i);
        bp.shunt = b.g_sh;
        bq.shunt = -b.b_sh;
        bp.demand = b.p_d;
        bq.demand = b.q_d;
        for (int e : net.lines_at(i)) {
            const auto& f = m.layout.line_flows.at(e);
            bool from_side = net.lines()[e].from == i;
            bp.flows.push_back(from_side ? f[0] : f[2]);
            bq.flows.push_back(from_side ? f[1] : f[3]);
        }
        for (int gi : net.generators_at(i)) {
            const auto& gp = m.layout.gen_power.at(gi);
            bp.gens.push_back(gp[0]);
            bq.gens.push_back(gp[1]);
        }
        m.balances.push_back(std::move(bp));
        m.balances.push_back(std::move(bq));
    }
}

}  // namespace detail

/// Centralized OPF over the whole network: quadratic generation cost, box
/// bounds, angle-difference bounds, power balance at every node, the four
/// directed flow definitions per line, squared line limits, and the reference
/// angle fixed to zero.
inline OpfModel build_centralized(const Network& net) {
    if (net.ref_bus() < 0) throw NoReferenceBusError();
    OpfModel m;
    std::vector<int> nodes, lines, gens;
    for (const Bus& b : net.buses()) nodes.push_back(b.index);
    for (const Line& l : net.lines()) lines.push_back(l.index);
    for (const Generator& g : net.generators()) gens.push_back(g.index);
    detail::add_node_vars(m, net, nodes);
    detail::add_line_vars(m, net, lines);
    detail::add_gen_vars(m, net, gens);
    detail::add_line_constraints(m, net, lines);
    detail::add_balance(m, net, nodes);
    m.fixes.push_back({m.layout.theta.at(net.ref_bus()), 0.0});
    m.start[m.layout.theta.at(net.ref_bus())] = 0.0;
    return m;
}

/// The shared consensus keys of one region closure, in sorted order: v and
/// theta for every closure node present in more than one closure, p and q for
/// both orientations of every line present in more than one closure.
inline std::vector<ConsensusKey> region_shared_keys(const RegionClosure& cl,
                                                    const SharedEntityMap& shared) {
    std::vector<ConsensusKey> keys;
    for (int i : cl.nodes) {
        if (shared.node_shared(i)) {
            keys.push_back(ConsensusKey::v(i));
            keys.push_back(ConsensusKey::theta(i));
        }
    }
    for (int e : cl.lines) {
        if (shared.line_shared(e)) {
            keys.push_back(ConsensusKey::p(e, 0));
            keys.push_back(ConsensusKey::q(e, 0));
            keys.push_back(ConsensusKey::p(e, 1));
            keys.push_back(ConsensusKey::q(e, 1));
        }
    }
    std::sort(keys.begin(), keys.end());
    return keys;
}

struct RegionProblem {
    int region = 0;
    OpfModel model;
    std::vector<std::pair<ConsensusKey, int>> shared_vars;  // key -> variable index
};

/// Region subproblem: the OPF constraint families restricted to the closure
/// (power balance and generators at owned nodes only; all closure lines in
/// both directions), with the objective
///
///   sum_owned f_i(pg_i) + sum_shared [ y*(w - beta) + rho/2*(w - beta)^2 ]
///
/// The reference angle is fixed only if this region owns the reference bus.
inline RegionProblem build_region(const Network& net, const RegionClosure& cl,
                                  const SharedEntityMap& shared, const ConsensusParams& consensus) {
    auto keys = region_shared_keys(cl, shared);
    if (consensus.terms.size() != keys.size())
        throw InconsistentConsensusKeysError("region " + std::to_string(cl.id) + " expects " +
                                             std::to_string(keys.size()) + " consensus terms, got " +
                                             std::to_string(consensus.terms.size()));
    for (size_t i = 0; i < keys.size(); ++i)
        if (!(consensus.terms[i].key == keys[i]))
            throw InconsistentConsensusKeysError("consensus keys do not match the region's shared set");

    RegionProblem rp;
    rp.region = cl.id;
    OpfModel& m = rp.model;

    std::vector<int> gens;
    for (int i : cl.owned)
        for (int gi : net.generators_at(i)) gens.push_back(gi);
    std::sort(gens.begin(), gens.end());

    detail::add_node_vars(m, net, cl.nodes);
    detail::add_line_vars(m, net, cl.lines);
    detail::add_gen_vars(m, net, gens);
    detail::add_line_constraints(m, net, cl.lines);
    detail::add_balance(m, net, cl.owned);
    if (cl.owns(net.ref_bus())) m.fixes.push_back({m.layout.theta.at(net.ref_bus()), 0.0});

    for (const ConsensusTerm& t : consensus.terms) {
        if (t.rho <= 0) throw InconsistentConsensusKeysError("consensus term with non-positive rho");
        int var = m.layout.index_of(t.key);
        m.obj_terms.push_back({var, t.rho / 2.0, t.y - t.rho * t.beta});
        m.obj_constant += 0.5 * t.rho * t.beta * t.beta - t.y * t.beta;
        rp.shared_vars.emplace_back(t.key, var);
    }
    return rp;
}

// -- evaluation adapter ---------------------------------------------------------

/// Dense NlpProblem view of an OpfModel. Constraint order: flow definitions,
/// balance rows (P then Q per node), variable fixes; then line limits and the
/// finite angle-spread rows. All second derivatives are closed-form.
class OpfNlp final : public NlpProblem {
  public:
    explicit OpfNlp(const OpfModel& m) : m_(m) {
        lb_ = Eigen::Map<const Eigen::VectorXd>(m.lb.data(), m.lb.size());
        ub_ = Eigen::Map<const Eigen::VectorXd>(m.ub.data(), m.ub.size());
    }

    const OpfModel& model() const { return m_; }

    int num_vars() const override { return m_.num_vars(); }
    int num_eq() const override { return m_.num_eq(); }
    int num_ineq() const override { return m_.num_ineq(); }
    const Eigen::VectorXd& lower_bounds() const override { return lb_; }
    const Eigen::VectorXd& upper_bounds() const override { return ub_; }

    double objective(const Eigen::VectorXd& x) const override {
        double f = m_.obj_constant;
        for (const auto& t : m_.obj_terms) f += (t.quad * x(t.var) + t.lin) * x(t.var);
        return f;
    }

    void objective_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& g) const override {
        g.setZero(num_vars());
        for (const auto& t : m_.obj_terms) g(t.var) += 2 * t.quad * x(t.var) + t.lin;
    }

    void eq_constraints(const Eigen::VectorXd& x, Eigen::VectorXd& c) const override {
        c.resize(num_eq());
        int r = 0;
        for (const auto& fc : m_.flows) c(r++) = x(fc.flow) - flow_value(fc, x);
        for (const auto& b : m_.balances) {
            double v = b.shunt * x(b.v) * x(b.v) + b.demand;
            for (int fv : b.flows) v += x(fv);
            for (int gv : b.gens) v -= x(gv);
            c(r++) = v;
        }
        for (const auto& fx : m_.fixes) c(r++) = x(fx.var) - fx.value;
    }

    void ineq_constraints(const Eigen::VectorXd& x, Eigen::VectorXd& c) const override {
        c.resize(num_ineq());
        int r = 0;
        for (const auto& ll : m_.line_limits)
            c(r++) = x(ll.p) * x(ll.p) + x(ll.q) * x(ll.q) - ll.s_max * ll.s_max;
        for (const auto& a : m_.angle_spreads) {
            double d = x(a.th_a) - x(a.th_b);
            if (std::isfinite(a.hi)) c(r++) = d - a.hi;
            if (std::isfinite(a.lo)) c(r++) = a.lo - d;
        }
    }

    void eq_jacobian(const Eigen::VectorXd& x, Eigen::MatrixXd& jac) const override {
        jac.setZero(num_eq(), num_vars());
        int r = 0;
        for (const auto& fc : m_.flows) {
            jac(r, fc.flow) = 1.0;
            add_flow_gradient(fc, x, jac, r);
            ++r;
        }
        for (const auto& b : m_.balances) {
            jac(r, b.v) = 2 * b.shunt * x(b.v);
            for (int fv : b.flows) jac(r, fv) += 1.0;
            for (int gv : b.gens) jac(r, gv) -= 1.0;
            ++r;
        }
        for (const auto& fx : m_.fixes) jac(r++, fx.var) = 1.0;
    }

    void ineq_jacobian(const Eigen::VectorXd& x, Eigen::MatrixXd& jac) const override {
        jac.setZero(num_ineq(), num_vars());
        int r = 0;
        for (const auto& ll : m_.line_limits) {
            jac(r, ll.p) = 2 * x(ll.p);
            jac(r, ll.q) = 2 * x(ll.q);
            ++r;
        }
        for (const auto& a : m_.angle_spreads) {
            if (std::isfinite(a.hi)) {
                jac(r, a.th_a) = 1.0;
                jac(r, a.th_b) = -1.0;
                ++r;
            }
            if (std::isfinite(a.lo)) {
                jac(r, a.th_a) = -1.0;
                jac(r, a.th_b) = 1.0;
                ++r;
            }
        }
    }

    void lagrangian_hessian(const Eigen::VectorXd& x, double obj_factor,
                            const Eigen::VectorXd& y_eq, const Eigen::VectorXd& y_ineq,
                            Eigen::MatrixXd& hess) const override {
        hess.setZero(num_vars(), num_vars());
        for (const auto& t : m_.obj_terms) hess(t.var, t.var) += obj_factor * 2 * t.quad;
        int r = 0;
        for (const auto& fc : m_.flows) add_flow_hessian(fc, x, -y_eq(r++), hess);
        for (const auto& b : m_.balances) hess(b.v, b.v) += y_eq(r++) * 2 * b.shunt;
        // fixes are linear; line limits below
        int ri = 0;
        for (const auto& ll : m_.line_limits) {
            hess(ll.p, ll.p) += 2 * y_ineq(ri);
            hess(ll.q, ll.q) += 2 * y_ineq(ri);
            ++ri;
        }
    }

  private:
    const OpfModel& m_;
    Eigen::VectorXd lb_, ub_;

    static double flow_value(const FlowConstraint& fc, const Eigen::VectorXd& x) {
        double va = x(fc.v_a), vb = x(fc.v_b);
        double d = x(fc.th_a) - x(fc.th_b);
        double cs = std::cos(d), sn = std::sin(d);
        if (!fc.reactive) return fc.c_self * va * va - fc.g * va * vb * cs + fc.b * va * vb * sn;
        return fc.c_self * va * va - fc.b * va * vb * cs - fc.g * va * vb * sn;
    }

    /// gradient of -flow_value into jac row r (the constraint is flow - F = 0)
    static void add_flow_gradient(const FlowConstraint& fc, const Eigen::VectorXd& x,
                                  Eigen::MatrixXd& jac, int r) {
        double va = x(fc.v_a), vb = x(fc.v_b);
        double d = x(fc.th_a) - x(fc.th_b);
        double cs = std::cos(d), sn = std::sin(d);
        double dF_va, dF_vb, dF_d;
        if (!fc.reactive) {
            dF_va = 2 * fc.c_self * va - fc.g * vb * cs + fc.b * vb * sn;
            dF_vb = -fc.g * va * cs + fc.b * va * sn;
            dF_d = fc.g * va * vb * sn + fc.b * va * vb * cs;
        } else {
            dF_va = 2 * fc.c_self * va - fc.b * vb * cs - fc.g * vb * sn;
            dF_vb = -fc.b * va * cs - fc.g * va * sn;
            dF_d = fc.b * va * vb * sn - fc.g * va * vb * cs;
        }
        jac(r, fc.v_a) -= dF_va;
        jac(r, fc.v_b) -= dF_vb;
        jac(r, fc.th_a) -= dF_d;
        jac(r, fc.th_b) += dF_d;
    }

    /// Adds w * hessian(F) where the constraint row contributes y * (flow - F),
    /// i.e. call with w = -y.
    static void add_flow_hessian(const FlowConstraint& fc, const Eigen::VectorXd& x, double w,
                                 Eigen::MatrixXd& hess) {
        if (w == 0) return;
        double va = x(fc.v_a), vb = x(fc.v_b);
        double d = x(fc.th_a) - x(fc.th_b);
        double cs = std::cos(d), sn = std::sin(d);
        // trig kernel K = -g*cos + b*sin (active) or -b*cos - g*sin (reactive)
        double K, Kd, Kdd;  // kernel and its first/second derivative in d
        if (!fc.reactive) {
            K = -fc.g * cs + fc.b * sn;
            Kd = fc.g * sn + fc.b * cs;
        } else {
            K = -fc.b * cs - fc.g * sn;
            Kd = fc.b * sn - fc.g * cs;
        }
        Kdd = -K;
        // F = c_self*va^2 + va*vb*K(d)
        double h_vava = 2 * fc.c_self;
        double h_vavb = K;
        double h_vad = vb * Kd;
        double h_vbd = va * Kd;
        double h_dd = va * vb * Kdd;

        auto add = [&](int i, int j, double val) {
            hess(i, j) += w * val;
            if (i != j) hess(j, i) += w * val;
        };
        add(fc.v_a, fc.v_a, h_vava);
        add(fc.v_a, fc.v_b, h_vavb);
        add(fc.v_a, fc.th_a, h_vad);
        add(fc.v_a, fc.th_b, -h_vad);
        add(fc.v_b, fc.th_a, h_vbd);
        add(fc.v_b, fc.th_b, -h_vbd);
        add(fc.th_a, fc.th_a, h_dd);
        add(fc.th_b, fc.th_b, h_dd);
        add(fc.th_a, fc.th_b, -h_dd);
    }
};

// -- reporting helpers -----------------------------------------------------------

/// |(p_ipm - p_dica) / p_ipm|
inline double gap(double p_dica, double p_ipm) {
    if (p_ipm == 0) throw DivisionByZeroError("reference objective is zero");
    return std::abs((p_ipm - p_dica) / p_ipm);
}

/// Total generation cost of a dispatch (per-unit power; the stored cost
/// coefficients are rescaled so the result is in the case file's native $/h).
inline double total_cost(const Network& net, const Eigen::VectorXd& gen_p) {
    double c = 0;
    for (const Generator& g : net.generators()) c += g.cost(gen_p(g.index));
    return c;
}

}  // namespace ropf
