#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "ropf/errors.hpp"

namespace ropf {

/// A smooth constrained program
///
///   min f(x)   s.t.  c_E(x) = 0,  c_I(x) <= 0,  l <= x <= u
///
/// with dense derivative evaluation. Bounds may be +-infinity. Evaluations
/// must be deterministic and finite on the interior of the bound box.
class NlpProblem {
  public:
    virtual ~NlpProblem() = default;

    virtual int num_vars() const = 0;
    virtual int num_eq() const = 0;
    virtual int num_ineq() const = 0;
    virtual const Eigen::VectorXd& lower_bounds() const = 0;
    virtual const Eigen::VectorXd& upper_bounds() const = 0;

    virtual double objective(const Eigen::VectorXd& x) const = 0;
    virtual void objective_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const = 0;
    virtual void eq_constraints(const Eigen::VectorXd& x, Eigen::VectorXd& c) const = 0;
    virtual void ineq_constraints(const Eigen::VectorXd& x, Eigen::VectorXd& c) const = 0;
    virtual void eq_jacobian(const Eigen::VectorXd& x, Eigen::MatrixXd& jac) const = 0;
    virtual void ineq_jacobian(const Eigen::VectorXd& x, Eigen::MatrixXd& jac) const = 0;

    /// H = obj_factor * grad^2 f + sum_i y_eq[i] grad^2 c_E_i + sum_j y_ineq[j] grad^2 c_I_j.
    /// Only the lower triangle needs to be filled symmetrically consistent.
    virtual void lagrangian_hessian(const Eigen::VectorXd& x, double obj_factor,
                                    const Eigen::VectorXd& y_eq, const Eigen::VectorXd& y_ineq,
                                    Eigen::MatrixXd& hess) const = 0;
};

enum class SolveStatus { Optimal, MaxIter, Infeasible, NumericalFailure };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::MaxIter: return "max_iter";
        case SolveStatus::Infeasible: return "infeasible";
        default: return "numerical_failure";
    }
}

struct KktResiduals {
    double stationarity = 0;
    double feasibility = 0;
    double complementarity = 0;

    double max() const { return std::max({stationarity, feasibility, complementarity}); }
};

struct SolveResult {
    SolveStatus status = SolveStatus::NumericalFailure;
    Eigen::VectorXd x;
    double objective = 0;
    int iterations = 0;
    KktResiduals kkt;
    // multipliers at the solution (useful for warm starts)
    Eigen::VectorXd y_eq, y_ineq, z_lower, z_upper;
    double mu_final = 0;
    std::string message;
};

struct DerivativeCheckResult {
    double max_rel_error = 0;
    std::string where;  // e.g. "eq[3]/x[7]" or "grad/x[2]"
};

/// Compares the analytic objective gradient and constraint Jacobians against
/// central finite differences with the given step. Independent of the solver;
/// used as the oracle for derivative correctness.
inline DerivativeCheckResult check_derivatives(const NlpProblem& p, const Eigen::VectorXd& x,
                                               double step = 1e-6) {
    DerivativeCheckResult res;
    const int n = p.num_vars();
    auto consider = [&](double analytic, double fd, const std::string& where) {
        double denom = std::max({1.0, std::abs(analytic), std::abs(fd)});
        double err = std::abs(analytic - fd) / denom;
        if (err > res.max_rel_error) {
            res.max_rel_error = err;
            res.where = where;
        }
    };

    Eigen::VectorXd grad(n);
    p.objective_gradient(x, grad);
    Eigen::VectorXd xp = x, xm = x;
    for (int j = 0; j < n; ++j) {
        xp(j) = x(j) + step;
        xm(j) = x(j) - step;
        double fd = (p.objective(xp) - p.objective(xm)) / (2 * step);
        consider(grad(j), fd, "grad/x[" + std::to_string(j) + "]");
        xp(j) = x(j);
        xm(j) = x(j);
    }

    auto check_block = [&](int m, auto eval, const Eigen::MatrixXd& jac, const char* tag) {
        if (m == 0) return;
        Eigen::VectorXd cp(m), cm(m);
        for (int j = 0; j < n; ++j) {
            xp(j) = x(j) + step;
            xm(j) = x(j) - step;
            eval(xp, cp);
            eval(xm, cm);
            for (int i = 0; i < m; ++i)
                consider(jac(i, j), (cp(i) - cm(i)) / (2 * step),
                         std::string(tag) + "[" + std::to_string(i) + "]/x[" + std::to_string(j) + "]");
            xp(j) = x(j);
            xm(j) = x(j);
        }
    };

    if (p.num_eq() > 0) {
        Eigen::MatrixXd je(p.num_eq(), n);
        p.eq_jacobian(x, je);
        check_block(p.num_eq(), [&](const Eigen::VectorXd& y, Eigen::VectorXd& c) { p.eq_constraints(y, c); },
                    je, "eq");
    }
    if (p.num_ineq() > 0) {
        Eigen::MatrixXd ji(p.num_ineq(), n);
        p.ineq_jacobian(x, ji);
        check_block(p.num_ineq(),
                    [&](const Eigen::VectorXd& y, Eigen::VectorXd& c) { p.ineq_constraints(y, c); }, ji,
                    "ineq");
    }
    return res;
}

/// Test-style Hessian check: compares the Lagrangian Hessian against central
/// differences of the Lagrangian gradient at fixed multipliers.
inline double check_hessian(const NlpProblem& p, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& y_eq, const Eigen::VectorXd& y_ineq,
                            double step = 1e-6) {
    const int n = p.num_vars();
    Eigen::MatrixXd h(n, n);
    p.lagrangian_hessian(x, 1.0, y_eq, y_ineq, h);

    auto lag_grad = [&](const Eigen::VectorXd& pt, Eigen::VectorXd& g) {
        p.objective_gradient(pt, g);
        if (p.num_eq() > 0) {
            Eigen::MatrixXd je(p.num_eq(), n);
            p.eq_jacobian(pt, je);
            g += je.transpose() * y_eq;
        }
        if (p.num_ineq() > 0) {
            Eigen::MatrixXd ji(p.num_ineq(), n);
            p.ineq_jacobian(pt, ji);
            g += ji.transpose() * y_ineq;
        }
    };

    double worst = 0;
    Eigen::VectorXd gp(n), gm(n), xp = x, xm = x;
    for (int j = 0; j < n; ++j) {
        xp(j) = x(j) + step;
        xm(j) = x(j) - step;
        lag_grad(xp, gp);
        lag_grad(xm, gm);
        for (int i = 0; i < n; ++i) {
            double fd = (gp(i) - gm(i)) / (2 * step);
            double denom = std::max({1.0, std::abs(h(i, j)), std::abs(fd)});
            worst = std::max(worst, std::abs(h(i, j) - fd) / denom);
        }
        xp(j) = x(j);
        xm(j) = x(j);
    }
    return worst;
}

}  // namespace ropf
