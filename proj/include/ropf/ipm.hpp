#pragma once

#include <Eigen/Dense>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

#include "ropf/nlp.hpp"

namespace ropf {

struct SolverOptions {
    double tol = 1e-8;
    int max_iter = 500;
    double mu_init = 0.1;
    double tau = 0.995;        // fraction-to-the-boundary
    double bound_push = 0.01;  // kappa_1: absolute push of the start into the bound box
    double bound_frac = 0.01;  // kappa_2: relative push
    int max_line_search = 40;
    bool scale = true;
    bool collect_log = false;
    bool verbose = false;  // one line per iteration on stderr
};

/// Primal-dual state to resume from; produced by a previous SolveResult.
struct WarmStart {
    Eigen::VectorXd x, y_eq, y_ineq, z_lower, z_upper;
    double mu = 1e-9;
};

struct IterLogEntry {
    int iter = 0;
    double mu = 0, nu = 0;
    double merit_before = 0, merit_after = 0;
    double alpha = 0, delta_w = 0;
    double kkt_error = 0;
};

/// Primal-dual interior-point method on the slack form
///
///   min f(x) - mu sum log(x-l) - mu sum log(u-x) - mu sum log(s)
///   s.t. c_E(x) = 0,  c_I(x) + s = 0
///
/// with damped Newton steps on the perturbed KKT system, a fraction-to-the-
/// boundary rule, an l1 exact-penalty barrier merit line search, and a dense
/// symmetric indefinite factorization (LAPACK dsytrf) whose inertia is
/// corrected by diagonal regularization (start 1e-8, x10 escalation). mu is
/// reduced by a factor of 10 whenever the scaled KKT residual falls below
/// 10*mu. Bounds with l == u are converted to equality rows internally.
class InteriorPointSolver {
  public:
    explicit InteriorPointSolver(SolverOptions opts = {}) : opts_(opts) {}

    const SolverOptions& options() const { return opts_; }
    SolverOptions& options() { return opts_; }
    const std::vector<IterLogEntry>& log() const { return log_; }

    SolveResult solve(const NlpProblem& p, const Eigen::VectorXd& x0,
                      const WarmStart* warm = nullptr) {
        log_.clear();
        SolveResult out;
        try {
            out = run(p, x0, warm);
        } catch (const std::exception& e) {
            out.status = SolveStatus::NumericalFailure;
            out.message = e.what();
            out.x = x0;
        }
        return out;
    }

  private:
    SolverOptions opts_;
    std::vector<IterLogEntry> log_;

    static double inf() { return std::numeric_limits<double>::infinity(); }

    struct Inertia {
        int pos = 0, neg = 0, zero = 0;
        bool singular = false;
    };

    static Inertia read_inertia(const Eigen::MatrixXd& f, const std::vector<lapack_int>& ipiv,
                                bool info_singular) {
        Inertia in;
        in.singular = info_singular;
        const int n = static_cast<int>(ipiv.size());
        for (int k = 0; k < n;) {
            if (ipiv[k] > 0) {
                double d = f(k, k);
                if (d > 0)
                    ++in.pos;
                else if (d < 0)
                    ++in.neg;
                else
                    ++in.zero;
                ++k;
            } else {
                // 2x2 block: eigenvalue signs from determinant and trace
                double d11 = f(k, k), d22 = f(k + 1, k + 1), d21 = f(k + 1, k);
                double det = d11 * d22 - d21 * d21;
                if (det < 0) {
                    ++in.pos;
                    ++in.neg;
                } else if (det == 0) {
                    in.zero += 2;
                } else if (d11 + d22 > 0) {
                    in.pos += 2;
                } else {
                    in.neg += 2;
                }
                k += 2;
            }
        }
        if (in.zero > 0) in.singular = true;
        return in;
    }

    SolveResult run(const NlpProblem& p, const Eigen::VectorXd& x0, const WarmStart* warm) {
        using Eigen::MatrixXd;
        using Eigen::VectorXd;

        const int n = p.num_vars();
        const int m_eq0 = p.num_eq();
        const int m_ineq = p.num_ineq();

        VectorXd lb = p.lower_bounds();
        VectorXd ub = p.upper_bounds();

        // bounds with l == u become equality rows x_i = value
        std::vector<int> fixed_idx;
        std::vector<double> fixed_val;
        for (int i = 0; i < n; ++i) {
            if (lb(i) > ub(i)) {
                SolveResult r;
                r.status = SolveStatus::Infeasible;
                r.message = "variable bounds cross: index " + std::to_string(i);
                r.x = x0;
                return r;
            }
            if (std::isfinite(lb(i)) && ub(i) - lb(i) <= 1e-10 * std::max(1.0, std::abs(lb(i)))) {
                fixed_idx.push_back(i);
                fixed_val.push_back(0.5 * (lb(i) + ub(i)));
                lb(i) = -inf();
                ub(i) = inf();
            }
        }
        const int n_fix = static_cast<int>(fixed_idx.size());
        const int m_eq = m_eq0 + n_fix;

        std::vector<int> lo_idx, up_idx;
        for (int i = 0; i < n; ++i) {
            if (std::isfinite(lb(i))) lo_idx.push_back(i);
            if (std::isfinite(ub(i))) up_idx.push_back(i);
        }

        // start point strictly inside the bound box
        VectorXd x = x0;
        const double push_scale = warm ? 1e-10 : opts_.bound_push;
        for (int i = 0; i < n; ++i) {
            if (std::isfinite(lb(i)) && std::isfinite(ub(i))) {
                double w = ub(i) - lb(i);
                double push = warm ? std::min(push_scale * std::max(1.0, std::abs(lb(i))), 0.5 * w)
                                   : std::min(opts_.bound_push * std::max(1.0, std::abs(lb(i))),
                                              opts_.bound_frac * w);
                x(i) = std::clamp(x(i), lb(i) + push, ub(i) - push);
            } else if (std::isfinite(lb(i))) {
                x(i) = std::max(x(i), lb(i) + push_scale * std::max(1.0, std::abs(lb(i))));
            } else if (std::isfinite(ub(i))) {
                x(i) = std::min(x(i), ub(i) - push_scale * std::max(1.0, std::abs(ub(i))));
            }
        }
        for (int k = 0; k < n_fix; ++k) x(fixed_idx[k]) = fixed_val[k];

        // gradient-based scaling so first-order information starts O(<=100)
        double sf = 1.0;
        VectorXd se = VectorXd::Ones(m_eq), si = VectorXd::Ones(m_ineq);
        {
            VectorXd g0(n);
            p.objective_gradient(x, g0);
            if (opts_.scale) {
                const double gmax = 100.0;
                double gn = g0.lpNorm<Eigen::Infinity>();
                if (gn > gmax) sf = gmax / gn;
                if (m_eq0 > 0) {
                    MatrixXd je(m_eq0, n);
                    p.eq_jacobian(x, je);
                    for (int i = 0; i < m_eq0; ++i) {
                        double rn = je.row(i).lpNorm<Eigen::Infinity>();
                        if (rn > gmax) se(i) = gmax / rn;
                    }
                }
                if (m_ineq > 0) {
                    MatrixXd ji(m_ineq, n);
                    p.ineq_jacobian(x, ji);
                    for (int i = 0; i < m_ineq; ++i) {
                        double rn = ji.row(i).lpNorm<Eigen::Infinity>();
                        if (rn > gmax) si(i) = gmax / rn;
                    }
                }
            }
        }

        // scaled evaluation helpers (equality block carries the fixed-variable rows)
        auto eval_f = [&](const VectorXd& pt) { return sf * p.objective(pt); };
        auto eval_grad = [&](const VectorXd& pt, VectorXd& g) {
            p.objective_gradient(pt, g);
            g *= sf;
        };
        auto eval_ce = [&](const VectorXd& pt, VectorXd& c) {
            c.resize(m_eq);
            if (m_eq0 > 0) {
                VectorXd c0(m_eq0);
                p.eq_constraints(pt, c0);
                c.head(m_eq0) = c0.cwiseProduct(se.head(m_eq0));
            }
            for (int k = 0; k < n_fix; ++k) c(m_eq0 + k) = pt(fixed_idx[k]) - fixed_val[k];
        };
        auto eval_je = [&](const VectorXd& pt, MatrixXd& j) {
            j.setZero(m_eq, n);
            if (m_eq0 > 0) {
                MatrixXd j0(m_eq0, n);
                p.eq_jacobian(pt, j0);
                j.topRows(m_eq0) = se.head(m_eq0).asDiagonal() * j0;
            }
            for (int k = 0; k < n_fix; ++k) j(m_eq0 + k, fixed_idx[k]) = 1.0;
        };
        auto eval_ci = [&](const VectorXd& pt, VectorXd& c) {
            c.resize(m_ineq);
            if (m_ineq > 0) {
                VectorXd c0(m_ineq);
                p.ineq_constraints(pt, c0);
                c = c0.cwiseProduct(si);
            }
        };
        auto eval_ji = [&](const VectorXd& pt, MatrixXd& j) {
            j.resize(m_ineq, n);
            if (m_ineq > 0) {
                MatrixXd j0(m_ineq, n);
                p.ineq_jacobian(pt, j0);
                j = si.asDiagonal() * j0;
            }
        };

        double mu = warm ? std::max(warm->mu, opts_.tol / 10) : opts_.mu_init;
        const double mu_min = opts_.tol / 10;

        // dual initialization
        VectorXd c_ineq(m_ineq);
        eval_ci(x, c_ineq);
        VectorXd s(m_ineq);
        for (int j = 0; j < m_ineq; ++j) s(j) = std::max(-c_ineq(j), 1e-6);

        VectorXd y_eq = VectorXd::Zero(m_eq);
        VectorXd y_ineq(m_ineq), z_lo(lo_idx.size()), z_up(up_idx.size());
        for (int j = 0; j < m_ineq; ++j) y_ineq(j) = std::clamp(mu / s(j), 1e-8, 1e8);
        for (size_t k = 0; k < lo_idx.size(); ++k)
            z_lo(k) = std::clamp(mu / (x(lo_idx[k]) - lb(lo_idx[k])), 1e-8, 1e8);
        for (size_t k = 0; k < up_idx.size(); ++k)
            z_up(k) = std::clamp(mu / (ub(up_idx[k]) - x(up_idx[k])), 1e-8, 1e8);

        if (warm) {
            if (warm->y_eq.size() == m_eq0) {
                for (int i = 0; i < m_eq0; ++i) y_eq(i) = warm->y_eq(i) * sf / se(i);
            }
            if (warm->y_ineq.size() == m_ineq)
                for (int j = 0; j < m_ineq; ++j)
                    y_ineq(j) = std::max(1e-12, warm->y_ineq(j) * sf / si(j));
            if (warm->z_lower.size() == n)
                for (size_t k = 0; k < lo_idx.size(); ++k)
                    z_lo(k) = std::max(1e-12, warm->z_lower(lo_idx[k]) * sf);
            if (warm->z_upper.size() == n)
                for (size_t k = 0; k < up_idx.size(); ++k)
                    z_up(k) = std::max(1e-12, warm->z_upper(up_idx[k]) * sf);
        }

        double f_val = eval_f(x);
        VectorXd grad(n);
        eval_grad(x, grad);
        VectorXd c_eq;
        eval_ce(x, c_eq);
        eval_ci(x, c_ineq);
        MatrixXd j_eq, j_ineq;
        eval_je(x, j_eq);
        eval_ji(x, j_ineq);
        if (!std::isfinite(f_val) || !grad.allFinite() || !c_eq.allFinite() || !c_ineq.allFinite())
            throw Error("non-finite problem evaluation at the start point");

        const int n_kkt = n + m_ineq + m_eq + m_ineq;
        MatrixXd kkt(n_kkt, n_kkt);
        MatrixXd hess(n, n);
        std::vector<lapack_int> ipiv(n_kkt);

        double nu = 1.0;
        double force_delta = 0;  // regularization floor after a failed line search
        int consecutive_failures = 0;

        auto kkt_residuals = [&](double mu_target, KktResiduals& kr) {
            VectorXd r_stat = grad;
            if (m_eq > 0) r_stat += j_eq.transpose() * y_eq;
            if (m_ineq > 0) r_stat += j_ineq.transpose() * y_ineq;
            for (size_t k = 0; k < lo_idx.size(); ++k) r_stat(lo_idx[k]) -= z_lo(k);
            for (size_t k = 0; k < up_idx.size(); ++k) r_stat(up_idx[k]) += z_up(k);

            double comp = 0;
            for (size_t k = 0; k < lo_idx.size(); ++k)
                comp = std::max(comp, std::abs((x(lo_idx[k]) - lb(lo_idx[k])) * z_lo(k) - mu_target));
            for (size_t k = 0; k < up_idx.size(); ++k)
                comp = std::max(comp, std::abs((ub(up_idx[k]) - x(up_idx[k])) * z_up(k) - mu_target));
            for (int j = 0; j < m_ineq; ++j)
                comp = std::max(comp, std::abs(s(j) * y_ineq(j) - mu_target));

            const double n_duals =
                static_cast<double>(m_eq + m_ineq + lo_idx.size() + up_idx.size() + m_ineq);
            double dual_sum = y_eq.lpNorm<1>() + y_ineq.lpNorm<1>() + z_lo.lpNorm<1>() + z_up.lpNorm<1>();
            double sd = std::max(100.0, dual_sum / std::max(1.0, n_duals)) / 100.0;
            double comp_sum = y_ineq.lpNorm<1>() + z_lo.lpNorm<1>() + z_up.lpNorm<1>();
            double nz = static_cast<double>(m_ineq + lo_idx.size() + up_idx.size());
            double sc = std::max(100.0, comp_sum / std::max(1.0, nz)) / 100.0;

            kr.stationarity = r_stat.lpNorm<Eigen::Infinity>() / sd;
            double feas = c_eq.size() > 0 ? c_eq.lpNorm<Eigen::Infinity>() : 0.0;
            if (m_ineq > 0) feas = std::max(feas, (c_ineq + s).lpNorm<Eigen::Infinity>());
            kr.feasibility = feas;
            kr.complementarity = comp / sc;
        };

        auto barrier_value = [&](const VectorXd& xt, const VectorXd& st, double ft) {
            double b = ft;
            for (size_t k = 0; k < lo_idx.size(); ++k) {
                double gap = xt(lo_idx[k]) - lb(lo_idx[k]);
                if (gap <= 0) return inf();
                b -= mu * std::log(gap);
            }
            for (size_t k = 0; k < up_idx.size(); ++k) {
                double gap = ub(up_idx[k]) - xt(up_idx[k]);
                if (gap <= 0) return inf();
                b -= mu * std::log(gap);
            }
            for (int j = 0; j < m_ineq; ++j) {
                if (st(j) <= 0) return inf();
                b -= mu * std::log(st(j));
            }
            return b;
        };

        auto violation_l1 = [&](const VectorXd& ce, const VectorXd& ci, const VectorXd& st) {
            double v = ce.size() > 0 ? ce.lpNorm<1>() : 0.0;
            if (m_ineq > 0) v += (ci + st).lpNorm<1>();
            return v;
        };

        int iter = 0;
        for (; iter < opts_.max_iter; ++iter) {
            KktResiduals kr0;
            kkt_residuals(0.0, kr0);
            if (kr0.max() <= opts_.tol) {
                return finish(SolveStatus::Optimal, p, x, s, y_eq, y_ineq, z_lo, z_up, lo_idx, up_idx,
                              kr0, iter, mu, sf, se, si, m_eq0, n);
            }
            KktResiduals kr_mu;
            kkt_residuals(mu, kr_mu);
            int reductions = 0;
            while (kr_mu.max() <= 10.0 * mu && mu > mu_min && reductions++ < 30) {
                mu = std::max(mu / 10.0, mu_min);
                kkt_residuals(mu, kr_mu);
            }

            p.lagrangian_hessian(x, sf, se.head(m_eq0).cwiseProduct(y_eq.head(m_eq0)),
                                 si.cwiseProduct(y_ineq), hess);

            // Newton direction with inertia correction
            VectorXd sol;
            double delta_w = force_delta;
            bool factored = false;
            for (int attempt = 0; attempt < 30 && !factored; ++attempt) {
                double delta_c = 0;
                if (attempt > 0 || force_delta > 0) {
                    if (attempt > 0) delta_w = delta_w == 0 ? 1e-8 : delta_w * 10.0;
                    delta_c = 1e-8 * std::pow(mu, 0.25);
                    if (delta_w > 1e14) break;
                }
                kkt.setZero();
                kkt.topLeftCorner(n, n) = hess;
                for (size_t k = 0; k < lo_idx.size(); ++k)
                    kkt(lo_idx[k], lo_idx[k]) += z_lo(k) / (x(lo_idx[k]) - lb(lo_idx[k]));
                for (size_t k = 0; k < up_idx.size(); ++k)
                    kkt(up_idx[k], up_idx[k]) += z_up(k) / (ub(up_idx[k]) - x(up_idx[k]));
                for (int i = 0; i < n; ++i) kkt(i, i) += delta_w;
                for (int j = 0; j < m_ineq; ++j)
                    kkt(n + j, n + j) = y_ineq(j) / s(j) + delta_w;
                kkt.block(n + m_ineq, 0, m_eq, n) = j_eq;
                kkt.block(0, n + m_ineq, n, m_eq) = j_eq.transpose();
                if (m_ineq > 0) {
                    kkt.block(n + m_ineq + m_eq, 0, m_ineq, n) = j_ineq;
                    kkt.block(0, n + m_ineq + m_eq, n, m_ineq) = j_ineq.transpose();
                    for (int j = 0; j < m_ineq; ++j) {
                        kkt(n + m_ineq + m_eq + j, n + j) = 1.0;
                        kkt(n + j, n + m_ineq + m_eq + j) = 1.0;
                    }
                }
                for (int i = 0; i < m_eq + m_ineq; ++i)
                    kkt(n + m_ineq + i, n + m_ineq + i) -= delta_c;

                lapack_int info = LAPACKE_dsytrf(LAPACK_COL_MAJOR, 'L', n_kkt, kkt.data(), n_kkt,
                                                 ipiv.data());
                if (info < 0) throw Error("dsytrf: invalid argument");
                Inertia in = read_inertia(kkt, ipiv, info > 0);
                if (!in.singular && in.pos == n + m_ineq && in.neg == m_eq + m_ineq) {
                    // assemble the right-hand side and solve in place
                    sol.resize(n_kkt);
                    VectorXd rx = -grad;
                    if (m_eq > 0) rx -= j_eq.transpose() * y_eq;
                    if (m_ineq > 0) rx -= j_ineq.transpose() * y_ineq;
                    for (size_t k = 0; k < lo_idx.size(); ++k)
                        rx(lo_idx[k]) += mu / (x(lo_idx[k]) - lb(lo_idx[k]));
                    for (size_t k = 0; k < up_idx.size(); ++k)
                        rx(up_idx[k]) -= mu / (ub(up_idx[k]) - x(up_idx[k]));
                    sol.head(n) = rx;
                    for (int j = 0; j < m_ineq; ++j) sol(n + j) = mu / s(j) - y_ineq(j);
                    sol.segment(n + m_ineq, m_eq) = -c_eq;
                    if (m_ineq > 0) sol.tail(m_ineq) = -(c_ineq + s);
                    lapack_int sinfo = LAPACKE_dsytrs(LAPACK_COL_MAJOR, 'L', n_kkt, 1, kkt.data(),
                                                      n_kkt, ipiv.data(), sol.data(), n_kkt);
                    if (sinfo != 0) throw Error("dsytrs failed");
                    factored = sol.allFinite();
                }
            }
            if (!factored) {
                KktResiduals kr;
                kkt_residuals(0.0, kr);
                return finish(kr.feasibility > std::max(100 * opts_.tol, 1e-6)
                                  ? SolveStatus::Infeasible
                                  : SolveStatus::NumericalFailure,
                              p, x, s, y_eq, y_ineq, z_lo, z_up, lo_idx, up_idx, kr, iter, mu, sf, se,
                              si, m_eq0, n, "KKT matrix could not be regularized");
            }

            VectorXd dx = sol.head(n);
            VectorXd ds = m_ineq > 0 ? VectorXd(sol.segment(n, m_ineq)) : VectorXd();
            VectorXd dy_eq = sol.segment(n + m_ineq, m_eq);
            VectorXd dy_ineq = m_ineq > 0 ? VectorXd(sol.tail(m_ineq)) : VectorXd();

            VectorXd dz_lo(lo_idx.size()), dz_up(up_idx.size());
            for (size_t k = 0; k < lo_idx.size(); ++k) {
                double gap = x(lo_idx[k]) - lb(lo_idx[k]);
                dz_lo(k) = mu / gap - z_lo(k) - z_lo(k) / gap * dx(lo_idx[k]);
            }
            for (size_t k = 0; k < up_idx.size(); ++k) {
                double gap = ub(up_idx[k]) - x(up_idx[k]);
                dz_up(k) = mu / gap - z_up(k) + z_up(k) / gap * dx(up_idx[k]);
            }

            // fraction-to-the-boundary step limits
            const double tau = opts_.tau;
            double alpha_pri = 1.0, alpha_dua = 1.0;
            for (size_t k = 0; k < lo_idx.size(); ++k) {
                double gap = x(lo_idx[k]) - lb(lo_idx[k]);
                if (dx(lo_idx[k]) < 0) alpha_pri = std::min(alpha_pri, -tau * gap / dx(lo_idx[k]));
                if (dz_lo(k) < 0) alpha_dua = std::min(alpha_dua, -tau * z_lo(k) / dz_lo(k));
            }
            for (size_t k = 0; k < up_idx.size(); ++k) {
                double gap = ub(up_idx[k]) - x(up_idx[k]);
                if (dx(up_idx[k]) > 0) alpha_pri = std::min(alpha_pri, tau * gap / dx(up_idx[k]));
                if (dz_up(k) < 0) alpha_dua = std::min(alpha_dua, -tau * z_up(k) / dz_up(k));
            }
            for (int j = 0; j < m_ineq; ++j) {
                if (ds(j) < 0) alpha_pri = std::min(alpha_pri, -tau * s(j) / ds(j));
                if (dy_ineq(j) < 0) alpha_dua = std::min(alpha_dua, -tau * y_ineq(j) / dy_ineq(j));
            }

            // exact-penalty weight: must dominate the multiplier estimates
            double y_next = 0;
            if (m_eq > 0) y_next = (y_eq + dy_eq).lpNorm<Eigen::Infinity>();
            if (m_ineq > 0) y_next = std::max(y_next, (y_ineq + dy_ineq).lpNorm<Eigen::Infinity>());
            nu = std::max(nu, 1.1 * y_next + 1e-4);

            double viol0 = violation_l1(c_eq, c_ineq, s);
            double phi0 = barrier_value(x, s, f_val) + nu * viol0;
            auto dir_deriv = [&]() {
                double d = grad.dot(dx);
                for (size_t k = 0; k < lo_idx.size(); ++k)
                    d -= mu * dx(lo_idx[k]) / (x(lo_idx[k]) - lb(lo_idx[k]));
                for (size_t k = 0; k < up_idx.size(); ++k)
                    d += mu * dx(up_idx[k]) / (ub(up_idx[k]) - x(up_idx[k]));
                for (int j = 0; j < m_ineq; ++j) d -= mu * ds(j) / s(j);
                return d - nu * viol0;
            };
            double dphi = dir_deriv();
            while (dphi >= 0 && viol0 > 1e-14 && nu < 1e14) {
                nu *= 10;
                phi0 = barrier_value(x, s, f_val) + nu * viol0;
                dphi = dir_deriv();
            }

            if (opts_.verbose) {
                std::fprintf(stderr,
                             "ipm %3d mu=%8.2e f=%14.8e viol=%8.2e kkt=%8.2e a_max=%6.4f dw=%7.1e "
                             "nu=%8.2e\n",
                             iter, mu, f_val / sf, viol0, kr0.max(), alpha_pri, delta_w, nu);
            }

            // Armijo backtracking from the boundary-limited step
            double alpha = alpha_pri;
            bool accepted = false;
            VectorXd x_t(n), s_t(m_ineq), ce_t, ci_t(m_ineq);
            double f_t = 0;
            for (int ls = 0; ls < opts_.max_line_search; ++ls) {
                x_t = x + alpha * dx;
                if (m_ineq > 0)
                    s_t = s + alpha * ds;
                f_t = eval_f(x_t);
                eval_ce(x_t, ce_t);
                eval_ci(x_t, ci_t);
                if (std::isfinite(f_t) && ce_t.allFinite() && ci_t.allFinite()) {
                    double phi_t = barrier_value(x_t, s_t, f_t) + nu * violation_l1(ce_t, ci_t, s_t);
                    if (std::isfinite(phi_t) && phi_t <= phi0 + 1e-4 * alpha * dphi) {
                        accepted = true;
                        if (opts_.collect_log) {
                            log_.push_back({iter, mu, nu, phi0, phi_t, alpha, delta_w, kr0.max()});
                        }
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if (!accepted) {
                if (opts_.verbose)
                    std::fprintf(stderr, "ipm %3d line search failed (dphi=%.3e)\n", iter, dphi);
                if (++consecutive_failures >= 3) {
                    KktResiduals kr;
                    kkt_residuals(0.0, kr);
                    return finish(kr.feasibility > std::max(100 * opts_.tol, 1e-6)
                                      ? SolveStatus::Infeasible
                                      : SolveStatus::NumericalFailure,
                                  p, x, s, y_eq, y_ineq, z_lo, z_up, lo_idx, up_idx, kr, iter, mu, sf,
                                  se, si, m_eq0, n, "line search failed");
                }
                force_delta = std::max(1e-4, delta_w * 10.0);
                continue;  // retry the iteration with a stiffer regularization floor
            }
            consecutive_failures = 0;
            force_delta = 0;

            x = x_t;
            if (m_ineq > 0) s = s_t;
            y_eq += alpha_dua * dy_eq;
            if (m_ineq > 0) y_ineq += alpha_dua * dy_ineq;
            z_lo += alpha_dua * dz_lo;
            z_up += alpha_dua * dz_up;

            // keep bound duals within a large corridor of mu/gap
            const double ks = 1e10;
            for (size_t k = 0; k < lo_idx.size(); ++k) {
                double gap = x(lo_idx[k]) - lb(lo_idx[k]);
                z_lo(k) = std::clamp(z_lo(k), mu / (ks * gap), ks * mu / gap);
            }
            for (size_t k = 0; k < up_idx.size(); ++k) {
                double gap = ub(up_idx[k]) - x(up_idx[k]);
                z_up(k) = std::clamp(z_up(k), mu / (ks * gap), ks * mu / gap);
            }
            for (int j = 0; j < m_ineq; ++j)
                y_ineq(j) = std::clamp(y_ineq(j), mu / (ks * s(j)), ks * mu / s(j));

            f_val = f_t;
            eval_grad(x, grad);
            c_eq = ce_t;
            c_ineq = ci_t;
            eval_je(x, j_eq);
            eval_ji(x, j_ineq);
        }

        KktResiduals kr;
        kkt_residuals(0.0, kr);
        return finish(SolveStatus::MaxIter, p, x, s, y_eq, y_ineq, z_lo, z_up, lo_idx, up_idx, kr,
                      iter, mu, sf, se, si, m_eq0, n, "iteration limit reached");
    }

    SolveResult finish(SolveStatus status, const NlpProblem& p, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& s, const Eigen::VectorXd& y_eq,
                       const Eigen::VectorXd& y_ineq, const Eigen::VectorXd& z_lo,
                       const Eigen::VectorXd& z_up, const std::vector<int>& lo_idx,
                       const std::vector<int>& up_idx, const KktResiduals& kr, int iterations,
                       double mu, double sf, const Eigen::VectorXd& se, const Eigen::VectorXd& si,
                       int m_eq0, int n, std::string message = "") {
        SolveResult r;
        r.status = status;
        r.x = x;
        r.objective = p.objective(x);
        r.iterations = iterations;
        r.kkt = kr;
        r.mu_final = mu;
        r.message = std::move(message);
        r.y_eq.resize(m_eq0);
        for (int i = 0; i < m_eq0; ++i) r.y_eq(i) = y_eq(i) * se(i) / sf;
        r.y_ineq = y_ineq.cwiseProduct(si) / sf;
        r.z_lower = Eigen::VectorXd::Zero(n);
        r.z_upper = Eigen::VectorXd::Zero(n);
        for (size_t k = 0; k < lo_idx.size(); ++k) r.z_lower(lo_idx[k]) = z_lo(k) / sf;
        for (size_t k = 0; k < up_idx.size(); ++k) r.z_upper(up_idx[k]) = z_up(k) / sf;
        (void)s;
        return r;
    }
};

}  // namespace ropf
