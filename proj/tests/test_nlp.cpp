#include <catch2/catch_amalgamated.hpp>

#include <functional>

#include "ropf/ipm.hpp"
#include "ropf/nlp.hpp"

using namespace ropf;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

/// Callback-backed problem for small hand-written programs.
struct SmallProblem : NlpProblem {
    int n = 0, me = 0, mi = 0;
    VectorXd lb, ub;
    std::function<double(const VectorXd&)> f;
    std::function<VectorXd(const VectorXd&)> g;
    std::function<VectorXd(const VectorXd&)> ce = nullptr, ci = nullptr;
    std::function<MatrixXd(const VectorXd&)> je = nullptr, ji = nullptr;
    std::function<MatrixXd(const VectorXd&, double, const VectorXd&, const VectorXd&)> hess;

    int num_vars() const override { return n; }
    int num_eq() const override { return me; }
    int num_ineq() const override { return mi; }
    const VectorXd& lower_bounds() const override { return lb; }
    const VectorXd& upper_bounds() const override { return ub; }
    double objective(const VectorXd& x) const override { return f(x); }
    void objective_gradient(const VectorXd& x, VectorXd& grad) const override { grad = g(x); }
    void eq_constraints(const VectorXd& x, VectorXd& c) const override { c = ce(x); }
    void ineq_constraints(const VectorXd& x, VectorXd& c) const override { c = ci(x); }
    void eq_jacobian(const VectorXd& x, MatrixXd& jac) const override { jac = je(x); }
    void ineq_jacobian(const VectorXd& x, MatrixXd& jac) const override { jac = ji(x); }
    void lagrangian_hessian(const VectorXd& x, double of, const VectorXd& ye, const VectorXd& yi,
                            MatrixXd& h) const override {
        h = hess(x, of, ye, yi);
    }
};

SmallProblem active_bound_problem() {
    // min (x-1)^2 s.t. x >= 2
    SmallProblem p;
    p.n = 1;
    p.lb = VectorXd::Constant(1, 2.0);
    p.ub = VectorXd::Constant(1, kInf);
    p.f = [](const VectorXd& x) { return (x(0) - 1) * (x(0) - 1); };
    p.g = [](const VectorXd& x) { return VectorXd::Constant(1, 2 * (x(0) - 1)).eval(); };
    p.hess = [](const VectorXd&, double of, const VectorXd&, const VectorXd&) {
        return (MatrixXd(1, 1) << 2 * of).finished();
    };
    return p;
}

SmallProblem projection_problem() {
    // min x^2 + y^2 s.t. x + y = 1
    SmallProblem p;
    p.n = 2;
    p.me = 1;
    p.lb = VectorXd::Constant(2, -kInf);
    p.ub = VectorXd::Constant(2, kInf);
    p.f = [](const VectorXd& x) { return x.squaredNorm(); };
    p.g = [](const VectorXd& x) { return (2 * x).eval(); };
    p.ce = [](const VectorXd& x) { return VectorXd::Constant(1, x(0) + x(1) - 1).eval(); };
    p.je = [](const VectorXd&) { return (MatrixXd(1, 2) << 1, 1).finished(); };
    p.hess = [](const VectorXd&, double of, const VectorXd&, const VectorXd&) {
        return (2 * of * MatrixXd::Identity(2, 2)).eval();
    };
    return p;
}

SmallProblem circle_problem() {
    // min -x - y s.t. x^2 + y^2 <= 1
    SmallProblem p;
    p.n = 2;
    p.mi = 1;
    p.lb = VectorXd::Constant(2, -kInf);
    p.ub = VectorXd::Constant(2, kInf);
    p.f = [](const VectorXd& x) { return -x(0) - x(1); };
    p.g = [](const VectorXd&) { return VectorXd::Constant(2, -1.0).eval(); };
    p.ci = [](const VectorXd& x) { return VectorXd::Constant(1, x.squaredNorm() - 1).eval(); };
    p.ji = [](const VectorXd& x) { return (2 * x.transpose()).eval(); };
    p.hess = [](const VectorXd&, double, const VectorXd&, const VectorXd& yi) {
        return (2 * yi(0) * MatrixXd::Identity(2, 2)).eval();
    };
    return p;
}

}  // namespace

TEST_CASE("active bound: min (x-1)^2 s.t. x >= 2") {
    SmallProblem p = active_bound_problem();
    InteriorPointSolver solver;
    SolveResult r = solver.solve(p, VectorXd::Constant(1, 5.0));
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(r.x(0) == Catch::Approx(2.0).margin(1e-6));
    CHECK(r.objective == Catch::Approx(1.0).margin(1e-6));
    CHECK(r.kkt.max() <= solver.options().tol);
}

TEST_CASE("equality projection: min x^2+y^2 s.t. x+y=1") {
    SmallProblem p = projection_problem();
    InteriorPointSolver solver;
    SolveResult r = solver.solve(p, (VectorXd(2) << 3.0, -7.0).finished());
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(r.x(0) == Catch::Approx(0.5).margin(1e-7));
    CHECK(r.x(1) == Catch::Approx(0.5).margin(1e-7));
}

TEST_CASE("inequality: min -x-y s.t. x^2+y^2 <= 1") {
    SmallProblem p = circle_problem();
    InteriorPointSolver solver;
    SolveResult r = solver.solve(p, VectorXd::Zero(2));
    REQUIRE(r.status == SolveStatus::Optimal);
    const double root = std::sqrt(2.0) / 2.0;  // analytic KKT point
    CHECK(r.x(0) == Catch::Approx(root).margin(1e-6));
    CHECK(r.x(1) == Catch::Approx(root).margin(1e-6));
    CHECK(r.y_ineq(0) > 0);
}

TEST_CASE("fixed variables become equality rows") {
    // min (x-3)^2 with x fixed to 2 by its bounds
    SmallProblem p = active_bound_problem();
    p.lb = VectorXd::Constant(1, 2.0);
    p.ub = VectorXd::Constant(1, 2.0);
    p.f = [](const VectorXd& x) { return (x(0) - 3) * (x(0) - 3); };
    p.g = [](const VectorXd& x) { return VectorXd::Constant(1, 2 * (x(0) - 3)).eval(); };
    InteriorPointSolver solver;
    SolveResult r = solver.solve(p, VectorXd::Constant(1, 0.0));
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(r.x(0) == Catch::Approx(2.0).margin(1e-9));
}

TEST_CASE("crossed bounds are infeasible") {
    SmallProblem p = active_bound_problem();
    p.lb = VectorXd::Constant(1, 2.0);
    p.ub = VectorXd::Constant(1, 1.0);
    InteriorPointSolver solver;
    SolveResult r = solver.solve(p, VectorXd::Constant(1, 0.0));
    CHECK(r.status == SolveStatus::Infeasible);
}

TEST_CASE("merit decreases across every accepted step") {
    SmallProblem p = circle_problem();
    SolverOptions opts;
    opts.collect_log = true;
    InteriorPointSolver solver(opts);
    SolveResult r = solver.solve(p, (VectorXd(2) << -0.5, 0.3).finished());
    REQUIRE(r.status == SolveStatus::Optimal);
    REQUIRE_FALSE(solver.log().empty());
    for (const IterLogEntry& e : solver.log()) {
        CHECK(e.merit_after <= e.merit_before + 1e-9 * std::max(1.0, std::abs(e.merit_before)));
    }
}

TEST_CASE("a warm start at the solution re-solves in at most 5 iterations") {
    SmallProblem p = circle_problem();
    InteriorPointSolver solver;
    SolveResult first = solver.solve(p, VectorXd::Zero(2));
    REQUIRE(first.status == SolveStatus::Optimal);

    WarmStart ws;
    ws.x = first.x;
    ws.y_eq = first.y_eq;
    ws.y_ineq = first.y_ineq;
    ws.z_lower = first.z_lower;
    ws.z_upper = first.z_upper;
    ws.mu = std::max(first.mu_final, 1e-9);
    SolveResult again = solver.solve(p, ws.x, &ws);
    REQUIRE(again.status == SolveStatus::Optimal);
    CHECK(again.iterations <= 5);
    CHECK(again.objective == Catch::Approx(first.objective).margin(1e-7));
}

TEST_CASE("solves are deterministic") {
    SmallProblem p = circle_problem();
    InteriorPointSolver solver;
    SolveResult a = solver.solve(p, (VectorXd(2) << 0.1, -0.2).finished());
    SolveResult b = solver.solve(p, (VectorXd(2) << 0.1, -0.2).finished());
    REQUIRE(a.status == SolveStatus::Optimal);
    CHECK(a.x == b.x);
    CHECK(a.iterations == b.iterations);
}

TEST_CASE("derivative checker") {
    SECTION("linear objective is exact for central differences") {
        SmallProblem p;
        p.n = 3;
        p.lb = VectorXd::Constant(3, -kInf);
        p.ub = VectorXd::Constant(3, kInf);
        p.f = [](const VectorXd& x) { return 2 * x(0) - 3 * x(1) + 0.25 * x(2); };
        p.g = [](const VectorXd&) { return (VectorXd(3) << 2, -3, 0.25).finished(); };
        p.hess = [](const VectorXd&, double, const VectorXd&, const VectorXd&) {
            return MatrixXd::Zero(3, 3).eval();
        };
        auto res = check_derivatives(p, VectorXd::Constant(3, 0.7), 1e-6);
        CHECK(res.max_rel_error <= 1e-10);
    }
    SECTION("a corrupted gradient entry is flagged at that entry") {
        SmallProblem p = projection_problem();
        p.g = [](const VectorXd& x) {
            VectorXd g = 2 * x;
            g(1) += 0.1;
            return g;
        };
        auto res = check_derivatives(p, (VectorXd(2) << 0.3, -0.4).finished(), 1e-6);
        CHECK(res.max_rel_error >= 1e-2);
        CHECK(res.where == "grad/x[1]");
    }
    SECTION("correct problems pass at 1e-5") {
        SmallProblem p = circle_problem();
        auto res = check_derivatives(p, (VectorXd(2) << 0.2, 0.1).finished(), 1e-6);
        CHECK(res.max_rel_error <= 1e-5);
    }
}

TEST_CASE("iteration limit is reported as MaxIter") {
    SmallProblem p = circle_problem();
    SolverOptions opts;
    opts.max_iter = 1;
    InteriorPointSolver solver(opts);
    SolveResult r = solver.solve(p, (VectorXd(2) << -0.9, -0.9).finished());
    CHECK(r.status == SolveStatus::MaxIter);
    CHECK(r.iterations == 1);
}
