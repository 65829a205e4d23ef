#pragma once

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <csignal>
#include <mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "ropf/acopf.hpp"
#include "ropf/dica.hpp"
#include "ropf/ipm.hpp"

namespace ropf {

// The process-boundary solver protocol: the problem document goes to the
// child's stdin, the solution document comes back on stdout. The child must
// consume all of stdin before writing. Documents:
//
//   request:  { "variables": [{"name","lb","ub","start"}...],
//               "objective": {"constant", "terms":[{"var","quad","lin"}...]},
//               "flows":        [...], "balances": [...], "fixes": [...],
//               "line_limits":  [...], "angle_spreads": [...] }
//   response: { "status": "optimal"|..., "objective": f, "iterations": n,
//               "x": [...] }
//
// Infinite bounds are encoded as the strings "-inf"/"inf".

namespace detail {

inline nlohmann::json encode_bound(double b) {
    if (b == kInf) return "inf";
    if (b == -kInf) return "-inf";
    return b;
}

inline double decode_bound(const nlohmann::json& j) {
    if (j.is_string()) return j.get<std::string>() == "inf" ? kInf : -kInf;
    return j.get<double>();
}

}  // namespace detail

inline nlohmann::json opf_model_to_json(const OpfModel& m) {
    nlohmann::json vars = nlohmann::json::array();
    for (int i = 0; i < m.num_vars(); ++i) {
        vars.push_back({{"name", m.var_names[i]},
                        {"lb", detail::encode_bound(m.lb[i])},
                        {"ub", detail::encode_bound(m.ub[i])},
                        {"start", m.start[i]}});
    }
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : m.obj_terms) terms.push_back({{"var", t.var}, {"quad", t.quad}, {"lin", t.lin}});
    nlohmann::json flows = nlohmann::json::array();
    for (const auto& f : m.flows)
        flows.push_back({{"flow", f.flow},
                         {"v_a", f.v_a},
                         {"v_b", f.v_b},
                         {"th_a", f.th_a},
                         {"th_b", f.th_b},
                         {"c_self", f.c_self},
                         {"g", f.g},
                         {"b", f.b},
                         {"reactive", f.reactive}});
    nlohmann::json balances = nlohmann::json::array();
    for (const auto& b : m.balances)
        balances.push_back({{"v", b.v},
                            {"shunt", b.shunt},
                            {"demand", b.demand},
                            {"flows", b.flows},
                            {"gens", b.gens}});
    nlohmann::json fixes = nlohmann::json::array();
    for (const auto& fx : m.fixes) fixes.push_back({{"var", fx.var}, {"value", fx.value}});
    nlohmann::json limits = nlohmann::json::array();
    for (const auto& l : m.line_limits)
        limits.push_back({{"p", l.p}, {"q", l.q}, {"s_max", l.s_max}});
    nlohmann::json spreads = nlohmann::json::array();
    for (const auto& a : m.angle_spreads)
        spreads.push_back({{"th_a", a.th_a},
                           {"th_b", a.th_b},
                           {"lo", detail::encode_bound(a.lo)},
                           {"hi", detail::encode_bound(a.hi)}});
    return nlohmann::json{{"variables", std::move(vars)},
                          {"objective", {{"constant", m.obj_constant}, {"terms", std::move(terms)}}},
                          {"flows", std::move(flows)},
                          {"balances", std::move(balances)},
                          {"fixes", std::move(fixes)},
                          {"line_limits", std::move(limits)},
                          {"angle_spreads", std::move(spreads)}};
}

/// Rebuilds an evaluable model from the wire format (the layout is not part
/// of the protocol; the receiving side only needs the constraint data).
inline OpfModel opf_model_from_json(const nlohmann::json& j) {
    OpfModel m;
    for (const auto& v : j.at("variables")) {
        m.var_names.push_back(v.at("name").get<std::string>());
        m.lb.push_back(detail::decode_bound(v.at("lb")));
        m.ub.push_back(detail::decode_bound(v.at("ub")));
        m.start.push_back(v.at("start").get<double>());
    }
    m.obj_constant = j.at("objective").at("constant").get<double>();
    for (const auto& t : j.at("objective").at("terms"))
        m.obj_terms.push_back(
            {t.at("var").get<int>(), t.at("quad").get<double>(), t.at("lin").get<double>()});
    for (const auto& f : j.at("flows"))
        m.flows.push_back({f.at("flow").get<int>(), f.at("v_a").get<int>(), f.at("v_b").get<int>(),
                           f.at("th_a").get<int>(), f.at("th_b").get<int>(),
                           f.at("c_self").get<double>(), f.at("g").get<double>(),
                           f.at("b").get<double>(), f.at("reactive").get<bool>()});
    for (const auto& b : j.at("balances")) {
        BalanceConstraint bc;
        bc.v = b.at("v").get<int>();
        bc.shunt = b.at("shunt").get<double>();
        bc.demand = b.at("demand").get<double>();
        bc.flows = b.at("flows").get<std::vector<int>>();
        bc.gens = b.at("gens").get<std::vector<int>>();
        m.balances.push_back(std::move(bc));
    }
    for (const auto& fx : j.at("fixes"))
        m.fixes.push_back({fx.at("var").get<int>(), fx.at("value").get<double>()});
    for (const auto& l : j.at("line_limits"))
        m.line_limits.push_back({l.at("p").get<int>(), l.at("q").get<int>(), l.at("s_max").get<double>()});
    for (const auto& a : j.at("angle_spreads"))
        m.angle_spreads.push_back({a.at("th_a").get<int>(), a.at("th_b").get<int>(),
                                   detail::decode_bound(a.at("lo")), detail::decode_bound(a.at("hi"))});
    return m;
}

inline nlohmann::json solution_to_json(const SolveResult& r) {
    return nlohmann::json{{"status", to_string(r.status)},
                          {"objective", r.objective},
                          {"iterations", r.iterations},
                          {"x", std::vector<double>(r.x.data(), r.x.data() + r.x.size())},
                          {"message", r.message}};
}

inline SolveResult solution_from_json(const nlohmann::json& j) {
    SolveResult r;
    std::string st = j.at("status").get<std::string>();
    if (st == "optimal")
        r.status = SolveStatus::Optimal;
    else if (st == "max_iter")
        r.status = SolveStatus::MaxIter;
    else if (st == "infeasible")
        r.status = SolveStatus::Infeasible;
    else
        r.status = SolveStatus::NumericalFailure;
    r.objective = j.at("objective").get<double>();
    r.iterations = j.at("iterations").get<int>();
    auto x = j.at("x").get<std::vector<double>>();
    r.x = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
    if (j.contains("message")) r.message = j.at("message").get<std::string>();
    return r;
}

/// Runs `command` through /bin/sh, feeding `input` on stdin and returning its
/// stdout. Throws on spawn failure or a nonzero exit status.
inline std::string run_subprocess(const std::string& command, const std::string& input) {
    static std::once_flag sigpipe_once;
    std::call_once(sigpipe_once, [] { std::signal(SIGPIPE, SIG_IGN); });

    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0) throw IoError("pipe() failed");
    pid_t pid = fork();
    if (pid < 0) throw IoError("fork() failed");
    if (pid == 0) {
        dup2(to_child[0], STDIN_FILENO);
        dup2(from_child[1], STDOUT_FILENO);
        close(to_child[0]);
        close(to_child[1]);
        close(from_child[0]);
        close(from_child[1]);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);

    size_t off = 0;
    while (off < input.size()) {
        ssize_t n = ::write(to_child[1], input.data() + off, input.size() - off);
        if (n <= 0) break;
        off += static_cast<size_t>(n);
    }
    close(to_child[1]);

    std::string output;
    char buf[1 << 16];
    for (;;) {
        ssize_t n = ::read(from_child[0], buf, sizeof buf);
        if (n <= 0) break;
        output.append(buf, static_cast<size_t>(n));
    }
    close(from_child[0]);

    int status = 0;
    waitpid(pid, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
        throw IoError("external solver exited with status " + std::to_string(WEXITSTATUS(status)));
    if (off < input.size()) throw IoError("external solver closed its input early");
    return output;
}

/// Solver backend that ships each subproblem to an external command over a
/// child-process pipe. Warm starts are passed through the start values; the
/// returned iterate is accepted as-is (bit-exactness across backends is not
/// expected).
class ExternalSolverBackend final : public OpfSolverBackend {
  public:
    explicit ExternalSolverBackend(std::string command) : command_(std::move(command)) {}

    SolveResult solve(const OpfModel& model, const SolveResult* prev) override {
        nlohmann::json req;
        if (prev && prev->x.size() == static_cast<long>(model.start.size())) {
            OpfModel warmed = model;
            for (int i = 0; i < model.num_vars(); ++i) warmed.start[i] = prev->x(i);
            req = opf_model_to_json(warmed);
        } else {
            req = opf_model_to_json(model);
        }
        std::string out = run_subprocess(command_, req.dump());
        return solution_from_json(nlohmann::json::parse(out));
    }

  private:
    std::string command_;
};

/// Reference server for the protocol: reads one problem document from stdin,
/// solves it with the built-in method, writes the solution document to stdout.
/// Exposed by the CLI as the `nlp-serve` subcommand.
inline int serve_nlp_from_stdin(std::istream& in, std::ostream& out, SolverOptions opts = {}) {
    nlohmann::json req = nlohmann::json::parse(in);
    OpfModel model = opf_model_from_json(req);
    OpfNlp nlp(model);
    InteriorPointSolver solver(opts);
    Eigen::Map<const Eigen::VectorXd> x0(model.start.data(), model.start.size());
    SolveResult res = solver.solve(nlp, x0);
    out << solution_to_json(res).dump() << "\n";
    return res.status == SolveStatus::Optimal ? 0 : 1;
}

}  // namespace ropf
