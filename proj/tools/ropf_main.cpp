// ropf - radially partitioned AC optimal power flow.
//
// Subcommands: solve (centralized), partition (greedy radial partitioning),
// dica (distributed consensus iteration), check (derivative verification)
// and nlp-serve (reference responder for the external-solver pipe protocol).
//
// Exit codes: 0 success/converged, 2 iteration limit reached, 3 solver or
// subproblem failure, 4 parse/configuration errors.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ropf/acopf.hpp"
#include "ropf/dica.hpp"
#include "ropf/external_solver.hpp"
#include "ropf/ipm.hpp"
#include "ropf/matpower.hpp"
#include "ropf/network.hpp"
#include "ropf/partition.hpp"
#include "ropf/trace.hpp"

namespace {

struct RunConfig {
    std::string case_path;
    std::string command;
    double rho = 400.0;
    double eps = 1e-4;
    int max_iter = 2000;
    std::string start_rule = "lowest";
    unsigned seed = 0;
    std::string partition_file;
    std::string trace_path;
    std::string snapshot_path;
    std::string resume_path;
    std::string out_path;
    double reference_obj = 0;
    bool have_reference_obj = false;
    bool reference_solve = false;
    bool report_iters = false;
    std::string solver = "builtin";
    int threads = 1;
    double tol = 1e-8;
    int solver_max_iter = 500;
    double check_step = 1e-6;
    bool verbose = false;
};

ropf::Network load_network(const RunConfig& cfg) {
    return ropf::to_network(ropf::load_case(cfg.case_path));
}

ropf::StartRule start_rule_of(const RunConfig& cfg) {
    return cfg.start_rule == "random" ? ropf::StartRule::SeededRandom : ropf::StartRule::LowestLabel;
}

ropf::Partition make_partition(const ropf::Network& net, const ropf::Graph& graph,
                               const RunConfig& cfg) {
    if (!cfg.partition_file.empty()) {
        std::ifstream f(cfg.partition_file);
        if (!f) throw ropf::IoError("cannot open partition file: " + cfg.partition_file);
        nlohmann::json j;
        f >> j;
        return ropf::partition_from_json(graph, j);
    }
    return ropf::radial_partition(graph, start_rule_of(cfg), cfg.seed);
}

ropf::BackendFactory backend_factory(const RunConfig& cfg) {
    if (cfg.solver == "builtin") {
        ropf::SolverOptions so;
        so.tol = cfg.tol;
        so.max_iter = cfg.solver_max_iter;
        return [so] { return std::make_unique<ropf::BuiltinSolverBackend>(so); };
    }
    if (cfg.solver.rfind("external:", 0) == 0) {
        std::string cmd = cfg.solver.substr(9);
        if (cmd.empty()) throw ropf::Error("--solver external: needs a command");
        return [cmd] { return std::make_unique<ropf::ExternalSolverBackend>(cmd); };
    }
    throw ropf::Error("unknown solver backend: " + cfg.solver);
}

int cmd_solve(const RunConfig& cfg) {
    ropf::Network net = load_network(cfg);
    ropf::OpfModel model = ropf::build_centralized(net);
    ropf::OpfNlp nlp(model);
    ropf::SolverOptions so;
    so.tol = cfg.tol;
    so.max_iter = cfg.solver_max_iter;
    so.verbose = cfg.verbose;
    ropf::InteriorPointSolver solver(so);
    Eigen::Map<const Eigen::VectorXd> x0(model.start.data(), model.start.size());
    ropf::SolveResult res = solver.solve(nlp, x0);

    std::cout << "solve: status=" << ropf::to_string(res.status) << " objective=" << res.objective
              << " iterations=" << res.iterations << " kkt=" << res.kkt.max() << "\n";
    if (cfg.report_iters) std::cout << "centralized_iterations=" << res.iterations << "\n";
    if (!cfg.out_path.empty() && res.x.size() > 0) {
        nlohmann::json j;
        for (int i = 0; i < model.num_vars(); ++i) j[model.var_names[i]] = res.x(i);
        std::ofstream f(cfg.out_path);
        f << j.dump(1) << "\n";
    }
    if (res.status == ropf::SolveStatus::Optimal) return 0;
    return res.status == ropf::SolveStatus::MaxIter ? 2 : 3;
}

int cmd_partition(const RunConfig& cfg) {
    ropf::Network net = load_network(cfg);
    ropf::Graph graph = ropf::Graph::from_network(net);
    ropf::Partition part = make_partition(net, graph, cfg);
    auto rep = ropf::verify_radial(graph, part);
    nlohmann::json j = ropf::partition_to_json(graph, part);
    if (!cfg.out_path.empty()) {
        std::ofstream f(cfg.out_path);
        if (!f) throw ropf::IoError("cannot open output file: " + cfg.out_path);
        f << j.dump(1) << "\n";
    } else {
        std::cout << j.dump(1) << "\n";
    }
    std::cout << "partition: regions=" << part.num_regions() << " radial="
              << (rep.valid ? "yes" : "no") << "\n";
    for (const auto& v : rep.violations) std::cerr << "violation: " << v << "\n";
    return rep.valid ? 0 : 3;
}

int cmd_dica(const RunConfig& cfg) {
    ropf::Network net = load_network(cfg);
    ropf::Graph graph = ropf::Graph::from_network(net);
    ropf::Partition part = make_partition(net, graph, cfg);

    ropf::DicaParams params;
    params.rho = cfg.rho;
    params.eps = cfg.eps;
    params.max_iter = cfg.max_iter;
    params.threads = cfg.threads;
    params.solver.tol = cfg.tol;
    params.solver.max_iter = cfg.solver_max_iter;

    std::optional<ropf::ConsensusState> resume;
    if (!cfg.resume_path.empty()) {
        std::ifstream f(cfg.resume_path);
        if (!f) throw ropf::IoError("cannot open snapshot: " + cfg.resume_path);
        nlohmann::json j;
        f >> j;
        resume = ropf::consensus_from_json(j);
    }

    ropf::DicaResult res = ropf::run_dica(net, part, params, backend_factory(cfg),
                                          resume ? &*resume : nullptr);

    double reference = 0;
    bool have_reference = cfg.have_reference_obj;
    if (have_reference) reference = cfg.reference_obj;
    if (!have_reference && cfg.reference_solve) {
        ropf::OpfModel model = ropf::build_centralized(net);
        ropf::OpfNlp nlp(model);
        ropf::SolverOptions so;
        so.tol = cfg.tol;
        so.max_iter = cfg.solver_max_iter;
        ropf::InteriorPointSolver solver(so);
        Eigen::Map<const Eigen::VectorXd> x0(model.start.data(), model.start.size());
        ropf::SolveResult ref = solver.solve(nlp, x0);
        if (ref.status == ropf::SolveStatus::Optimal) {
            reference = ref.objective;
            have_reference = true;
        } else {
            std::cerr << "reference solve did not reach optimality; gap not reported\n";
        }
    }

    if (!cfg.trace_path.empty() && !res.trace.empty()) ropf::write_trace(res.trace, cfg.trace_path);
    if (!cfg.snapshot_path.empty()) {
        std::ofstream f(cfg.snapshot_path);
        if (!f) throw ropf::IoError("cannot open snapshot file: " + cfg.snapshot_path);
        f << ropf::consensus_to_json(res.state).dump(1) << "\n";
    }

    double first_avg = 0, all_avg = 0;
    if (!res.trace.empty()) {
        for (const auto& s : res.trace.front().regions) first_avg += s.solver_iters;
        first_avg /= static_cast<double>(res.trace.front().regions.size());
        long total = 0, count = 0;
        for (const auto& rec : res.trace)
            for (const auto& s : rec.regions) {
                total += s.solver_iters;
                ++count;
            }
        all_avg = count ? static_cast<double>(total) / static_cast<double>(count) : 0.0;
    }

    std::cout << "dica: status=" << ropf::to_string(res.status) << " iterations=" << res.iterations
              << " regions=" << part.num_regions() << " objective=" << res.objective;
    if (have_reference) std::cout << " gap=" << ropf::gap(res.objective, reference);
    std::cout << " avg_subproblem_iters_first=" << first_avg
              << " avg_subproblem_iters=" << all_avg << "\n";
    if (res.status == ropf::DicaStatus::SubproblemFailure)
        std::cerr << "failure: " << res.message << "\n";

    switch (res.status) {
        case ropf::DicaStatus::Converged: return 0;
        case ropf::DicaStatus::MaxIterReached: return 2;
        default: return 3;
    }
}

int cmd_check(const RunConfig& cfg) {
    ropf::Network net = load_network(cfg);
    ropf::OpfModel model = ropf::build_centralized(net);
    ropf::OpfNlp nlp(model);
    Eigen::Map<const Eigen::VectorXd> x0(model.start.data(), model.start.size());
    auto res = ropf::check_derivatives(nlp, x0, cfg.check_step);
    std::cout << "check: centralized max_rel_error=" << res.max_rel_error << " at " << res.where
              << "\n";
    double worst = res.max_rel_error;

    ropf::Graph graph = ropf::Graph::from_network(net);
    ropf::Partition part = make_partition(net, graph, cfg);
    ropf::ClosureSet cs = ropf::region_closures(graph, part);
    for (const auto& cl : cs.closures) {
        auto keys = ropf::region_shared_keys(cl, cs.shared);
        ropf::ConsensusParams cp;
        ropf::DicaParams dp;
        dp.rho = cfg.rho;
        for (const auto& key : keys) cp.terms.push_back({key, 0.5, 0.1, dp.rho_for(key.quantity)});
        ropf::RegionProblem rp = ropf::build_region(net, cl, cs.shared, cp);
        ropf::OpfNlp rnlp(rp.model);
        Eigen::Map<const Eigen::VectorXd> rx0(rp.model.start.data(), rp.model.start.size());
        auto rres = ropf::check_derivatives(rnlp, rx0, cfg.check_step);
        std::cout << "check: region " << cl.id << " max_rel_error=" << rres.max_rel_error << " at "
                  << rres.where << "\n";
        worst = std::max(worst, rres.max_rel_error);
    }
    std::cout << "check: worst=" << worst << "\n";
    return worst <= 1e-5 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    // region solves may run on threads; keep each BLAS call single-threaded
    setenv("OPENBLAS_NUM_THREADS", "1", 0);

    CLI::App app{"radially partitioned AC optimal power flow"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto add_case = [&](CLI::App* sub) {
        sub->add_option("--case", cfg.case_path, "MATPOWER case file")->required();
    };
    auto add_partition_opts = [&](CLI::App* sub) {
        sub->add_option("--start-rule", cfg.start_rule, "start rule: lowest|random")
            ->check(CLI::IsMember({"lowest", "random"}));
        sub->add_option("--seed", cfg.seed, "seed for the random start rule");
        sub->add_option("--partition-file", cfg.partition_file, "use an externally supplied partition");
    };

    CLI::App* solve = app.add_subcommand("solve", "solve the centralized problem");
    add_case(solve);
    solve->add_option("--tol", cfg.tol, "KKT tolerance");
    solve->add_option("--solver-max-iter", cfg.solver_max_iter, "interior-point iteration cap");
    solve->add_flag("--report-iters", cfg.report_iters, "print the iteration count on its own line");
    solve->add_option("--solution", cfg.out_path, "write the solution as JSON");
    solve->add_flag("--verbose", cfg.verbose, "per-iteration solver output on stderr");

    CLI::App* partition = app.add_subcommand("partition", "radially partition the network graph");
    add_case(partition);
    add_partition_opts(partition);
    partition->add_option("--out", cfg.out_path, "write the partition JSON here (default stdout)");

    CLI::App* dica = app.add_subcommand("dica", "run the distributed consensus iteration");
    add_case(dica);
    add_partition_opts(dica);
    dica->add_option("--rho", cfg.rho, "penalty parameter (rho_v = rho, others 2*rho)")
        ->required()
        ->check(CLI::PositiveNumber);
    dica->add_option("--eps", cfg.eps, "stopping tolerance")->check(CLI::PositiveNumber);
    dica->add_option("--max-iter", cfg.max_iter, "consensus iteration cap")
        ->check(CLI::PositiveNumber);
    dica->add_option("--trace", cfg.trace_path, "write the per-iteration trace CSV");
    dica->add_option("--snapshot", cfg.snapshot_path, "write the final consensus state as JSON");
    dica->add_option("--resume-from", cfg.resume_path, "resume from a consensus snapshot");
    auto* ref = dica->add_option("--reference-obj", cfg.reference_obj,
                                 "centralized objective for the optimality gap");
    dica->add_flag("--reference-solve", cfg.reference_solve,
                   "run a centralized reference solve for the gap");
    dica->add_option("--solver", cfg.solver, "builtin or external:<command>");
    dica->add_option("--threads", cfg.threads, "region solve threads (0 = hardware)");
    dica->add_option("--tol", cfg.tol, "subproblem KKT tolerance");
    dica->add_option("--solver-max-iter", cfg.solver_max_iter, "subproblem iteration cap");

    CLI::App* check = app.add_subcommand("check", "finite-difference derivative verification");
    add_case(check);
    add_partition_opts(check);
    check->add_option("--step", cfg.check_step, "finite-difference step");
    check->add_option("--rho", cfg.rho, "penalty used for the region models");

    CLI::App* serve = app.add_subcommand("nlp-serve", "solve one problem document from stdin");
    serve->add_option("--tol", cfg.tol, "KKT tolerance");
    serve->group("");  // hidden: protocol plumbing, not part of the normal surface

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_name() == "CallForHelp" ? 0 : 4;
    }
    cfg.have_reference_obj = ref->count() > 0;

    try {
        if (solve->parsed()) {
            cfg.command = "solve";
            return cmd_solve(cfg);
        }
        if (partition->parsed()) {
            cfg.command = "partition";
            return cmd_partition(cfg);
        }
        if (dica->parsed()) {
            cfg.command = "dica";
            return cmd_dica(cfg);
        }
        if (check->parsed()) {
            cfg.command = "check";
            return cmd_check(cfg);
        }
        if (serve->parsed()) {
            ropf::SolverOptions so;
            so.tol = cfg.tol;
            return ropf::serve_nlp_from_stdin(std::cin, std::cout, so);
        }
    } catch (const ropf::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 4;
}
