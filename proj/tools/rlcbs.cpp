#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "rlcbs/cli.hpp"

namespace {

using rlcbs::ConfigError;
using rlcbs::RunConfig;

struct SolveFlags {
    std::string config_path;
    std::vector<std::string> methods;
    std::string environment;
    std::vector<double> sfs;
    std::vector<int> n_bs;
    int workers = 0;
    std::int64_t seed = -1;
    std::string out;
    std::string cache;
    std::string policy;
    std::string weights;
    int max_length = 0;
    bool no_greedy_seed = false;
    bool no_refine = false;
    bool ir = false;
    bool verify = false;
    bool traces = false;
};

RunConfig build_config(const SolveFlags& f) {
    RunConfig c = f.config_path.empty() ? RunConfig{} : rlcbs::load_run_config(f.config_path);
    if (!f.methods.empty()) {
        c.methods = f.methods;
    }
    if (!f.environment.empty()) {
        c.environment = f.environment;
    }
    if (!f.sfs.empty()) {
        c.speed_factors = f.sfs;
    }
    if (!f.n_bs.empty()) {
        c.n_b_schedule = f.n_bs;
    }
    if (f.workers > 0) {
        c.workers = f.workers;
    }
    if (f.seed >= 0) {
        c.seed = static_cast<std::uint64_t>(f.seed);
    }
    if (!f.out.empty()) {
        c.output_dir = f.out;
    }
    if (f.cache == "none" || f.cache == "memory") {
        c.cache = {{"backend", f.cache}};
    } else if (!f.cache.empty()) {
        c.cache = {{"backend", "remote"}, {"address", f.cache}};
    }
    if (!f.policy.empty()) {
        c.policy = {{"kind", f.policy}};
    }
    if (!f.weights.empty()) {
        c.policy = {{"kind", "mlp"}, {"weights", f.weights}};
    }
    if (f.max_length > 0) {
        c.max_length = f.max_length;
    }
    c.include_greedy_seed = c.include_greedy_seed && !f.no_greedy_seed;
    c.refine = c.refine && !f.no_refine;
    c.episode.ir_enabled = c.episode.ir_enabled || f.ir;
    c.verify = c.verify || f.verify;
    c.write_traces = c.write_traces || f.traces;
    return c;
}

void print_record(const nlohmann::json& r) {
    const auto sf = r["speed_factor"].is_number() ? fmt::format("{:.3f}", r["speed_factor"].get<double>()) : "-";
    const auto n_b = r.contains("n_b") ? std::to_string(r["n_b"].get<int>()) : "-";
    const auto reward =
        r.contains("reward_kj_per_m2") && r["reward_kj_per_m2"].is_number()
            ? fmt::format("{:.4f}", r["reward_kj_per_m2"].get<double>())
            : (r.contains("reward") && r["reward"].is_number() ? fmt::format("{:.6f}", r["reward"].get<double>())
                                                               : "infeasible");
    std::string actions;
    for (const auto& a : r.value("actions", nlohmann::json::array())) {
        actions += (actions.empty() ? "" : " ") + a.get<std::string>();
    }
    std::cout << fmt::format("{:<6} sf={:<6} n_b={:<4} R={:<12} {}\n", r.value("method", ""), sf, n_b, reward,
                             actions);
}

int run(int argc, char** argv) {
    CLI::App app{"Policy-guided constrained beam search for sequential design problems"};
    app.require_subcommand(1);
    std::string log_level = "warn";
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

    SolveFlags sf;
    auto* solve = app.add_subcommand("solve", "Run the configured methods over the SF grid and beam schedule");
    solve->add_option("-c,--config", sf.config_path, "JSON run config")->check(CLI::ExistingFile);
    solve->add_option("-m,--method", sf.methods, "rlcbs, greedy, ga, brute (repeatable)");
    solve->add_option("--env", sf.environment, "dryer or toy");
    solve->add_option("--sf", sf.sfs, "speed factors")->delimiter(',');
    solve->add_option("--nb", sf.n_bs, "beam schedule, strictly increasing")->delimiter(',');
    solve->add_option("-j,--workers", sf.workers, "worker threads");
    solve->add_option("--seed", sf.seed, "random seed");
    solve->add_option("-o,--out", sf.out, "output directory for result JSON");
    solve->add_option("--cache", sf.cache, "memory, none or host:port of rlcbs_kvserver");
    solve->add_option("--policy", sf.policy, "uniform, random, heuristic, mlp, dp_oracle");
    solve->add_option("--weights", sf.weights, "MLP weight file (implies --policy mlp)");
    solve->add_option("--max-length", sf.max_length, "maximum sequence length");
    solve->add_flag("--no-greedy-seed", sf.no_greedy_seed, "do not seed the pool with the greedy trace");
    solve->add_flag("--no-refine", sf.no_refine, "skip last-action refinement");
    solve->add_flag("--ir", sf.ir, "enable the infrared emitters");
    solve->add_flag("--verify", sf.verify, "replay-check every finished hypothesis");
    solve->add_flag("--traces", sf.traces, "write nodal trace CSVs for the best sequences");

    std::vector<std::string> compare_dirs;
    std::string compare_out;
    auto* compare = app.add_subcommand("compare", "Tabulate result directories as CSV");
    compare->add_option("dirs", compare_dirs, "result directories");
    compare->add_option("-o,--out", compare_out, "CSV path (stdout when omitted)");

    int bench_t = 12;
    std::vector<int> bench_nb = {2, 4, 8};
    int bench_workers = 8;
    std::uint64_t bench_seed = 1;
    auto* bench = app.add_subcommand("bench-cache", "Measure simulated steps against the closed forms");
    bench->add_option("-T,--horizon", bench_t, "sequence length")->check(CLI::Range(1, rlcbs::kToyMaxHorizon));
    bench->add_option("--nb", bench_nb, "beam widths")->delimiter(',');
    bench->add_option("-j,--workers", bench_workers, "parallel worker count to compare against serial");
    bench->add_option("--seed", bench_seed, "toy environment seed");

    std::string brute_config;
    rlcbs::ToyEnvSpec brute_spec;
    std::string brute_constraints;
    auto* brute = app.add_subcommand("brute", "Exhaustive optimum on the toy environment");
    brute->add_option("-c,--config", brute_config, "JSON run config (uses its toy and constraints)")
        ->check(CLI::ExistingFile);
    brute->add_option("--actions", brute_spec.num_actions, "action count");
    brute->add_option("--horizon", brute_spec.horizon, "horizon");
    brute->add_option("--states", brute_spec.num_states, "state count");
    brute->add_option("--seed", brute_spec.seed, "table seed");
    brute->add_option("--constraints", brute_constraints, "constraint specs as a JSON string");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? rlcbs::kExitOk : rlcbs::kExitConfig;
    }
    spdlog::set_level(spdlog::level::from_str(log_level));

    if (solve->parsed()) {
        const auto summary = rlcbs::cmd_solve(build_config(sf));
        for (const auto& r : summary.records) {
            print_record(r);
        }
        return summary.exit_code();
    }
    if (compare->parsed()) {
        const auto csv = rlcbs::compare_csv(rlcbs::load_records({compare_dirs.begin(), compare_dirs.end()}));
        if (compare_out.empty()) {
            std::cout << csv;
        } else {
            std::ofstream(compare_out) << csv;
        }
        return rlcbs::kExitOk;
    }
    if (bench->parsed()) {
        const auto rows = rlcbs::cmd_bench_cache(bench_t, bench_nb, bench_workers, bench_seed);
        std::cout << fmt::format("{:>3} {:>4} {:>7} {:>5} {:>9} {:>11} {:>9}\n", "T", "n_b", "workers", "cache",
                                 "measured", "theoretical", "identical");
        for (const auto& r : rows) {
            std::cout << fmt::format("{:>3} {:>4} {:>7} {:>5} {:>9} {:>11} {:>9}\n", r.horizon, r.n_b, r.workers,
                                     r.cache_enabled ? "on" : "off", r.measured, r.theoretical,
                                     r.identical ? "yes" : "no");
        }
        return rlcbs::kExitOk;
    }
    if (brute->parsed()) {
        auto spec = brute_spec;
        nlohmann::json constraints = nlohmann::json::array();
        if (!brute_config.empty()) {
            const auto c = rlcbs::load_run_config(brute_config);
            spec = c.toy;
            if (!c.constraints.is_null()) {
                constraints = c.constraints;
            }
        }
        if (!brute_constraints.empty()) {
            try {
                constraints = nlohmann::json::parse(brute_constraints);
            } catch (const nlohmann::json::parse_error& e) {
                throw ConfigError(std::string("--constraints is not valid JSON: ") + e.what());
            }
        }
        spec.validate();
        const auto result = rlcbs::cmd_brute(spec, constraints);
        std::cout << result.dump(2) << '\n';
        return result.value("feasible", false) ? rlcbs::kExitOk : rlcbs::kExitInfeasible;
    }
    return rlcbs::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return rlcbs::kExitConfig;
    } catch (const rlcbs::EnvironmentFailure& e) {
        std::cerr << "environment failure: " << e.what() << '\n';
        return rlcbs::kExitEnvironment;
    } catch (const rlcbs::StateFormatError& e) {
        std::cerr << "environment failure: " << e.what() << '\n';
        return rlcbs::kExitEnvironment;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
