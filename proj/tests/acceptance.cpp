// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset, e.g. `acceptance 3 7`.

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <string>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "oracles.hpp"
#include "rlcbs/cli.hpp"
#include "rlcbs/dryer.hpp"
#include "rlcbs/ga.hpp"
#include "rlcbs/parallel.hpp"
#include "rlcbs/policy.hpp"
#include "rlcbs/search.hpp"
#include "rlcbs/toy_env.hpp"

namespace {

using namespace rlcbs;

struct Outcome {
    bool pass = false;
    std::string detail;
};

const std::array<double, 11> kSfGrid = {0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75};

std::shared_ptr<const DryerParams> dryer_params() {
    static const auto params = std::make_shared<const DryerParams>(load_dryer_params(default_dryer_params_path()));
    return params;
}

/// Physics facts about sequences returned by the dryer solves, gathered for criterion 6.
struct ReturnedEpisode {
    ActionSequence actions;
    double speed_factor;
    double dbmc_init;
};

struct Shared {
    std::vector<ReturnedEpisode> returned;
    int max_refine_evaluations = 0;
    int solves = 0;
};
Shared g_shared;

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

// ─── 1 ──────────────────────────────────────────────

Outcome oracle_equivalence() {
    int matched = 0;
    int identical = 0;
    int infeasible_both = 0;
    std::string first_failure;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        ToyEnvSpec spec;
        spec.num_actions = 4;
        spec.horizon = 6;
        spec.num_states = 16;
        spec.seed = 100 + seed;
        spec.absorbing_state = seed % 3 == 0 ? 1 + static_cast<int>(seed % (spec.num_states - 1)) : -1;
        const ActionId must = static_cast<ActionId>(seed % 4);
        const ActionId capped = static_cast<ActionId>((seed + 1) % 4);
        const auto bundle = parse_constraint_specs(nlohmann::json::array(
            {{{"type", "min_count"}, {"actions", {must}}, {"n", 2}},
             {{"type", "max_count"}, {"actions", {capped}}, {"n", 1}}}));
        const auto brute = brute_force_optimum(spec, bundle);

        const auto env = std::make_shared<ToyEnv>(spec);
        EpisodeConfig episode;
        episode.max_modules = spec.horizon;
        SearchConfig config;
        config.n_b = 4096;  // |A|^T: every prefix survives
        config.max_length = spec.horizon;
        const auto result = rlcbs_solve(config, SearchProblem{std::make_shared<RandomPolicy>(4, seed), env, episode,
                                                              bundle, std::make_shared<RolloutCache>(nullptr)});
        bool ok = result.feasible == brute.found;
        if (ok && brute.found) {
            ok = same_bits(result.reward, brute.best_reward);
            // Independent check of the returned sequence.
            const auto n_must = std::count(result.actions.begin(), result.actions.end(), must);
            const auto n_capped = std::count(result.actions.begin(), result.actions.end(), capped);
            ok = ok && n_must >= 2 && n_capped <= 1;
            identical += result.actions == brute.best ? 1 : 0;
        } else if (ok) {
            ++infeasible_both;
        }
        matched += ok ? 1 : 0;
        if (!ok && first_failure.empty()) {
            first_failure = fmt::format(" first mismatch seed {}: rlcbs {} vs brute {}", seed, result.reward,
                                        brute.best_reward);
        }
    }
    return {matched == 20, fmt::format("{}/20 instances match the brute-force optimum ({} identical sequences, {} "
                                       "infeasible for both){}",
                                       matched, identical, infeasible_both, first_failure)};
}

// ─── 2 ──────────────────────────────────────────────

Outcome constraint_soundness() {
    const auto params = dryer_params();
    const auto env = std::make_shared<DryerEnv>(params);
    const auto bundle = dryer_constraints(true, true, true);
    auto cache = std::make_shared<RolloutCache>(std::make_shared<InMemoryStore>());
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    int episodes = 0;
    int feasible = 0;
    int checked = 0;
    int violations = 0;
    for (int i = 0; i < 200; ++i) {
        EpisodeConfig episode;
        episode.speed_factor = kSfGrid[rng() % kSfGrid.size()];
        episode.dbmc_init = 0.6 + 0.9 * u(rng);
        std::shared_ptr<const Policy> policy;
        if (i % 2 == 0) {
            policy = std::make_shared<HeuristicPolicy>(episode.dbmc_init, episode.dbmc_target);
        } else {
            policy = std::make_shared<MlpPolicy>(random_mlp_weights(5000 + i));
        }
        SearchConfig config;
        config.n_b = 1 + static_cast<int>(rng() % 2);
        config.include_greedy_seed = rng() % 2 == 0;
        config.refine = false;
        const auto result = rlcbs_solve(config, SearchProblem{policy, env, episode, bundle, cache});
        ++episodes;
        ++g_shared.solves;
        g_shared.max_refine_evaluations = std::max(g_shared.max_refine_evaluations, result.refine_evaluations);
        if (!result.feasible) {
            continue;
        }
        ++feasible;
        for (const auto& h : result.pool) {
            ++checked;
            const std::vector<int> seq(h.actions.begin(), h.actions.end());
            violations += oracle::check_design(seq).ok() ? 0 : 1;
        }
        g_shared.returned.push_back({result.actions, episode.speed_factor, episode.dbmc_init});
    }
    return {violations == 0 && feasible > 0,
            fmt::format("{} episodes, {} feasible, {} finished sequences replay-checked, {} violations", episodes,
                        feasible, checked, violations)};
}

// ─── 3 ──────────────────────────────────────────────

Outcome cache_complexity() {
    const auto rows = cmd_bench_cache(12, {2, 4, 8}, 8, 7);
    bool ok = true;
    std::string detail;
    for (const auto& r : rows) {
        const long long expected = r.cache_enabled ? oracle::cached_steps(r.horizon, r.n_b)
                                                   : oracle::uncached_replayed_steps(r.horizon, r.n_b);
        const bool serial = r.workers == 1;
        const bool row_ok = r.identical && (serial || !r.cache_enabled ? r.measured == expected
                                                                       : r.measured >= expected);
        ok = ok && row_ok;
        if (serial) {
            detail += fmt::format(" n_b={} {}={}/{}", r.n_b, r.cache_enabled ? "on" : "off", r.measured, expected);
        }
    }
    return {ok, "T=12 measured/expected:" + detail + " (8-worker runs identical)"};
}

// ─── 4 ──────────────────────────────────────────────

struct RolloutJob {
    int env_index;
    EpisodeConfig episode;
    ActionSequence prefix;
};

Outcome cache_equivalence() {
    std::vector<std::shared_ptr<const Environment>> protos;
    for (std::uint64_t s = 0; s < 4; ++s) {
        ToyEnvSpec spec;
        spec.num_actions = 3 + static_cast<int>(s);
        spec.horizon = 8;
        spec.num_states = 12;
        spec.seed = 40 + s;
        spec.absorbing_state = s == 3 ? 5 : -1;
        protos.push_back(std::make_shared<ToyEnv>(spec));
    }
    protos.push_back(std::make_shared<DryerEnv>(dryer_params()));
    const int dryer_index = static_cast<int>(protos.size()) - 1;

    std::mt19937_64 rng(77);
    std::vector<RolloutJob> jobs;
    for (int i = 0; i < 1000; ++i) {
        RolloutJob job;
        job.env_index = i % 25 == 0 ? dryer_index : static_cast<int>(rng() % dryer_index);
        const auto& env = *protos[job.env_index];
        if (job.env_index == dryer_index) {
            job.episode.speed_factor = 0.25;
            job.episode.dbmc_init = rng() % 2 == 0 ? 1.5 : 1.2;
            const int len = static_cast<int>(rng() % 3);
            for (int k = 0; k < len; ++k) {
                job.prefix.push_back(static_cast<ActionId>(rng() % 4 * 11 + 10 - rng() % 2));
            }
        } else {
            job.episode.dbmc_init = 1.0 + static_cast<double>(rng() % 3);
            const int len = static_cast<int>(rng() % 9);
            for (int k = 0; k < len; ++k) {
                job.prefix.push_back(static_cast<ActionId>(rng() % env.action_count()));
            }
        }
        jobs.push_back(std::move(job));
    }

    auto run_all = [&](RolloutCache& cache, int workers) {
        std::vector<RolloutResult> out(jobs.size());
        std::vector<std::vector<std::unique_ptr<Environment>>> envs(protos.size());
        for (std::size_t e = 0; e < protos.size(); ++e) {
            for (int w = 0; w < workers; ++w) {
                envs[e].push_back(protos[e]->clone());
            }
        }
        parallel_for_worker(jobs.size(), workers, [&](std::size_t i, int w) {
            out[i] = cache.rollout(*envs[jobs[i].env_index][w], jobs[i].episode, jobs[i].prefix);
        });
        return out;
    };

    RolloutCache uncached(nullptr);
    RolloutCache cached(std::make_shared<InMemoryStore>());
    RolloutCache cached_parallel(std::make_shared<InMemoryStore>());
    const auto ref = run_all(uncached, 1);
    const auto hot = run_all(cached, 1);
    const auto par = run_all(cached_parallel, 8);

    int mismatches = 0;
    int parallel_mismatches = 0;
    auto same = [](const RolloutResult& a, const RolloutResult& b) {
        return a.state == b.state && a.consumed == b.consumed && same_bits(a.status.reward, b.status.reward) &&
               same_bits(a.status.episode_return, b.status.episode_return) && a.status.done == b.status.done &&
               a.status.truncated == b.status.truncated;
    };
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        mismatches += same(ref[i], hot[i]) ? 0 : 1;
        parallel_mismatches += same(ref[i], par[i]) ? 0 : 1;
    }
    const auto stats = cached.stats();
    return {mismatches == 0 && parallel_mismatches == 0 && stats.hits > 0,
            fmt::format("1000 rollouts ({} dryer): {} cached mismatches, {} mismatches with 8 workers, cache hit "
                        "rate {:.3f}",
                        1000 / 25, mismatches, parallel_mismatches, stats.hit_rate())};
}

// ─── 5 ──────────────────────────────────────────────

Outcome greedy_dominance() {
    const auto env = std::make_shared<DryerEnv>(dryer_params());
    const auto bundle = dryer_constraints(false, false, true);
    auto cache = std::make_shared<RolloutCache>(std::make_shared<InMemoryStore>());
    int greedy_feasible = 0;
    int dominated = 0;
    int strictly_better = 0;
    std::string rows;
    for (double sf : kSfGrid) {
        EpisodeConfig episode;
        episode.speed_factor = sf;
        const auto policy = std::make_shared<HeuristicPolicy>(episode.dbmc_init, episode.dbmc_target);
        const auto greedy = greedy_decode(*policy, *env, episode, bundle);
        SearchConfig config;
        config.n_b = 2;
        config.include_greedy_seed = true;
        config.refine = true;
        const auto result = rlcbs_solve(config, SearchProblem{policy, env, episode, bundle, cache});
        ++g_shared.solves;
        g_shared.max_refine_evaluations = std::max(g_shared.max_refine_evaluations, result.refine_evaluations);
        if (result.feasible) {
            g_shared.returned.push_back({result.actions, sf, episode.dbmc_init});
        }
        if (greedy.feasible) {
            ++greedy_feasible;
            const bool ok = result.feasible && result.reward >= greedy.reward;
            dominated += ok ? 1 : 0;
            strictly_better += ok && result.reward > greedy.reward ? 1 : 0;
        }
        rows += fmt::format(" {:.2f}:{}/{}", sf, greedy.feasible ? fmt::format("{:.1f}", greedy.reward) : "-",
                            result.feasible ? fmt::format("{:.1f}", result.reward) : "-");
    }
    return {dominated == greedy_feasible,
            fmt::format("greedy feasible at {}/11 SF points, RLCBS >= greedy at {} of them ({} strictly); "
                        "SF:greedy/rlcbs{}",
                        greedy_feasible, dominated, strictly_better, rows)};
}

// ─── 6 ──────────────────────────────────────────────

Outcome physics_invariants() {
    const auto params = dryer_params();
    // Sweep at the fastest conveyor speed so no 12 x SJR run trips a guard before the end.
    EpisodeConfig sweep;
    sweep.speed_factor = 0.0;
    std::vector<double> finals;
    double max_mass_error = 0.0;
    bool sweep_clean = true;
    for (int ti = 0; ti < kTempLevelCount; ++ti) {
        const auto r = simulate_fixed(params, sweep, ActionSequence(12, encode_action(ModuleType::SJR, ti)));
        finals.push_back(r.final_state.mean_dbmc());
        max_mass_error = std::max(max_mass_error, r.max_mass_error);
        sweep_clean = sweep_clean && r.fault == PhysicsFault::none && r.final_state.module == 12;
    }
    bool monotone = true;
    for (std::size_t i = 1; i < finals.size(); ++i) {
        monotone = monotone && finals[i] <= finals[i - 1];
    }

    const ActionSequence hot(12, encode_action(ModuleType::SJR, 10));
    const auto coarse = simulate_fixed(params, sweep, hot, params->dt);
    const auto fine = simulate_fixed(params, sweep, hot, params->dt / 2.0);
    const double dt_change = std::abs(coarse.final_state.mean_dbmc() - fine.final_state.mean_dbmc());
    max_mass_error = std::max({max_mass_error, coarse.max_mass_error, fine.max_mass_error});

    // Replay every sequence returned by the searches above (or a small fresh set).
    if (g_shared.returned.empty()) {
        const auto env = std::make_shared<DryerEnv>(params);
        auto cache = std::make_shared<RolloutCache>(nullptr);
        for (double sf : {0.5, 0.75}) {
            EpisodeConfig episode;
            episode.speed_factor = sf;
            SearchConfig config;
            config.n_b = 2;
            config.refine = false;
            const auto r = rlcbs_solve(config, SearchProblem{std::make_shared<HeuristicPolicy>(), env, episode,
                                                             dryer_constraints(false, false, true), cache});
            if (r.feasible) {
                g_shared.returned.push_back({r.actions, sf, episode.dbmc_init});
            }
        }
    }
    int replayed = 0;
    int hot_nodes = 0;
    int not_done = 0;
    double max_temp = 0.0;
    for (const auto& ep : g_shared.returned) {
        DryerEnv env(params);
        EpisodeConfig episode;
        episode.speed_factor = ep.speed_factor;
        episode.dbmc_init = ep.dbmc_init;
        env.reset(episode);
        StepResult st = env.status();
        for (ActionId a : ep.actions) {
            st = env.step(a);
        }
        ++replayed;
        not_done += st.done && !st.truncated ? 0 : 1;
        hot_nodes += env.max_temp_seen() < params->boiling_point ? 0 : 1;
        max_temp = std::max(max_temp, env.max_temp_seen());
        max_mass_error = std::max(max_mass_error, env.max_mass_error());
    }

    const bool ok = monotone && sweep_clean && dt_change < 1e-4 && max_mass_error <= 1e-8 && hot_nodes == 0 &&
                    not_done == 0 && replayed > 0;
    return {ok, fmt::format("sweep 80..190 C final DBMC {:.4f} -> {:.4f} monotone={} guard-free={}; dt-halving "
                            "change {:.2e}; max mass error {:.2e}; {} returned episodes replayed, max node T {:.2f} "
                            "C, {} reached boiling, {} not done",
                            finals.front(), finals.back(), monotone, sweep_clean, dt_change, max_mass_error, replayed,
                            max_temp, hot_nodes, not_done)};
}

// ─── 7 ──────────────────────────────────────────────

Outcome reward_arithmetic() {
    const double done = dryer_reward(true, false, 800.0, 0.5);
    const double truncated = dryer_reward(false, true, 900.0, 0.5);
    const double ref_done = oracle::reward(true, false, 800.0, 855.7368);
    const double ref_trunc = oracle::reward(false, true, 900.0, 855.7368);
    const bool ok = std::abs(done - 55.7368) <= 1e-9 && std::abs(truncated + 1044.2632) <= 1e-9 &&
                    std::abs(done - ref_done) <= 1e-9 && std::abs(truncated - ref_trunc) <= 1e-9 &&
                    std::abs(q_sqp(0.5) - 855.7368) <= 1e-9;
    return {ok, fmt::format("done r = {:.10f}, truncated r = {:.10f}", done, truncated)};
}

// ─── 8 ──────────────────────────────────────────────

Outcome ga_sanity() {
    int zero_violation = 0;
    bool monotone = true;
    bool budget = true;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        GaConfig config;
        config.seed = seed;
        config.population = 32;
        config.generations = 100;
        config.genome_length = 8;
        const auto r = evolve(config, make_dep_count_evaluator(3), kActionCount);
        const std::vector<int> genome(r.best.genome.begin(), r.best.genome.end());
        const auto check = oracle::check_design(genome);
        zero_violation += r.feasible && check.dep >= 3 && r.best.eval.total_violation() == 0.0 ? 1 : 0;
        for (std::size_t g = 1; g < r.best_feasible_history.size(); ++g) {
            monotone = monotone && r.best_feasible_history[g] <= r.best_feasible_history[g - 1];
        }
        budget = budget && r.evaluations == 32LL * 101 && r.best_feasible_history.size() == 101;
    }
    return {zero_violation >= 9 && monotone && budget,
            fmt::format("{}/10 seeds return a zero-violation genome; best-feasible history monotone={}; "
                        "evaluations = pop x (gens + 1): {}",
                        zero_violation, monotone, budget)};
}

// ─── 9 ──────────────────────────────────────────────

Outcome refinement_budget() {
    const auto params = dryer_params();
    const auto env = std::make_shared<DryerEnv>(params);
    EpisodeConfig episode;
    episode.speed_factor = 0.25;
    episode.dbmc_init = 0.45;
    auto cache = std::make_shared<RolloutCache>(std::make_shared<InMemoryStore>());
    SearchProblem problem{std::make_shared<HeuristicPolicy>(episode.dbmc_init, episode.dbmc_target), env, episode,
                          ConstraintBundle{}, cache};

    // Four finished two-module hypotheses with distinct first modules: the widest refine.
    std::vector<Hypothesis> pool;
    auto scratch = env->clone();
    for (ActionId first : {encode_action(ModuleType::SJR, 10), encode_action(ModuleType::SJR, 9),
                           encode_action(ModuleType::PP, 10), encode_action(ModuleType::SJR, 8)}) {
        const ActionSequence seq = {first, encode_action(ModuleType::SJR, 10)};
        const auto r = cache->rollout(*scratch, episode, seq);
        pool.push_back({seq, r.status.episode_return, r.status.energy, 0.0, "beam"});
    }
    std::sort(pool.begin(), pool.end(), hypothesis_before);
    const auto before = cache->stats();
    const auto outcome = refine_last_action(pool, 4, problem, 1);
    const auto after = cache->stats();
    const long long rollouts = (after.hits + after.misses) - (before.hits + before.misses);

    const bool ok = outcome.evaluations <= 176 && rollouts == outcome.evaluations &&
                    g_shared.max_refine_evaluations <= 176;
    return {ok, fmt::format("worst-case pool: {} evaluations ({} rollouts counted by the cache); max over {} "
                            "search runs: {}",
                            outcome.evaluations, rollouts, g_shared.solves, g_shared.max_refine_evaluations)};
}

// ─── 10 ─────────────────────────────────────────────

std::vector<double> oracle_probs(const MlpWeights& w, const Observation& obs) {
    std::vector<double> x(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        x[i] = (obs[i] - w.normalizer.mean[i]) / std::sqrt(w.normalizer.var[i] + 1e-8);
    }
    auto h = oracle::matvec(w.layers[0].weights, w.layers[0].bias, x, 6, 64);
    for (double& v : h) {
        v = std::tanh(v);
    }
    h = oracle::matvec(w.layers[1].weights, w.layers[1].bias, h, 64, 64);
    for (double& v : h) {
        v = std::tanh(v);
    }
    const auto out = oracle::matvec(w.layers[2].weights, w.layers[2].bias, h, 64, 15);
    const auto p_temp = oracle::softmax({out.begin(), out.begin() + 11});
    const auto p_mod = oracle::softmax({out.begin() + 11, out.end()});
    std::vector<double> p(44);
    for (int m = 0; m < 4; ++m) {
        for (int t = 0; t < 11; ++t) {
            p[m * 11 + t] = p_mod[m] * p_temp[t];
        }
    }
    return p;
}

Outcome mlp_inference() {
    double worst = 0.0;
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto weights = random_mlp_weights(1000 + seed);
        const MlpPolicy policy(weights);
        const Observation obs = {0.25 + 0.5 * u(rng), 20 + 70 * u(rng), 20 + 70 * u(rng), 1.5 * u(rng),
                                 1.5 * u(rng),        u(rng)};
        const auto lp = policy.log_probs(obs);
        const auto ref = oracle_probs(weights, obs);
        for (int a = 0; a < 44; ++a) {
            worst = std::max(worst, std::abs(std::exp(lp[a]) - ref[a]));
        }
    }
    const MlpPolicy zero(zero_mlp_weights());
    const auto lp0 = zero.log_probs({0.5, 40, 40, 1.0, 1.0, 0.5});
    // Exact uniformity: all 44 log-probabilities carry the same bits. Leaving log space
    // costs at most a rounding step against 1/44.
    double zero_dev = 0.0;
    bool identical = true;
    for (double v : lp0) {
        zero_dev = std::max(zero_dev, std::abs(std::exp(v) - 1.0 / 44.0));
        identical = identical && same_bits(v, lp0.front());
    }
    return {worst <= 1e-6 && identical && zero_dev <= 1e-15,
            fmt::format("max |p - oracle| over 100 weight sets {:.2e}; zero weights: all entries bit-identical={}, "
                        "max |p - 1/44| {:.1e}",
                        worst, identical, zero_dev)};
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_level(spdlog::level::err);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"oracle equivalence", oracle_equivalence},   {"constraint soundness", constraint_soundness},
        {"cache complexity", cache_complexity},       {"cache equivalence", cache_equivalence},
        {"greedy dominance", greedy_dominance},       {"physics invariants", physics_invariants},
        {"reward arithmetic", reward_arithmetic},     {"GA baseline sanity", ga_sanity},
        {"refinement budget", refinement_budget},     {"MLP inference", mlp_inference},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        selected.insert(std::stoi(argv[i]));
    }
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && selected.count(id) == 0) {
            continue;
        }
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += o.pass ? 0 : 1;
        std::cout << fmt::format("[{}] {:>2}. {}: {} ({:.1f} s)", o.pass ? "PASS" : "FAIL", id, criteria[i].first,
                                 o.detail, secs)
                  << std::endl;
    }
    std::cout << (failed == 0 ? "all selected criteria passed" : fmt::format("{} criteria failed", failed))
              << std::endl;
    return failed == 0 ? 0 : 1;
}
