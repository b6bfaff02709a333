#include "rlcbs/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <tuple>

#include "rlcbs/parallel.hpp"

namespace rlcbs {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

CacheStats stats_delta(const CacheStats& after, const CacheStats& before) {
    CacheStats d;
    d.hits = after.hits - before.hits;
    d.misses = after.misses - before.misses;
    d.env_steps_simulated = after.env_steps_simulated - before.env_steps_simulated;
    d.env_steps_replayed = after.env_steps_replayed - before.env_steps_replayed;
    d.env_steps_saved = after.env_steps_saved - before.env_steps_saved;
    d.store_fallbacks = after.store_fallbacks - before.store_fallbacks;
    return d;
}

std::vector<std::unique_ptr<Environment>> worker_envs(const Environment& prototype, int workers) {
    std::vector<std::unique_ptr<Environment>> envs;
    for (int i = 0; i < std::max(1, workers); ++i) {
        envs.push_back(prototype.clone());
    }
    return envs;
}

void check_problem(const SearchProblem& problem) {
    if (!problem.policy || !problem.env || !problem.cache) {
        throw ConfigError("search problem needs a policy, an environment and a rollout cache");
    }
    if (problem.policy->action_count() != problem.env->action_count()) {
        throw ConfigError("policy and environment disagree on the action count");
    }
}

ActionSequence extended(const ActionSequence& prefix, ActionId a) {
    ActionSequence out;
    out.reserve(prefix.size() + 1);
    out = prefix;
    out.push_back(a);
    return out;
}

/// Candidate key without the bank: score desc, action asc, parent asc.
bool score_before(double sa, ActionId aa, int pa, double sb, ActionId ab, int pb) {
    if (sa != sb) {
        return sa > sb;
    }
    if (aa != ab) {
        return aa < ab;
    }
    return pa < pb;
}

}  // namespace

void SearchConfig::validate() const {
    if (n_b < 1) {
        throw ConfigError("beam count n_b must be >= 1");
    }
    if (candidate_multiplier < 1) {
        throw ConfigError("candidate multiplier must be >= 1");
    }
    if (max_length < 1) {
        throw ConfigError("max_length must be >= 1");
    }
    if (workers < 1) {
        throw ConfigError("workers must be >= 1");
    }
}

// ─── Proposal and allocation ─────────────────────────

bool candidate_before(const Candidate& a, const Candidate& b) {
    return std::tie(b.score, a.bank, a.action, a.parent) < std::tie(a.score, b.bank, b.action, b.parent);
}

std::vector<Candidate> propose_candidates(const std::vector<Beam>& beams, const BeamLogProbs& logps, int n_b,
                                          int candidate_multiplier) {
    if (logps.size() != beams.size()) {
        throw std::invalid_argument("one log-prob vector per beam required");
    }
    struct Raw {
        int parent;
        ActionId action;
        double score;
    };
    std::vector<Raw> all;
    for (std::size_t b = 0; b < beams.size(); ++b) {
        if (!logps[b]) {
            continue;
        }
        const auto& lp = *logps[b];
        for (ActionId a = 0; a < static_cast<ActionId>(lp.size()); ++a) {
            if (lp[a] != kNegInf) {
                all.push_back({static_cast<int>(b), a, accumulate_score(beams[b].score, std::min(lp[a], 0.0))});
            }
        }
    }
    const std::size_t group_a = std::min(all.size(), static_cast<std::size_t>(candidate_multiplier) * n_b);
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(group_a), all.end(),
                      [](const Raw& x, const Raw& y) {
                          return score_before(x.score, x.action, x.parent, y.score, y.action, y.parent);
                      });

    std::set<std::pair<int, ActionId>> seen;
    std::vector<Candidate> out;
    auto add = [&](int parent, ActionId a, double score) {
        if (!seen.insert({parent, a}).second) {
            return;
        }
        Candidate c;
        c.parent = parent;
        c.action = a;
        c.score = score;
        c.constraints = beams[parent].constraints;
        c.constraints.update(a);
        c.bank = c.constraints.completed_steps();
        out.push_back(std::move(c));
    };
    for (std::size_t i = 0; i < group_a; ++i) {
        add(all[i].parent, all[i].action, all[i].score);
    }
    for (std::size_t b = 0; b < beams.size(); ++b) {
        if (!logps[b]) {
            continue;
        }
        const auto& lp = *logps[b];
        for (ActionId a : beams[b].constraints.advance()) {
            if (a >= 0 && a < static_cast<ActionId>(lp.size()) && lp[a] != kNegInf) {
                add(static_cast<int>(b), a, accumulate_score(beams[b].score, std::min(lp[a], 0.0)));
            }
        }
    }
    return out;
}

std::vector<Candidate> allocate_banks(std::vector<Candidate> candidates, int n_b) {
    std::sort(candidates.begin(), candidates.end(), candidate_before);
    if (static_cast<int>(candidates.size()) <= n_b) {
        return candidates;
    }
    std::map<int, std::vector<std::size_t>, std::greater<>> banks;  // most advanced first
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        banks[candidates[i].bank].push_back(i);  // already in score order
    }
    const int bank_count = static_cast<int>(banks.size());
    std::vector<bool> taken(candidates.size(), false);
    int used = 0;
    int rank = 0;
    for (const auto& [bank, members] : banks) {
        const int quota = n_b / bank_count + (rank < n_b % bank_count ? 1 : 0);
        for (int j = 0; j < quota && j < static_cast<int>(members.size()); ++j) {
            taken[members[j]] = true;
            ++used;
        }
        ++rank;
    }
    for (std::size_t i = 0; i < candidates.size() && used < n_b; ++i) {
        if (!taken[i]) {
            taken[i] = true;
            ++used;
        }
    }
    std::vector<Candidate> out;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (taken[i]) {
            out.push_back(std::move(candidates[i]));
        }
    }
    return out;
}

bool hypothesis_before(const Hypothesis& a, const Hypothesis& b) {
    if (a.reward != b.reward) {
        return a.reward > b.reward;
    }
    return a.actions < b.actions;
}

bool satisfies_constraints(const ConstraintBundle& constraints, const ActionSequence& actions, int action_count) {
    if (!sequence_allowed(constraints.processors, actions, action_count)) {
        return false;
    }
    return ConstraintListState::replay(constraints.positive, actions).fulfilled();
}

// ─── Greedy ──────────────────────────────────────────

namespace {

GreedyResult greedy_impl(const Policy& policy, const Environment& prototype, const EpisodeConfig& episode,
                         const ConstraintBundle& constraints, int max_length, RolloutCache* cache) {
    const auto start = Clock::now();
    GreedyResult out;
    auto env = prototype.clone();
    env->reset(episode);
    StepResult status = env->status();
    ConstraintListState cstate(constraints.positive);
    while (static_cast<int>(out.actions.size()) < max_length && !status.terminal()) {
        const auto lp = process_logits(constraints.processors, out.actions, policy.log_probs(status.observation));
        if (!lp) {
            out.dead_end = true;
            break;
        }
        const auto best = std::max_element(lp->begin(), lp->end());  // first maximum = lowest id
        const auto a = static_cast<ActionId>(best - lp->begin());
        out.actions.push_back(a);
        cstate.update(a);
        status = cache != nullptr ? cache->rollout(*env, episode, out.actions).status : env->step(a);
    }
    out.energy = status.energy;
    out.failed = status.failed;
    out.feasible = status.done && !status.truncated && !out.dead_end;
    out.constraints_met = cstate.fulfilled();
    out.reward = (out.dead_end || status.failed || !status.terminal()) ? kNegInf : status.episode_return;
    out.wall_time_s = seconds_since(start);
    return out;
}

}  // namespace

GreedyResult greedy_decode(const Policy& policy, const Environment& env_prototype, const EpisodeConfig& episode,
                           const ConstraintBundle& constraints, int max_length) {
    return greedy_impl(policy, env_prototype, episode, constraints, max_length, nullptr);
}

// ─── Refinement ──────────────────────────────────────

RefineOutcome refine_last_action(const std::vector<Hypothesis>& pool, int top_k, const SearchProblem& problem,
                                 int workers) {
    check_problem(problem);
    RefineOutcome out;
    const int action_count = problem.env->action_count();
    std::set<ActionSequence> seen;
    for (const auto& h : pool) {
        seen.insert(h.actions);
    }
    std::vector<ActionSequence> jobs;
    for (int k = 0; k < top_k && k < static_cast<int>(pool.size()); ++k) {
        const auto& base = pool[k].actions;
        if (base.empty()) {
            continue;
        }
        const ActionSequence prefix(base.begin(), base.end() - 1);
        for (ActionId a = 0; a < action_count; ++a) {
            if (a == base.back()) {
                continue;
            }
            ActionSequence variant = extended(prefix, a);
            if (seen.count(variant) != 0) {
                continue;
            }
            if (!action_allowed(problem.constraints.processors, prefix, a, action_count)) {
                continue;
            }
            if (!ConstraintListState::replay(problem.constraints.positive, variant).fulfilled()) {
                continue;
            }
            seen.insert(variant);
            jobs.push_back(std::move(variant));
        }
    }
    out.evaluations = static_cast<int>(jobs.size());
    auto envs = worker_envs(*problem.env, workers);
    std::vector<RolloutResult> results(jobs.size());
    parallel_for_worker(jobs.size(), workers, [&](std::size_t i, int w) {
        results[i] = problem.cache->rollout(*envs[w], problem.episode, jobs[i]);
    });
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto& r = results[i];
        if (r.consumed == static_cast<int>(jobs[i].size()) && r.status.done && !r.status.truncated) {
            out.added.push_back(Hypothesis{jobs[i], r.status.episode_return, r.status.energy, 0.0, "refine"});
        }
    }
    return out;
}

// ─── Search drivers ──────────────────────────────────

namespace {

struct DepthOutcome {
    std::vector<Beam> live;
    std::vector<Hypothesis> finished;
};

/// Rolls out the selected extensions and sorts them into live / finished / dropped.
DepthOutcome step_beams(const std::vector<Beam>& beams, const std::vector<Candidate>& selected,
                        const SearchProblem& problem, std::vector<std::unique_ptr<Environment>>& envs,
                        int workers) {
    std::vector<ActionSequence> seqs(selected.size());
    for (std::size_t i = 0; i < selected.size(); ++i) {
        seqs[i] = extended(beams[selected[i].parent].actions, selected[i].action);
    }
    std::vector<RolloutResult> results(selected.size());
    parallel_for_worker(selected.size(), workers, [&](std::size_t i, int w) {
        results[i] = problem.cache->rollout(*envs[w], problem.episode, seqs[i]);
    });
    DepthOutcome out;
    for (std::size_t i = 0; i < selected.size(); ++i) {
        const auto& r = results[i];
        const auto& st = r.status;
        if (r.consumed != static_cast<int>(seqs[i].size()) || st.failed || st.truncated) {
            continue;
        }
        if (st.done) {
            if (selected[i].constraints.fulfilled()) {
                out.finished.push_back(Hypothesis{seqs[i], st.episode_return, st.energy, selected[i].score, "beam"});
            }
            continue;
        }
        out.live.push_back(Beam{std::move(seqs[i]), selected[i].score, selected[i].constraints, st});
    }
    return out;
}

Beam root_beam(const SearchProblem& problem, Environment& env) {
    env.reset(problem.episode);
    return Beam{{}, 0.0, ConstraintListState(problem.constraints.positive), env.status()};
}

void finish(SolveResult& result, std::vector<Hypothesis> pool, const SearchProblem& problem) {
    std::sort(pool.begin(), pool.end(), hypothesis_before);
    result.pool = std::move(pool);
    if (result.pool.empty()) {
        result.feasible = false;
        return;
    }
    const auto& best = result.pool.front();
    result.feasible = true;
    result.actions = best.actions;
    result.reward = best.reward;
    result.energy = best.energy;
    result.source = best.source;
    for (ActionId a : best.actions) {
        result.labels.push_back(problem.env->action_label(a));
    }
}

}  // namespace

SolveResult rlcbs_solve(const SearchConfig& config, const SearchProblem& problem) {
    config.validate();
    check_problem(problem);
    const auto start = Clock::now();
    const CacheStats stats_before = problem.cache->stats();
    SolveResult result;
    result.n_b = config.n_b;

    auto envs = worker_envs(*problem.env, config.workers);
    const int bank_count = ConstraintListState(problem.constraints.positive).total_steps() + 1;

    if (config.include_greedy_seed) {
        result.greedy = greedy_impl(*problem.policy, *problem.env, problem.episode, problem.constraints,
                                    config.max_length, problem.cache.get());
    }

    std::vector<Beam> live = {root_beam(problem, *envs[0])};
    std::vector<Hypothesis> pool;
    for (int depth = 0; depth < config.max_length && !live.empty(); ++depth) {
        std::vector<Observation> obs;
        obs.reserve(live.size());
        for (const auto& b : live) {
            obs.push_back(b.status.observation);
        }
        const auto raw = log_probs_batch(*problem.policy, obs, config.workers);
        BeamLogProbs processed(live.size());
        for (std::size_t i = 0; i < live.size(); ++i) {
            processed[i] = process_logits(problem.constraints.processors, live[i].actions, raw[i]);
        }
        auto candidates = propose_candidates(live, processed, config.n_b, config.candidate_multiplier);
        if (candidates.empty()) {
            break;
        }
        const auto selected = allocate_banks(std::move(candidates), config.n_b);
        std::vector<int> occupancy(bank_count, 0);
        for (const auto& c : selected) {
            ++occupancy[std::min(c.bank, bank_count - 1)];
        }
        result.bank_history.push_back(std::move(occupancy));

        auto outcome = step_beams(live, selected, problem, envs, config.workers);
        for (auto& h : outcome.finished) {
            pool.push_back(std::move(h));
        }
        live = std::move(outcome.live);
    }

    if (result.greedy && result.greedy->feasible && result.greedy->constraints_met &&
        sequence_allowed(problem.constraints.processors, result.greedy->actions, problem.env->action_count())) {
        const bool present = std::any_of(pool.begin(), pool.end(),
                                         [&](const Hypothesis& h) { return h.actions == result.greedy->actions; });
        if (!present) {
            pool.push_back(Hypothesis{result.greedy->actions, result.greedy->reward, result.greedy->energy, 0.0,
                                      "greedy"});
        }
    }
    std::sort(pool.begin(), pool.end(), hypothesis_before);

    if (config.refine && !pool.empty()) {
        auto refined = refine_last_action(pool, config.refine_top_k(), problem, config.workers);
        result.refine_evaluations = refined.evaluations;
        for (auto& h : refined.added) {
            pool.push_back(std::move(h));
        }
    }

    if (config.verify) {
        for (const auto& h : pool) {
            if (!satisfies_constraints(problem.constraints, h.actions, problem.env->action_count())) {
                throw std::logic_error("finished hypothesis violates a registered constraint");
            }
        }
    }
    finish(result, std::move(pool), problem);
    result.cache = stats_delta(problem.cache->stats(), stats_before);
    result.wall_time_s = seconds_since(start);
    return result;
}

SolveResult beam_search(const SearchConfig& config, const SearchProblem& problem) {
    config.validate();
    check_problem(problem);
    const auto start = Clock::now();
    const CacheStats stats_before = problem.cache->stats();
    SolveResult result;
    result.n_b = config.n_b;
    auto envs = worker_envs(*problem.env, config.workers);
    const int action_count = problem.env->action_count();

    std::vector<Beam> live = {root_beam(problem, *envs[0])};
    std::vector<Hypothesis> pool;
    for (int depth = 0; depth < config.max_length && !live.empty(); ++depth) {
        struct Ext {
            int parent;
            ActionId action;
            double score;
        };
        std::vector<Ext> exts;
        for (std::size_t b = 0; b < live.size(); ++b) {
            const auto lp = problem.policy->log_probs(live[b].status.observation);
            for (ActionId a = 0; a < action_count; ++a) {
                if (lp[a] != kNegInf) {
                    exts.push_back({static_cast<int>(b), a, live[b].score + std::min(lp[a], 0.0)});
                }
            }
        }
        std::sort(exts.begin(), exts.end(), [](const Ext& x, const Ext& y) {
            return score_before(x.score, x.action, x.parent, y.score, y.action, y.parent);
        });
        if (static_cast<int>(exts.size()) > config.n_b) {
            exts.resize(config.n_b);
        }
        std::vector<Candidate> selected;
        for (const auto& e : exts) {
            Candidate c;
            c.parent = e.parent;
            c.action = e.action;
            c.score = e.score;
            selected.push_back(c);
        }
        auto outcome = step_beams(live, selected, problem, envs, config.workers);
        for (auto& h : outcome.finished) {
            pool.push_back(std::move(h));
        }
        live = std::move(outcome.live);
    }
    finish(result, std::move(pool), problem);
    result.cache = stats_delta(problem.cache->stats(), stats_before);
    result.wall_time_s = seconds_since(start);
    return result;
}

nlohmann::json SolveResult::to_json() const {
    auto number_or_null = [&](double v) { return feasible && std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); };
    nlohmann::json j = {{"feasible", feasible},
                        {"actions", labels},
                        {"action_ids", actions},
                        {"reward_kj_per_m2", number_or_null(reward)},
                        {"energy_kj_per_m2", number_or_null(energy)},
                        {"n_modules", n_modules()},
                        {"n_b", n_b},
                        {"source", source},
                        {"env_steps_simulated", cache.env_steps_simulated},
                        {"cache_hit_rate", cache.hit_rate()},
                        {"cache", cache.to_json()},
                        {"refine_evaluations", refine_evaluations},
                        {"bank_history", bank_history},
                        {"timing", {{"wall_time_s", wall_time_s}}}};
    if (greedy) {
        j["greedy"] = {{"actions", greedy->actions},
                       {"feasible", greedy->feasible},
                       {"constraints_met", greedy->constraints_met},
                       {"reward_kj_per_m2", std::isfinite(greedy->reward) ? nlohmann::json(greedy->reward)
                                                                          : nlohmann::json()}};
        j["timing"]["greedy_wall_time_s"] = greedy->wall_time_s;
    }
    return j;
}

}  // namespace rlcbs
