#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlcbs/cache.hpp"
#include "rlcbs/constraints.hpp"
#include "rlcbs/environment.hpp"
#include "rlcbs/policy.hpp"

namespace rlcbs {

struct SearchConfig {
    int n_b = 4;
    int candidate_multiplier = 2;
    bool include_greedy_seed = true;
    bool refine = true;
    int max_length = 12;
    int workers = 1;
    bool verify = false;  // replay-check every finished hypothesis (throws on violation)

    [[nodiscard]] int refine_top_k() const { return n_b <= 4 ? 1 : 4; }
    void validate() const;
};

/// Everything a search needs besides its own settings. The prototype env is cloned once
/// per worker; the cache is shared.
struct SearchProblem {
    std::shared_ptr<const Policy> policy;
    std::shared_ptr<const Environment> env;
    EpisodeConfig episode;
    ConstraintBundle constraints;
    std::shared_ptr<RolloutCache> cache;
};

struct Beam {
    ActionSequence actions;
    double score = 0.0;  // cumulative log-probability
    ConstraintListState constraints;
    StepResult status;
};

struct Candidate {
    int parent = 0;
    ActionId action = 0;
    double score = 0.0;
    ConstraintListState constraints;
    int bank = 0;  // completed constraint steps after taking the action

    bool operator==(const Candidate& o) const {
        return parent == o.parent && action == o.action && score == o.score && bank == o.bank;
    }
};

/// Processed (masked + renormalized) log-probs per beam; nullopt marks a dead end.
using BeamLogProbs = std::vector<std::optional<std::vector<double>>>;

/// Group A: the top candidate_multiplier * n_b extensions over all beams by score
/// (ties: lower action, then lower parent). Group B: per beam, every unmasked action
/// that advances an unfulfilled constraint. Duplicates are merged.
[[nodiscard]] std::vector<Candidate> propose_candidates(const std::vector<Beam>& beams, const BeamLogProbs& logps,
                                                        int n_b, int candidate_multiplier);

/// Splits n_b slots across constraint-progress banks, most advanced first; leftover
/// slots go to the best remaining candidates. Output is ordered by (score desc, bank,
/// action, parent).
[[nodiscard]] std::vector<Candidate> allocate_banks(std::vector<Candidate> candidates, int n_b);

/// Strict ordering used for every score-based selection.
[[nodiscard]] bool candidate_before(const Candidate& a, const Candidate& b);

struct Hypothesis {
    ActionSequence actions;
    double reward = 0.0;
    double energy = 0.0;
    double score = 0.0;
    std::string source;  // beam | greedy | refine
};

/// Sort key for finalization: reward desc, then lexicographically smaller sequence.
[[nodiscard]] bool hypothesis_before(const Hypothesis& a, const Hypothesis& b);

struct GreedyResult {
    ActionSequence actions;
    double reward = 0.0;     // -inf when the episode failed or dead-ended
    double energy = 0.0;
    bool feasible = false;   // terminated by reaching the goal
    bool failed = false;
    bool dead_end = false;
    bool constraints_met = false;
    double wall_time_s = 0.0;
};

[[nodiscard]] GreedyResult greedy_decode(const Policy& policy, const Environment& env_prototype,
                                         const EpisodeConfig& episode, const ConstraintBundle& constraints,
                                         int max_length = 12);

struct SolveResult {
    bool feasible = false;
    ActionSequence actions;
    std::vector<std::string> labels;
    double reward = 0.0;
    double energy = 0.0;
    int n_b = 0;
    std::string source;
    double wall_time_s = 0.0;
    CacheStats cache;                      // counters accumulated during this solve
    int refine_evaluations = 0;
    std::vector<std::vector<int>> bank_history;  // per depth, selected beams per bank
    std::vector<Hypothesis> pool;          // finalized pool, best first
    std::optional<GreedyResult> greedy;

    [[nodiscard]] int n_modules() const { return static_cast<int>(actions.size()); }
    [[nodiscard]] nlohmann::json to_json() const;
};

/// Constrained beam search with policy scores, environment-checked termination and
/// reward-based finalization.
[[nodiscard]] SolveResult rlcbs_solve(const SearchConfig& config, const SearchProblem& problem);

/// Unconstrained beam search kept as an independent reference implementation.
[[nodiscard]] SolveResult beam_search(const SearchConfig& config, const SearchProblem& problem);

struct RefineOutcome {
    std::vector<Hypothesis> added;
    int evaluations = 0;
};

/// Swaps the last action of each of the top_k hypotheses (already sorted) with every
/// other allowed action and keeps the variants that still finish with constraints met.
[[nodiscard]] RefineOutcome refine_last_action(const std::vector<Hypothesis>& pool, int top_k,
                                               const SearchProblem& problem, int workers);

/// Independent replay check of a finished sequence against a constraint bundle.
[[nodiscard]] bool satisfies_constraints(const ConstraintBundle& constraints, const ActionSequence& actions,
                                         int action_count);

}  // namespace rlcbs
