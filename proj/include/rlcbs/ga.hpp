#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include <json.hpp>

#include "rlcbs/cache.hpp"
#include "rlcbs/core.hpp"
#include "rlcbs/dryer.hpp"

namespace rlcbs {

struct GaConfig {
    int population = 32;
    int generations = 100;
    std::optional<std::uint64_t> seed;  // required; validate() rejects a missing seed
    int genome_length = 12;
    double crossover_rate = 0.9;
    double mutation_rate = 0.0;         // <= 0 means 1 / (2 n)
    int workers = 1;

    [[nodiscard]] double effective_mutation_rate() const {
        return mutation_rate > 0.0 ? mutation_rate : 1.0 / (2.0 * genome_length);
    }
    void validate() const;
};

struct Evaluation {
    double objective = std::numeric_limits<double>::infinity();  // minimized
    std::vector<double> violations;
    double reward = std::numeric_limits<double>::quiet_NaN();     // filled by environment evaluators

    [[nodiscard]] double total_violation() const;
    [[nodiscard]] bool feasible() const { return total_violation() == 0.0; }
};

struct Individual {
    ActionSequence genome;
    Evaluation eval;
};

/// Evaluates one genome; `worker` identifies the calling thread.
using Evaluator = std::function<Evaluation(const ActionSequence& genome, int worker)>;

/// Feasibility-rule ordering: feasible beats infeasible, smaller total violation among
/// infeasible, smaller objective among feasible. Strict.
[[nodiscard]] bool deb_better(const Evaluation& a, const Evaluation& b);

/// Binary tournament with replacement; ties keep the first pick.
[[nodiscard]] std::size_t tournament(const std::vector<Individual>& pop, std::mt19937_64& rng);

struct GaResult {
    bool feasible = false;
    Individual best;
    int generations = 0;
    int population = 0;
    std::uint64_t seed = 0;
    long long evaluations = 0;
    std::vector<double> best_feasible_history;  // per generation incl. the initial one; inf if none
    double wall_time_s = 0.0;

    [[nodiscard]] nlohmann::json to_json(const std::function<std::string(ActionId)>& label) const;
};

/// Generational GA with elitism of 1: the previous best replaces the worst offspring
/// unless some offspring already matches or beats it.
[[nodiscard]] GaResult evolve(const GaConfig& config, const Evaluator& evaluate, int action_count);

// ─── Dryer problem ───────────────────────────────────

/// v1 = max(0, #SJR - 6), v2 = max(0, 3 - #DEP), v3 = Σ |ΔT| at DEP/SP positions after the
/// first, v4 = max(0, final DBMC - target). Physics failure gives infinite violations.
[[nodiscard]] std::vector<double> dryer_violations(const ActionSequence& actions, double final_dbmc,
                                                   bool physics_failed, double target = 0.2, int max_sjr = 6,
                                                   int min_dep = 3);

/// Builds a thread-safe evaluator (one env clone per worker) that runs genomes through
/// the shared cache. The episode horizon is set to the genome length.
[[nodiscard]] Evaluator make_dryer_evaluator(const DryerEnv& prototype, EpisodeConfig episode,
                                             std::shared_ptr<RolloutCache> cache, int workers);

/// Toy objective: number of DEP genes (minimized) with a single min-count violation.
[[nodiscard]] Evaluator make_dep_count_evaluator(int min_dep = 3);

}  // namespace rlcbs
