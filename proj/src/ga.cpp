#include "rlcbs/ga.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "rlcbs/parallel.hpp"
#include "rlcbs/rng.hpp"

namespace rlcbs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ActionSequence random_genome(int length, int action_count, std::mt19937_64& rng) {
    ActionSequence g(length);
    for (auto& a : g) {
        a = static_cast<ActionId>(next_below(rng, action_count));
    }
    return g;
}

void evaluate_all(std::vector<Individual>& pop, const Evaluator& evaluate, int workers) {
    parallel_for_worker(pop.size(), workers, [&](std::size_t i, int w) { pop[i].eval = evaluate(pop[i].genome, w); });
}

std::size_t best_index(const std::vector<Individual>& pop) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < pop.size(); ++i) {
        if (deb_better(pop[i].eval, pop[best].eval)) {
            best = i;
        }
    }
    return best;
}

double best_feasible(const std::vector<Individual>& pop) {
    double best = kInf;
    for (const auto& ind : pop) {
        if (ind.eval.feasible()) {
            best = std::min(best, ind.eval.objective);
        }
    }
    return best;
}

}  // namespace

void GaConfig::validate() const {
    if (!seed) {
        throw ConfigError("ga: seed is required");
    }
    if (population < 2) {
        throw ConfigError("ga: population must be >= 2");
    }
    if (generations < 0) {
        throw ConfigError("ga: generations must be >= 0");
    }
    if (genome_length < 1) {
        throw ConfigError("ga: genome_length must be >= 1");
    }
    if (crossover_rate < 0.0 || crossover_rate > 1.0) {
        throw ConfigError("ga: crossover_rate must lie in [0, 1]");
    }
    if (mutation_rate > 1.0) {
        throw ConfigError("ga: mutation_rate must be <= 1");
    }
    if (workers < 1) {
        throw ConfigError("ga: workers must be >= 1");
    }
}

double Evaluation::total_violation() const {
    double total = 0.0;
    for (double v : violations) {
        total += v;
    }
    return total;
}

bool deb_better(const Evaluation& a, const Evaluation& b) {
    const bool fa = a.feasible();
    const bool fb = b.feasible();
    if (fa != fb) {
        return fa;
    }
    if (fa) {
        return a.objective < b.objective;
    }
    return a.total_violation() < b.total_violation();
}

std::size_t tournament(const std::vector<Individual>& pop, std::mt19937_64& rng) {
    const auto i = static_cast<std::size_t>(next_below(rng, pop.size()));
    const auto j = static_cast<std::size_t>(next_below(rng, pop.size()));
    return deb_better(pop[j].eval, pop[i].eval) ? j : i;
}

GaResult evolve(const GaConfig& config, const Evaluator& evaluate, int action_count) {
    config.validate();
    if (action_count < 1) {
        throw ConfigError("ga: action_count must be >= 1");
    }
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(*config.seed);
    const double p_mut = config.effective_mutation_rate();
    const int n = config.genome_length;

    GaResult result;
    result.generations = config.generations;
    result.population = config.population;
    result.seed = *config.seed;

    std::vector<Individual> pop(config.population);
    for (auto& ind : pop) {
        ind.genome = random_genome(n, action_count, rng);
    }
    evaluate_all(pop, evaluate, config.workers);
    result.evaluations += config.population;
    result.best_feasible_history.push_back(best_feasible(pop));

    for (int gen = 0; gen < config.generations; ++gen) {
        const Individual elite = pop[best_index(pop)];
        std::vector<Individual> next;
        next.reserve(config.population);
        while (static_cast<int>(next.size()) < config.population) {
            Individual c1{pop[tournament(pop, rng)].genome, {}};
            Individual c2{pop[tournament(pop, rng)].genome, {}};
            if (next_unit(rng) < config.crossover_rate) {
                for (int g = 0; g < n; ++g) {
                    if (next_unit(rng) < 0.5) {
                        std::swap(c1.genome[g], c2.genome[g]);
                    }
                }
            }
            for (auto* c : {&c1, &c2}) {
                for (int g = 0; g < n; ++g) {
                    if (next_unit(rng) < p_mut) {
                        c->genome[g] = static_cast<ActionId>(next_below(rng, action_count));
                    }
                }
            }
            next.push_back(std::move(c1));
            if (static_cast<int>(next.size()) < config.population) {
                next.push_back(std::move(c2));
            }
        }
        evaluate_all(next, evaluate, config.workers);
        result.evaluations += config.population;

        const std::size_t top = best_index(next);
        if (deb_better(elite.eval, next[top].eval)) {
            std::size_t worst = 0;
            for (std::size_t i = 1; i < next.size(); ++i) {
                if (deb_better(next[worst].eval, next[i].eval)) {
                    worst = i;
                }
            }
            next[worst] = elite;
        }
        pop = std::move(next);
        result.best_feasible_history.push_back(best_feasible(pop));
    }

    result.best = pop[best_index(pop)];
    result.feasible = result.best.eval.feasible();
    result.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

nlohmann::json GaResult::to_json(const std::function<std::string(ActionId)>& label) const {
    nlohmann::json j;
    j["feasible"] = feasible;
    if (feasible) {
        std::vector<std::string> labels;
        for (ActionId a : best.genome) {
            labels.push_back(label(a));
        }
        j["actions"] = labels;
        j["action_ids"] = best.genome;
        j["objective"] = best.eval.objective;
        j["reward_kj_per_m2"] = std::isnan(best.eval.reward) ? nlohmann::json() : nlohmann::json(best.eval.reward);
        j["energy_kj_per_m2"] = best.eval.objective;
        j["n_modules"] = best.genome.size();
    } else {
        j["actions"] = nlohmann::json::array();
        j["action_ids"] = nlohmann::json::array();
        j["objective"] = nullptr;
        j["reward_kj_per_m2"] = nullptr;
        j["energy_kj_per_m2"] = nullptr;
        j["n_modules"] = 0;
    }
    auto violations = nlohmann::json::array();
    for (double v : best.eval.violations) {
        violations.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json("inf"));
    }
    j["violations"] = violations;
    j["generations"] = generations;
    j["population"] = population;
    j["seed"] = seed;
    j["evaluations"] = evaluations;
    j["timing"] = {{"wall_time_s", wall_time_s}};
    return j;
}

// ─── Dryer problem ───────────────────────────────────

std::vector<double> dryer_violations(const ActionSequence& actions, double final_dbmc, bool physics_failed,
                                     double target, int max_sjr, int min_dep) {
    if (physics_failed) {
        return {kInf, kInf, kInf, kInf};
    }
    int sjr = 0;
    int dep = 0;
    double mismatch = 0.0;
    for (std::size_t i = 0; i < actions.size(); ++i) {
        const auto d = decode_action(actions[i]);
        sjr += d.module == ModuleType::SJR ? 1 : 0;
        dep += d.module == ModuleType::DEP ? 1 : 0;
        if (i > 0 && (d.module == ModuleType::DEP || d.module == ModuleType::SP)) {
            mismatch += std::abs(d.temp_celsius() - decode_action(actions[i - 1]).temp_celsius());
        }
    }
    return {std::max(0.0, static_cast<double>(sjr - max_sjr)), std::max(0.0, static_cast<double>(min_dep - dep)),
            mismatch, std::max(0.0, final_dbmc - target)};
}

Evaluator make_dryer_evaluator(const DryerEnv& prototype, EpisodeConfig episode, std::shared_ptr<RolloutCache> cache,
                               int workers) {
    if (!cache) {
        throw ConfigError("ga: dryer evaluator needs a rollout cache (possibly disabled)");
    }
    auto envs = std::make_shared<std::vector<std::unique_ptr<Environment>>>();
    for (int i = 0; i < std::max(1, workers); ++i) {
        envs->push_back(prototype.clone());
    }
    return [envs, episode, cache](const ActionSequence& genome, int worker) {
        EpisodeConfig ep = episode;
        ep.max_modules = static_cast<int>(genome.size());
        auto& env = static_cast<DryerEnv&>(*(*envs)[worker]);
        const auto r = cache->rollout(env, ep, genome);
        env.set_state(r.state);
        Evaluation e;
        const bool failed = env.fault() != PhysicsFault::none;
        e.violations = dryer_violations(genome, env.paper().mean_dbmc(), failed, ep.dbmc_target);
        e.objective = failed ? kInf : r.status.energy;
        e.reward = failed ? -kInf : r.status.episode_return;
        return e;
    };
}

Evaluator make_dep_count_evaluator(int min_dep) {
    return [min_dep](const ActionSequence& genome, int) {
        const auto dep = std::count_if(genome.begin(), genome.end(),
                                       [](ActionId a) { return decode_action(a).module == ModuleType::DEP; });
        Evaluation e;
        e.objective = static_cast<double>(dep);
        e.violations = {std::max(0.0, static_cast<double>(min_dep - dep))};
        return e;
    };
}

}  // namespace rlcbs
