#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "rlcbs/constraints.hpp"
#include "rlcbs/environment.hpp"
#include "rlcbs/policy.hpp"

namespace rlcbs {

struct ToyEnvSpec {
    int num_actions = 4;
    int horizon = 6;
    int num_states = 16;
    std::uint64_t seed = 0;
    int absorbing_state = -1;  // entering it ends the episode; -1 disables

    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static ToyEnvSpec from_json(const nlohmann::json& doc);
};

inline constexpr int kToyMaxActions = 8;
inline constexpr int kToyMaxHorizon = 16;

/// Seeded transition and reward tables, shared read-only by every env instance.
struct ToyTables {
    ToyEnvSpec spec;
    std::vector<int> next_state;  // [state * num_actions + action]
    std::vector<double> reward;   // same layout, values in [0, 1)

    explicit ToyTables(const ToyEnvSpec& spec);
    [[nodiscard]] int next(int s, ActionId a) const { return next_state[s * spec.num_actions + a]; }
    [[nodiscard]] double r(int s, ActionId a) const { return reward[s * spec.num_actions + a]; }
};

/// Finite-horizon table walk. Per-step rewards accumulate silently and the total is
/// paid out on the terminating step, so every non-terminal reward is exactly zero.
/// Observation = [t, state].
class ToyEnv final : public Environment {
public:
    explicit ToyEnv(const ToyEnvSpec& spec);
    explicit ToyEnv(std::shared_ptr<const ToyTables> tables);

    Observation reset(const EpisodeConfig& config) override;
    StepResult step(ActionId action) override;
    [[nodiscard]] StepResult status() const override;

    [[nodiscard]] std::string get_state() const override;
    void set_state(std::string_view bytes) override;

    [[nodiscard]] int action_count() const override { return tables_->spec.num_actions; }
    [[nodiscard]] std::string action_label(ActionId a) const override;
    [[nodiscard]] nlohmann::json describe() const override;
    [[nodiscard]] std::unique_ptr<Environment> clone() const override;

    [[nodiscard]] const ToyTables& tables() const { return *tables_; }

    static constexpr std::string_view kStateTag = "toy";
    static constexpr std::uint32_t kStateVersion = 1;

private:
    std::shared_ptr<const ToyTables> tables_;
    EpisodeConfig config_;
    int t_ = 0;
    int s_ = 0;
    double accumulated_ = 0.0;
    double last_reward_ = 0.0;
    bool done_ = false;
    bool started_ = false;
};

struct BruteForceResult {
    bool found = false;
    ActionSequence best;
    double best_reward = 0.0;
    std::int64_t enumerated = 0;  // complete sequences visited
    std::int64_t feasible = 0;
    std::vector<std::pair<ActionSequence, double>> feasible_sequences;  // filled on request
};

inline constexpr double kBruteForceBudget = 1e7;

/// Exhaustive search over every action sequence. Masks are checked position by
/// position; positive constraints are checked on the finished sequence by direct
/// counting (disjunctive) or contiguous search (phrasal). Ties prefer the
/// lexicographically smallest sequence. Throws ConfigError when |A|^T exceeds the budget.
[[nodiscard]] BruteForceResult brute_force_optimum(const ToyEnvSpec& spec, const ConstraintBundle& constraints,
                                                   bool keep_feasible = false);

/// One-hot policy over (t, state) read from a table.
class TabularPolicy final : public Policy {
public:
    TabularPolicy(int action_count, int horizon, int num_states, std::vector<ActionId> table);
    [[nodiscard]] std::vector<double> log_probs(const Observation& obs) const override;
    [[nodiscard]] int action_count() const override { return action_count_; }
    [[nodiscard]] std::string name() const override { return "tabular"; }
    [[nodiscard]] ActionId action_at(int t, int s) const;

private:
    int action_count_;
    int horizon_;
    int num_states_;
    std::vector<ActionId> table_;  // [t * num_states + s]
};

/// Exact unconstrained optimal policy by backward induction; lowest action id wins ties.
/// Refuses more than 10^6 (t, state) pairs.
[[nodiscard]] TabularPolicy dp_oracle_policy(const ToyEnvSpec& spec);

}  // namespace rlcbs
