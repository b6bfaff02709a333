#include "rlcbs/toy_env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "rlcbs/rng.hpp"

namespace rlcbs {

void ToyEnvSpec::validate() const {
    if (num_actions < 1 || num_actions > kToyMaxActions) {
        throw ConfigError("toy env action count must be in [1, 8]");
    }
    if (horizon < 1 || horizon > kToyMaxHorizon) {
        throw ConfigError("toy env horizon must be in [1, 16]");
    }
    if (num_states < 1 || static_cast<double>(num_states) * horizon > 1e6) {
        throw ConfigError("toy env needs 1..10^6 (t, state) pairs");
    }
    if (absorbing_state < -1 || absorbing_state >= num_states || absorbing_state == 0) {
        throw ConfigError("absorbing state must be -1 or a non-initial state index");
    }
}

nlohmann::json ToyEnvSpec::to_json() const {
    return {{"num_actions", num_actions},
            {"horizon", horizon},
            {"num_states", num_states},
            {"seed", seed},
            {"absorbing_state", absorbing_state}};
}

ToyEnvSpec ToyEnvSpec::from_json(const nlohmann::json& doc) {
    ToyEnvSpec s;
    try {
        s.num_actions = doc.value("num_actions", s.num_actions);
        s.horizon = doc.value("horizon", s.horizon);
        s.num_states = doc.value("num_states", s.num_states);
        s.seed = doc.value("seed", s.seed);
        s.absorbing_state = doc.value("absorbing_state", s.absorbing_state);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad toy env spec: ") + e.what());
    }
    s.validate();
    return s;
}

ToyTables::ToyTables(const ToyEnvSpec& s) : spec(s) {
    spec.validate();
    const std::size_t n = static_cast<std::size_t>(spec.num_states) * spec.num_actions;
    next_state.resize(n);
    reward.resize(n);
    std::mt19937_64 rng(spec.seed);
    for (std::size_t i = 0; i < n; ++i) {
        next_state[i] = static_cast<int>(next_below(rng, static_cast<std::uint64_t>(spec.num_states)));
        reward[i] = next_unit(rng);
    }
}

// ─── ToyEnv ──────────────────────────────────────────

ToyEnv::ToyEnv(const ToyEnvSpec& spec) : tables_(std::make_shared<const ToyTables>(spec)) {}

ToyEnv::ToyEnv(std::shared_ptr<const ToyTables> tables) : tables_(std::move(tables)) {}

Observation ToyEnv::reset(const EpisodeConfig& config) {
    config_ = config;
    t_ = 0;
    s_ = 0;
    accumulated_ = 0.0;
    last_reward_ = 0.0;
    done_ = false;
    started_ = true;
    return {0.0, 0.0};
}

StepResult ToyEnv::step(ActionId action) {
    if (!started_) {
        throw std::logic_error("toy env stepped before reset");
    }
    if (done_) {
        throw EpisodeOver("toy episode already finished");
    }
    if (action < 0 || action >= tables_->spec.num_actions) {
        throw InvalidAction("toy action out of range: " + std::to_string(action));
    }
    accumulated_ += tables_->r(s_, action);
    s_ = tables_->next(s_, action);
    ++t_;
    done_ = t_ >= tables_->spec.horizon || s_ == tables_->spec.absorbing_state;
    last_reward_ = done_ ? accumulated_ : 0.0;
    return status();
}

StepResult ToyEnv::status() const {
    StepResult r;
    r.observation = {static_cast<double>(t_), static_cast<double>(s_)};
    r.reward = last_reward_;
    r.episode_return = done_ ? accumulated_ : 0.0;
    r.done = done_;
    r.t = t_;
    return r;
}

std::string ToyEnv::get_state() const {
    std::vector<double> v = {static_cast<double>(t_), static_cast<double>(s_), accumulated_, last_reward_,
                             done_ ? 1.0 : 0.0};
    append_episode_config(v, config_);
    return encode_state(kStateTag, kStateVersion, v);
}

void ToyEnv::set_state(std::string_view bytes) {
    const auto v = decode_state(bytes, kStateTag, kStateVersion);
    if (v.size() != 5 + kEpisodeConfigSlots) {
        throw StateFormatError("toy state has wrong length");
    }
    t_ = static_cast<int>(v[0]);
    s_ = static_cast<int>(v[1]);
    accumulated_ = v[2];
    last_reward_ = v[3];
    done_ = v[4] != 0.0;
    config_ = read_episode_config(v, 5);
    started_ = true;
}

std::string ToyEnv::action_label(ActionId a) const {
    if (a < 0 || a >= tables_->spec.num_actions) {
        throw InvalidAction("toy action out of range: " + std::to_string(a));
    }
    return "a" + std::to_string(a);
}

nlohmann::json ToyEnv::describe() const {
    return {{"kind", "toy"}, {"version", kStateVersion}, {"spec", tables_->spec.to_json()}};
}

std::unique_ptr<Environment> ToyEnv::clone() const { return std::make_unique<ToyEnv>(tables_); }

// ─── Brute force ─────────────────────────────────────

namespace {

bool positive_satisfied(const ConstraintSet& constraints, const ActionSequence& seq) {
    for (const auto& c : constraints) {
        if (const auto* d = dynamic_cast<const SequentialDisjunctiveConstraint*>(c.get())) {
            const auto hits = std::count_if(seq.begin(), seq.end(), [&](ActionId a) { return d->contains(a); });
            if (hits < d->total_steps()) {
                return false;
            }
        } else if (dynamic_cast<const PhrasalConstraint*>(c.get()) != nullptr) {
            const auto phrase = c->to_json().at("actions").get<ActionSequence>();
            if (std::search(seq.begin(), seq.end(), phrase.begin(), phrase.end()) == seq.end()) {
                return false;
            }
        } else {
            throw ConfigError("brute force cannot check this constraint type");
        }
    }
    return true;
}

struct Enumerator {
    const ToyTables& tables;
    const ConstraintBundle& constraints;
    bool keep;
    BruteForceResult result;
    ActionSequence seq;

    void visit(int t, int s, double acc) {
        const int n = tables.spec.num_actions;
        for (ActionId a = 0; a < n; ++a) {
            const bool allowed = action_allowed(constraints.processors, seq, a, n);
            seq.push_back(a);
            const double acc2 = acc + tables.r(s, a);
            const int s2 = tables.next(s, a);
            const bool terminal = t + 1 >= tables.spec.horizon || s2 == tables.spec.absorbing_state;
            if (terminal) {
                ++result.enumerated;
                if (allowed && positive_satisfied(*constraints.positive, seq)) {
                    ++result.feasible;
                    if (keep) {
                        result.feasible_sequences.emplace_back(seq, acc2);
                    }
                    // Depth-first in ascending action order visits sequences lexicographically,
                    // so a strict comparison keeps the smallest among ties.
                    if (!result.found || acc2 > result.best_reward) {
                        result.found = true;
                        result.best = seq;
                        result.best_reward = acc2;
                    }
                }
            } else if (allowed) {
                visit(t + 1, s2, acc2);
            } else {
                // Masked prefix: every completion is infeasible but still enumerated.
                result.enumerated += count_completions(t + 1, s2);
            }
            seq.pop_back();
        }
    }

    std::int64_t count_completions(int t, int s) const {
        std::int64_t total = 0;
        for (ActionId a = 0; a < tables.spec.num_actions; ++a) {
            const int s2 = tables.next(s, a);
            const bool terminal = t + 1 >= tables.spec.horizon || s2 == tables.spec.absorbing_state;
            total += terminal ? 1 : count_completions(t + 1, s2);
        }
        return total;
    }
};

}  // namespace

BruteForceResult brute_force_optimum(const ToyEnvSpec& spec, const ConstraintBundle& constraints,
                                     bool keep_feasible) {
    spec.validate();
    if (std::pow(static_cast<double>(spec.num_actions), spec.horizon) > kBruteForceBudget) {
        throw ConfigError("brute force budget exceeded: |A|^T > 10^7");
    }
    const ToyTables tables(spec);
    Enumerator e{tables, constraints, keep_feasible, {}, {}};
    e.visit(0, 0, 0.0);
    return e.result;
}

// ─── Tabular / DP ────────────────────────────────────

TabularPolicy::TabularPolicy(int action_count, int horizon, int num_states, std::vector<ActionId> table)
    : action_count_(action_count), horizon_(horizon), num_states_(num_states), table_(std::move(table)) {
    if (table_.size() != static_cast<std::size_t>(horizon_) * num_states_) {
        throw ConfigError("tabular policy table has the wrong size");
    }
}

ActionId TabularPolicy::action_at(int t, int s) const {
    if (t < 0 || t >= horizon_ || s < 0 || s >= num_states_) {
        throw std::out_of_range("tabular policy lookup outside the table");
    }
    return table_[static_cast<std::size_t>(t) * num_states_ + s];
}

std::vector<double> TabularPolicy::log_probs(const Observation& obs) const {
    if (obs.size() != 2) {
        throw ConfigError("tabular policy expects a [t, state] observation");
    }
    std::vector<double> out(action_count_, -std::numeric_limits<double>::infinity());
    out[action_at(static_cast<int>(obs[0]), static_cast<int>(obs[1]))] = 0.0;
    return out;
}

TabularPolicy dp_oracle_policy(const ToyEnvSpec& spec) {
    spec.validate();
    const int T = spec.horizon;
    const int S = spec.num_states;
    const int A = spec.num_actions;
    if (static_cast<double>(T) * S > 1e6) {
        throw ConfigError("state space too large for the DP oracle");
    }
    const ToyTables tables(spec);
    std::vector<double> value((static_cast<std::size_t>(T) + 1) * S, 0.0);
    std::vector<ActionId> table(static_cast<std::size_t>(T) * S, 0);
    for (int t = T - 1; t >= 0; --t) {
        for (int s = 0; s < S; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            ActionId best_a = 0;
            for (ActionId a = 0; a < A; ++a) {
                const int s2 = tables.next(s, a);
                const bool terminal = t + 1 >= T || s2 == spec.absorbing_state;
                const double q = tables.r(s, a) + (terminal ? 0.0 : value[(t + 1) * S + s2]);
                if (q > best) {
                    best = q;
                    best_a = a;
                }
            }
            value[t * S + s] = best;
            table[t * S + s] = best_a;
        }
    }
    return TabularPolicy(A, T, S, std::move(table));
}

}  // namespace rlcbs
