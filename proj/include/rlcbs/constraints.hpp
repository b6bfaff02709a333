#pragma once

#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "rlcbs/core.hpp"

namespace rlcbs {

// ─── Positive constraints ────────────────────────────

struct ConstraintUpdate {
    bool stepped = false;
    bool completed = false;
    bool reset = false;
    bool operator==(const ConstraintUpdate&) const = default;
};

/// Immutable constraint template. The per-beam progress is a single integer owned
/// by the beam's ConstraintListState; templates are shared between beams.
class Constraint {
public:
    virtual ~Constraint() = default;

    /// Tokens that would advance fulfillment from this progress (empty when fulfilled).
    [[nodiscard]] virtual std::vector<ActionId> advance(int progress) const = 0;
    virtual ConstraintUpdate update(int& progress, ActionId token) const = 0;
    [[nodiscard]] virtual int remaining(int progress) const = 0;
    [[nodiscard]] virtual int total_steps() const = 0;
    [[nodiscard]] virtual nlohmann::json to_json() const = 0;
};

/// "At least n tokens from a set", tokens need not be adjacent. Non-members never
/// reset progress.
class SequentialDisjunctiveConstraint final : public Constraint {
public:
    SequentialDisjunctiveConstraint(std::vector<ActionId> actions, int required);

    [[nodiscard]] std::vector<ActionId> advance(int progress) const override;
    ConstraintUpdate update(int& progress, ActionId token) const override;
    [[nodiscard]] int remaining(int progress) const override { return required_ - progress; }
    [[nodiscard]] int total_steps() const override { return required_; }
    [[nodiscard]] nlohmann::json to_json() const override;

    [[nodiscard]] bool contains(ActionId a) const;
    [[nodiscard]] const std::vector<ActionId>& actions() const { return actions_; }

private:
    std::vector<ActionId> actions_;  // sorted, unique
    int required_;
};

/// Contiguous phrase; a non-matching token resets progress to the start.
class PhrasalConstraint final : public Constraint {
public:
    explicit PhrasalConstraint(ActionSequence phrase);

    [[nodiscard]] std::vector<ActionId> advance(int progress) const override;
    ConstraintUpdate update(int& progress, ActionId token) const override;
    [[nodiscard]] int remaining(int progress) const override {
        return static_cast<int>(phrase_.size()) - progress;
    }
    [[nodiscard]] int total_steps() const override { return static_cast<int>(phrase_.size()); }
    [[nodiscard]] nlohmann::json to_json() const override;

private:
    ActionSequence phrase_;
};

using ConstraintSet = std::vector<std::shared_ptr<const Constraint>>;

/// Per-beam fulfillment tracker over a shared set of constraint templates.
class ConstraintListState {
public:
    ConstraintListState();
    explicit ConstraintListState(std::shared_ptr<const ConstraintSet> constraints);

    /// Sorted union of every unfulfilled constraint's advancing tokens.
    [[nodiscard]] std::vector<ActionId> advance() const;
    /// Feeds the token to every constraint. stepped/reset aggregate with "any";
    /// completed is set when this token finished the last outstanding constraint.
    ConstraintUpdate update(ActionId token);

    [[nodiscard]] int completed_steps() const;
    [[nodiscard]] int total_steps() const;
    [[nodiscard]] int remaining() const { return total_steps() - completed_steps(); }
    [[nodiscard]] bool fulfilled() const { return remaining() == 0; }
    [[nodiscard]] const std::vector<int>& progress() const { return progress_; }
    [[nodiscard]] const std::shared_ptr<const ConstraintSet>& constraints() const { return constraints_; }

    [[nodiscard]] static ConstraintListState replay(std::shared_ptr<const ConstraintSet> constraints,
                                                    std::span<const ActionId> tokens);

    bool operator==(const ConstraintListState& other) const { return progress_ == other.progress_; }

private:
    std::shared_ptr<const ConstraintSet> constraints_;
    std::vector<int> progress_;
};

// ─── Negative constraints (logits processors) ────────

/// May only lower entries to -inf; never adds mass to masked actions.
class LogitsProcessor {
public:
    virtual ~LogitsProcessor() = default;
    virtual void apply(std::span<const ActionId> prefix, std::span<double> logits) const = 0;
    [[nodiscard]] virtual nlohmann::json to_json() const = 0;
};

/// Masks action_set once the prefix already holds `limit` of its members.
class MaxCountProcessor final : public LogitsProcessor {
public:
    MaxCountProcessor(std::vector<ActionId> actions, int limit);
    void apply(std::span<const ActionId> prefix, std::span<double> logits) const override;
    [[nodiscard]] nlohmann::json to_json() const override;

private:
    std::vector<ActionId> actions_;
    int limit_;
};

/// DEP/SP modules get no hot-air supply of their own, so their air temperature has to
/// match the preceding module's. Inactive on the first step.
class TemperatureContinuityProcessor final : public LogitsProcessor {
public:
    void apply(std::span<const ActionId> prefix, std::span<double> logits) const override;
    [[nodiscard]] nlohmann::json to_json() const override;
};

using ProcessorChain = std::vector<std::shared_ptr<const LogitsProcessor>>;

class DeadEnd : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Log-softmax over the finite entries; -inf stays -inf. Throws DeadEnd when every
/// entry is -inf.
[[nodiscard]] std::vector<double> renormalize(std::span<const double> logits);

/// Runs the chain then renormalizes. nullopt marks a dead-end beam.
[[nodiscard]] std::optional<std::vector<double>> process_logits(const ProcessorChain& chain,
                                                                std::span<const ActionId> prefix,
                                                                std::span<const double> logits);

/// Whether `a` survives the chain after `prefix` (processors only mask, so this is
/// independent of the logit values).
[[nodiscard]] bool action_allowed(const ProcessorChain& chain, std::span<const ActionId> prefix,
                                  ActionId a, int action_count);

/// True when no position of the sequence was masked given its own prefix.
[[nodiscard]] bool sequence_allowed(const ProcessorChain& chain, std::span<const ActionId> sequence,
                                    int action_count);

// ─── Run-config specs ────────────────────────────────

struct ConstraintBundle {
    std::shared_ptr<const ConstraintSet> positive = std::make_shared<const ConstraintSet>();
    ProcessorChain processors;
};

/// Parses [{type: max_count|min_count|temp_continuity|phrasal, actions: [...], n}, ...].
/// Action entries are ids, dryer labels ("SJR@124") or module names ("DEP").
[[nodiscard]] ConstraintBundle parse_constraint_specs(const nlohmann::json& specs);
[[nodiscard]] nlohmann::json constraint_specs_to_json(const ConstraintBundle& bundle);

// Dryer design constraints.
[[nodiscard]] std::shared_ptr<const LogitsProcessor> max_sjr_processor(int limit = 6);
[[nodiscard]] std::shared_ptr<const Constraint> min_dep_constraint(int required = 3);
[[nodiscard]] std::shared_ptr<const LogitsProcessor> temp_continuity_processor();
[[nodiscard]] ConstraintBundle dryer_constraints(bool max_sjr, bool min_dep, bool temp_continuity);

}  // namespace rlcbs
