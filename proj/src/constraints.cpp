#include "rlcbs/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rlcbs {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<ActionId> sorted_unique(std::vector<ActionId> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

}  // namespace

// ─── SequentialDisjunctiveConstraint ─────────────────

SequentialDisjunctiveConstraint::SequentialDisjunctiveConstraint(std::vector<ActionId> actions,
                                                                 int required)
    : actions_(sorted_unique(std::move(actions))), required_(required) {
    if (actions_.empty()) {
        throw ConfigError("disjunctive constraint needs at least one action");
    }
    if (required_ < 1) {
        throw ConfigError("disjunctive constraint needs n >= 1");
    }
}

bool SequentialDisjunctiveConstraint::contains(ActionId a) const {
    return std::binary_search(actions_.begin(), actions_.end(), a);
}

std::vector<ActionId> SequentialDisjunctiveConstraint::advance(int progress) const {
    if (progress >= required_) {
        return {};
    }
    return actions_;
}

ConstraintUpdate SequentialDisjunctiveConstraint::update(int& progress, ActionId token) const {
    ConstraintUpdate u;
    if (progress < required_ && contains(token)) {
        ++progress;
        u.stepped = true;
        u.completed = progress == required_;
    }
    return u;
}

nlohmann::json SequentialDisjunctiveConstraint::to_json() const {
    return {{"type", "min_count"}, {"actions", actions_}, {"n", required_}};
}

// ─── PhrasalConstraint ───────────────────────────────

PhrasalConstraint::PhrasalConstraint(ActionSequence phrase) : phrase_(std::move(phrase)) {
    if (phrase_.empty()) {
        throw ConfigError("phrasal constraint needs a non-empty phrase");
    }
}

std::vector<ActionId> PhrasalConstraint::advance(int progress) const {
    if (progress >= static_cast<int>(phrase_.size())) {
        return {};
    }
    return {phrase_[progress]};
}

ConstraintUpdate PhrasalConstraint::update(int& progress, ActionId token) const {
    ConstraintUpdate u;
    const int len = static_cast<int>(phrase_.size());
    if (progress >= len) {
        return u;
    }
    if (phrase_[progress] == token) {
        ++progress;
        u.stepped = true;
        u.completed = progress == len;
        return u;
    }
    // A partial match is abandoned; the token may still start the phrase afresh.
    u.reset = progress > 0;
    progress = 0;
    if (phrase_[0] == token) {
        progress = 1;
        u.stepped = true;
        u.completed = len == 1;
    }
    return u;
}

nlohmann::json PhrasalConstraint::to_json() const {
    return {{"type", "phrasal"}, {"actions", phrase_}};
}

// ─── ConstraintListState ─────────────────────────────

ConstraintListState::ConstraintListState() : constraints_(std::make_shared<const ConstraintSet>()) {}

ConstraintListState::ConstraintListState(std::shared_ptr<const ConstraintSet> constraints)
    : constraints_(constraints ? std::move(constraints) : std::make_shared<const ConstraintSet>()),
      progress_(constraints_->size(), 0) {}

std::vector<ActionId> ConstraintListState::advance() const {
    std::vector<ActionId> out;
    for (std::size_t i = 0; i < constraints_->size(); ++i) {
        auto tokens = (*constraints_)[i]->advance(progress_[i]);
        out.insert(out.end(), tokens.begin(), tokens.end());
    }
    return sorted_unique(std::move(out));
}

ConstraintUpdate ConstraintListState::update(ActionId token) {
    const bool was_fulfilled = fulfilled();
    ConstraintUpdate agg;
    for (std::size_t i = 0; i < constraints_->size(); ++i) {
        const ConstraintUpdate u = (*constraints_)[i]->update(progress_[i], token);
        agg.stepped = agg.stepped || u.stepped;
        agg.reset = agg.reset || u.reset;
    }
    agg.completed = !was_fulfilled && agg.stepped && fulfilled();
    return agg;
}

int ConstraintListState::completed_steps() const {
    int done = 0;
    for (std::size_t i = 0; i < constraints_->size(); ++i) {
        done += (*constraints_)[i]->total_steps() - (*constraints_)[i]->remaining(progress_[i]);
    }
    return done;
}

int ConstraintListState::total_steps() const {
    int total = 0;
    for (const auto& c : *constraints_) {
        total += c->total_steps();
    }
    return total;
}

ConstraintListState ConstraintListState::replay(std::shared_ptr<const ConstraintSet> constraints,
                                                std::span<const ActionId> tokens) {
    ConstraintListState state(std::move(constraints));
    for (ActionId a : tokens) {
        state.update(a);
    }
    return state;
}

// ─── Processors ──────────────────────────────────────

MaxCountProcessor::MaxCountProcessor(std::vector<ActionId> actions, int limit)
    : actions_(sorted_unique(std::move(actions))), limit_(limit) {
    if (limit_ < 0) {
        throw ConfigError("max_count limit must be >= 0");
    }
}

void MaxCountProcessor::apply(std::span<const ActionId> prefix, std::span<double> logits) const {
    const auto used = std::count_if(prefix.begin(), prefix.end(), [&](ActionId a) {
        return std::binary_search(actions_.begin(), actions_.end(), a);
    });
    if (used < limit_) {
        return;
    }
    for (ActionId a : actions_) {
        if (a >= 0 && a < static_cast<ActionId>(logits.size())) {
            logits[a] = kNegInf;
        }
    }
}

nlohmann::json MaxCountProcessor::to_json() const {
    return {{"type", "max_count"}, {"actions", actions_}, {"n", limit_}};
}

void TemperatureContinuityProcessor::apply(std::span<const ActionId> prefix,
                                           std::span<double> logits) const {
    if (prefix.empty()) {
        return;
    }
    const int prev_temp = decode_action(prefix.back()).temp_index;
    for (ModuleType m : {ModuleType::DEP, ModuleType::SP}) {
        for (int t = 0; t < kTempLevelCount; ++t) {
            const ActionId a = encode_action(m, t);
            if (t != prev_temp && a < static_cast<ActionId>(logits.size())) {
                logits[a] = kNegInf;
            }
        }
    }
}

nlohmann::json TemperatureContinuityProcessor::to_json() const {
    return {{"type", "temp_continuity"}};
}

std::vector<double> renormalize(std::span<const double> logits) {
    double max_logit = kNegInf;
    for (double l : logits) {
        max_logit = std::max(max_logit, l);
    }
    if (max_logit == kNegInf) {
        throw DeadEnd("every action is masked");
    }
    double sum = 0.0;
    for (double l : logits) {
        if (l != kNegInf) {
            sum += std::exp(l - max_logit);
        }
    }
    const double log_z = max_logit + std::log(sum);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = logits[i] == kNegInf ? kNegInf : logits[i] - log_z;
    }
    return out;
}

std::optional<std::vector<double>> process_logits(const ProcessorChain& chain,
                                                  std::span<const ActionId> prefix,
                                                  std::span<const double> logits) {
    std::vector<double> work(logits.begin(), logits.end());
    for (const auto& p : chain) {
        p->apply(prefix, work);
    }
    if (std::none_of(work.begin(), work.end(), [](double l) { return l != kNegInf; })) {
        return std::nullopt;
    }
    if (std::equal(work.begin(), work.end(), logits.begin())) {
        return work;  // nothing masked: policy output is already normalized
    }
    return renormalize(work);
}

bool action_allowed(const ProcessorChain& chain, std::span<const ActionId> prefix, ActionId a,
                    int action_count) {
    if (a < 0 || a >= action_count) {
        return false;
    }
    if (chain.empty()) {
        return true;
    }
    std::vector<double> work(action_count, 0.0);
    for (const auto& p : chain) {
        p->apply(prefix, work);
    }
    return work[a] != kNegInf;
}

bool sequence_allowed(const ProcessorChain& chain, std::span<const ActionId> sequence,
                      int action_count) {
    for (std::size_t i = 0; i < sequence.size(); ++i) {
        if (!action_allowed(chain, sequence.subspan(0, i), sequence[i], action_count)) {
            return false;
        }
    }
    return true;
}

// ─── Specs ───────────────────────────────────────────

namespace {

std::vector<ActionId> parse_action_list(const nlohmann::json& list) {
    if (!list.is_array()) {
        throw ConfigError("constraint 'actions' must be an array");
    }
    std::vector<ActionId> out;
    for (const auto& item : list) {
        if (item.is_number_integer()) {
            out.push_back(item.get<int>());
        } else if (item.is_string()) {
            const auto text = item.get<std::string>();
            try {
                if (text.find('@') != std::string::npos) {
                    out.push_back(parse_action_label(text));
                } else {
                    const auto ids = module_actions(parse_module_type(text));
                    out.insert(out.end(), ids.begin(), ids.end());
                }
            } catch (const InvalidAction& e) {
                throw ConfigError(e.what());
            }
        } else {
            throw ConfigError("constraint action entries must be ints or labels");
        }
    }
    return out;
}

int required_n(const nlohmann::json& spec) {
    if (!spec.contains("n") || !spec["n"].is_number_integer()) {
        throw ConfigError("constraint spec needs an integer 'n'");
    }
    return spec["n"].get<int>();
}

}  // namespace

ConstraintBundle parse_constraint_specs(const nlohmann::json& specs) {
    ConstraintBundle bundle;
    if (specs.is_null()) {
        return bundle;
    }
    if (!specs.is_array()) {
        throw ConfigError("constraints must be an array of specs");
    }
    ConstraintSet positive;
    for (const auto& spec : specs) {
        if (!spec.is_object() || !spec.contains("type") || !spec["type"].is_string()) {
            throw ConfigError("constraint spec needs a string 'type'");
        }
        const auto type = spec["type"].get<std::string>();
        if (type == "max_count") {
            bundle.processors.push_back(std::make_shared<MaxCountProcessor>(
                parse_action_list(spec.value("actions", nlohmann::json::array())), required_n(spec)));
        } else if (type == "min_count") {
            positive.push_back(std::make_shared<SequentialDisjunctiveConstraint>(
                parse_action_list(spec.value("actions", nlohmann::json::array())), required_n(spec)));
        } else if (type == "phrasal") {
            positive.push_back(std::make_shared<PhrasalConstraint>(
                parse_action_list(spec.value("actions", nlohmann::json::array()))));
        } else if (type == "temp_continuity") {
            bundle.processors.push_back(std::make_shared<TemperatureContinuityProcessor>());
        } else {
            throw ConfigError("unknown constraint type: " + type);
        }
    }
    bundle.positive = std::make_shared<const ConstraintSet>(std::move(positive));
    return bundle;
}

nlohmann::json constraint_specs_to_json(const ConstraintBundle& bundle) {
    auto out = nlohmann::json::array();
    for (const auto& p : bundle.processors) {
        out.push_back(p->to_json());
    }
    for (const auto& c : *bundle.positive) {
        out.push_back(c->to_json());
    }
    return out;
}

std::shared_ptr<const LogitsProcessor> max_sjr_processor(int limit) {
    return std::make_shared<MaxCountProcessor>(module_actions(ModuleType::SJR), limit);
}

std::shared_ptr<const Constraint> min_dep_constraint(int required) {
    return std::make_shared<SequentialDisjunctiveConstraint>(module_actions(ModuleType::DEP), required);
}

std::shared_ptr<const LogitsProcessor> temp_continuity_processor() {
    return std::make_shared<TemperatureContinuityProcessor>();
}

ConstraintBundle dryer_constraints(bool max_sjr, bool min_dep, bool temp_continuity) {
    ConstraintBundle bundle;
    if (max_sjr) {
        bundle.processors.push_back(max_sjr_processor());
    }
    if (temp_continuity) {
        bundle.processors.push_back(temp_continuity_processor());
    }
    if (min_dep) {
        bundle.positive = std::make_shared<const ConstraintSet>(ConstraintSet{min_dep_constraint()});
    }
    return bundle;
}

}  // namespace rlcbs
