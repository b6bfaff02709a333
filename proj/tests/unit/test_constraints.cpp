#include <doctest.h>

#include <cmath>
#include <limits>

#include "../oracles.hpp"
#include "rlcbs/constraints.hpp"

using namespace rlcbs;

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> flat_logits() { return std::vector<double>(kActionCount, 0.0); }
}  // namespace

TEST_CASE("disjunctive constraint counts members without resets") {
    SequentialDisjunctiveConstraint c({24, 22, 22}, 2);
    CHECK(c.actions() == std::vector<ActionId>{22, 24});
    int p = 0;
    CHECK(c.advance(p) == std::vector<ActionId>{22, 24});
    auto u = c.update(p, 5);
    CHECK_FALSE(u.stepped);
    CHECK_FALSE(u.reset);
    u = c.update(p, 22);
    CHECK(u.stepped);
    CHECK_FALSE(u.completed);
    u = c.update(p, 24);
    CHECK(u.completed);
    CHECK(c.remaining(p) == 0);
    CHECK(c.advance(p).empty());
    CHECK_FALSE(c.update(p, 22).stepped);
}

TEST_CASE("phrasal constraint restarts on a mismatch") {
    PhrasalConstraint c({1, 2, 3});
    int p = 0;
    c.update(p, 1);
    c.update(p, 2);
    CHECK(p == 2);
    CHECK(c.advance(p) == std::vector<ActionId>{3});
    auto u = c.update(p, 1);  // breaks the phrase but starts it again
    CHECK(u.reset);
    CHECK(u.stepped);
    CHECK(p == 1);
    u = c.update(p, 7);
    CHECK(u.reset);
    CHECK(p == 0);
    c.update(p, 1);
    c.update(p, 2);
    CHECK(c.update(p, 3).completed);
}

TEST_CASE("constraint list state aggregates progress and replays") {
    auto set = std::make_shared<ConstraintSet>();
    set->push_back(std::make_shared<SequentialDisjunctiveConstraint>(std::vector<ActionId>{0}, 2));
    set->push_back(std::make_shared<PhrasalConstraint>(ActionSequence{1, 2}));
    const std::shared_ptr<const ConstraintSet> shared = set;
    ConstraintListState s(shared);
    CHECK(s.total_steps() == 4);
    CHECK(s.advance() == std::vector<ActionId>{0, 1});
    s.update(0);
    s.update(1);
    CHECK(s.completed_steps() == 2);
    s.update(2);
    CHECK(s.completed_steps() == 3);
    const auto u = s.update(0);
    CHECK(u.completed);
    CHECK(s.fulfilled());
    const ActionSequence tokens = {0, 1, 2, 0};
    CHECK(ConstraintListState::replay(shared, tokens) == s);
    CHECK(ConstraintListState().fulfilled());
}

TEST_CASE("max-count processor masks after the limit") {
    MaxCountProcessor p(module_actions(ModuleType::SJR), 2);
    auto logits = flat_logits();
    const ActionSequence one = {11, 0};
    p.apply(one, logits);
    CHECK(logits[11] == 0.0);
    const ActionSequence two = {11, 0, 15};
    p.apply(two, logits);
    for (ActionId a = 0; a < kActionCount; ++a) {
        CHECK(std::isinf(logits[a]) == is_module(a, ModuleType::SJR));
    }
}

TEST_CASE("temperature continuity pins DEP and SP to the previous temperature") {
    TemperatureContinuityProcessor p;
    auto logits = flat_logits();
    p.apply(ActionSequence{}, logits);
    for (double v : logits) {
        CHECK(v == 0.0);
    }
    const ActionSequence prefix = {encode_action(ModuleType::SJR, 4)};
    p.apply(prefix, logits);
    for (ActionId a = 0; a < kActionCount; ++a) {
        const int m = oracle::module_of(a);
        const bool expect_masked = (m == 2 || m == 3) && oracle::temp_of(a) != oracle::temp_of(prefix[0]);
        CHECK(std::isinf(logits[a]) == expect_masked);
    }
}

TEST_CASE("process_logits renormalizes only when something was masked") {
    ProcessorChain chain = {max_sjr_processor(1)};
    std::vector<double> logp(kActionCount, std::log(1.0 / kActionCount));
    const auto untouched = process_logits(chain, ActionSequence{}, logp);
    REQUIRE(untouched);
    CHECK(*untouched == logp);

    const auto masked = process_logits(chain, ActionSequence{11}, logp);
    REQUIRE(masked);
    double mass = 0.0;
    for (ActionId a = 0; a < kActionCount; ++a) {
        if (is_module(a, ModuleType::SJR)) {
            CHECK((*masked)[a] == kNegInf);
        } else {
            CHECK((*masked)[a] == doctest::Approx(std::log(1.0 / 33.0)));
            mass += std::exp((*masked)[a]);
        }
    }
    CHECK(mass == doctest::Approx(1.0));
}

TEST_CASE("fully masked beams are dead ends") {
    const std::vector<double> all_masked(4, kNegInf);
    CHECK_THROWS_AS((void)renormalize(all_masked), DeadEnd);
    ProcessorChain chain = {std::make_shared<MaxCountProcessor>(std::vector<ActionId>{0, 1, 2, 3}, 0)};
    const std::vector<double> logits(4, -1.0);
    CHECK_FALSE(process_logits(chain, ActionSequence{}, logits).has_value());
}

TEST_CASE("sequence_allowed replays masks position by position") {
    const auto bundle = dryer_constraints(true, true, true);
    const ActionSequence ok = {11, 11, 22, 22, 33};
    CHECK(sequence_allowed(bundle.processors, ok, kActionCount));
    const ActionSequence bad_temp = {11, 25};
    CHECK_FALSE(sequence_allowed(bundle.processors, bad_temp, kActionCount));
    const ActionSequence too_many_sjr(7, 11);
    CHECK_FALSE(sequence_allowed(bundle.processors, too_many_sjr, kActionCount));
    CHECK_FALSE(action_allowed(bundle.processors, ActionSequence{11}, 26, kActionCount));
    CHECK(action_allowed(bundle.processors, ActionSequence{11}, 22, kActionCount));
}

TEST_CASE("constraint specs accept ids, labels and module names") {
    const auto specs = nlohmann::json::parse(R"([
        {"type": "max_count", "actions": ["SJR"], "n": 6},
        {"type": "min_count", "actions": ["DEP"], "n": 3},
        {"type": "phrasal", "actions": ["PP@80", 12]},
        {"type": "temp_continuity"}
    ])");
    const auto bundle = parse_constraint_specs(specs);
    CHECK(bundle.positive->size() == 2);
    CHECK(bundle.processors.size() == 2);
    const auto round_trip = parse_constraint_specs(constraint_specs_to_json(bundle));
    CHECK(constraint_specs_to_json(round_trip) == constraint_specs_to_json(bundle));
    CHECK_THROWS_AS((void)parse_constraint_specs(nlohmann::json::parse(R"([{"type": "nope"}])")), ConfigError);
    CHECK_THROWS((void)parse_constraint_specs(nlohmann::json::parse(R"([{"type": "min_count", "actions": ["SJR@1"], "n": 1}])")));
}
