#include <doctest.h>

#include <cmath>
#include <limits>

#include "../oracles.hpp"
#include "rlcbs/dryer.hpp"
#include "rlcbs/ga.hpp"

using namespace rlcbs;

namespace {
Evaluation ev(double objective, std::vector<double> violations) {
    Evaluation e;
    e.objective = objective;
    e.violations = std::move(violations);
    return e;
}
}  // namespace

TEST_CASE("Deb's rules rank feasibility, objective, then violation") {
    const auto feasible_good = ev(1.0, {0, 0});
    const auto feasible_bad = ev(5.0, {0, 0});
    const auto slight = ev(0.1, {0.5, 0});
    const auto heavy = ev(0.1, {2.0, 1.0});
    CHECK(deb_better(feasible_bad, slight));
    CHECK(deb_better(feasible_good, feasible_bad));
    CHECK(deb_better(slight, heavy));
    CHECK_FALSE(deb_better(feasible_good, feasible_good));
    CHECK_FALSE(deb_better(heavy, slight));
    CHECK(heavy.total_violation() == 3.0);
    CHECK(feasible_good.feasible());
    CHECK_FALSE(slight.feasible());
}

TEST_CASE("tournament returns the better of two picks") {
    std::vector<Individual> pop(2);
    pop[0].eval = ev(1.0, {0});
    pop[1].eval = ev(2.0, {0});
    std::mt19937_64 rng(1);
    int zero = 0;
    for (int i = 0; i < 200; ++i) {
        zero += tournament(pop, rng) == 0 ? 1 : 0;
    }
    // Index 1 only wins when drawn twice: about a quarter of the time.
    CHECK(zero > 120);
    CHECK(zero < 190);
}

TEST_CASE("GA is reproducible for a seed and respects its budget") {
    GaConfig cfg;
    cfg.seed = 42;
    cfg.population = 16;
    cfg.generations = 20;
    cfg.genome_length = 6;
    const auto a = evolve(cfg, make_dep_count_evaluator(3), kActionCount);
    const auto b = evolve(cfg, make_dep_count_evaluator(3), kActionCount);
    CHECK(a.best.genome == b.best.genome);
    CHECK(a.best_feasible_history == b.best_feasible_history);
    CHECK(a.evaluations == 16 * 21);
    CHECK(a.feasible);
    CHECK(oracle::check_design({a.best.genome.begin(), a.best.genome.end()}).dep >= 3);
    cfg.workers = 3;
    const auto c = evolve(cfg, make_dep_count_evaluator(3), kActionCount);
    CHECK(c.best.genome == a.best.genome);
}

TEST_CASE("GA config validation") {
    GaConfig cfg;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);  // no seed
    cfg.seed = 1;
    CHECK_NOTHROW(cfg.validate());
    cfg.population = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.population = 32;
    cfg.crossover_rate = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("dryer violations measure each design rule") {
    const ActionSequence seq = {encode_action(ModuleType::SJR, 5), encode_action(ModuleType::DEP, 6),
                                encode_action(ModuleType::SP, 4), encode_action(ModuleType::DEP, 4)};
    const auto v = dryer_violations(seq, 0.35, false);
    REQUIRE(v.size() == 4);
    CHECK(v[0] == 0.0);
    CHECK(v[1] == 1.0);
    CHECK(v[2] == doctest::Approx(11.0 + 22.0));
    CHECK(v[3] == doctest::Approx(0.15));
    const auto failed = dryer_violations(seq, 0.1, true);
    for (double x : failed) {
        CHECK(std::isinf(x));
    }
    const ActionSequence sjr(8, encode_action(ModuleType::SJR, 0));
    CHECK(dryer_violations(sjr, 0.1, false)[0] == 2.0);
}

TEST_CASE("dryer evaluator scores a genome by its episode energy") {
    const auto params = std::make_shared<const DryerParams>(load_dryer_params(default_dryer_params_path()));
    DryerEnv proto(params);
    EpisodeConfig e;
    e.speed_factor = 0.5;
    auto cache = std::make_shared<RolloutCache>(std::make_shared<InMemoryStore>());
    const auto evaluate = make_dryer_evaluator(proto, e, cache, 1);
    const ActionSequence genome(3, encode_action(ModuleType::SJR, 2));
    const auto r = evaluate(genome, 0);
    CHECK(std::isfinite(r.objective));
    CHECK(r.objective > 0.0);
    CHECK(r.violations[3] > 0.0);  // three modules cannot dry the sheet
    CHECK_FALSE(r.feasible());
    CHECK_THROWS_AS((void)make_dryer_evaluator(proto, e, nullptr, 1), ConfigError);
}

TEST_CASE("GA result JSON reports infinite violations as strings") {
    GaConfig cfg;
    cfg.seed = 3;
    cfg.population = 4;
    cfg.generations = 1;
    cfg.genome_length = 2;
    const auto r = evolve(cfg, [](const ActionSequence&, int) {
        Evaluation e;
        e.violations = {std::numeric_limits<double>::infinity()};
        return e;
    }, 4);
    const auto j = r.to_json([](ActionId a) { return std::to_string(a); });
    CHECK_FALSE(r.feasible);
    CHECK(j.dump().find("\"inf\"") != std::string::npos);
    CHECK(j.contains("timing"));
}
