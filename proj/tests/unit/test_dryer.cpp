#include <doctest.h>

#include <cmath>

#include "../oracles.hpp"
#include "rlcbs/dryer.hpp"

using namespace rlcbs;

namespace {
std::shared_ptr<const DryerParams> params() {
    static const auto p = std::make_shared<const DryerParams>(load_dryer_params(default_dryer_params_path()));
    return p;
}

EpisodeConfig episode(double sf, double dbmc_init = 1.5) {
    EpisodeConfig e;
    e.speed_factor = sf;
    e.dbmc_init = dbmc_init;
    return e;
}
}  // namespace

TEST_CASE("baseline energy interpolates linearly between table rows") {
    CHECK(q_sqp(0.5) == 855.7368);
    CHECK(q_sqp(0.25) == 879.1134);
    CHECK(q_sqp(0.75) == 825.6498);
    CHECK(q_sqp(0.275) == doctest::Approx(0.5 * (879.1134 + 874.8082)).epsilon(1e-14));
    CHECK(q_sqp(0.62) == doctest::Approx(844.7547 + 0.4 * (838.7919 - 844.7547)).epsilon(1e-14));
    CHECK_THROWS_AS((void)q_sqp(0.2), std::out_of_range);
    CHECK_THROWS_AS((void)q_sqp(0.8), std::out_of_range);
}

TEST_CASE("reward cases") {
    for (double sf : {0.25, 0.4, 0.5, 0.75}) {
        for (double q : {0.0, 500.0, 900.0}) {
            CHECK(dryer_reward(true, false, q, sf) == doctest::Approx(oracle::reward(true, false, q, q_sqp(sf))));
            CHECK(dryer_reward(false, true, q, sf) == doctest::Approx(oracle::reward(false, true, q, q_sqp(sf))));
            CHECK(dryer_reward(false, false, q, sf) == 0.0);
        }
    }
    CHECK(dryer_reward(false, true, 900.0, 0.5, 10.0) == doctest::Approx(855.7368 - 900.0 - 10.0));
}

TEST_CASE("speed factor maps linearly onto machine speed, SF 0 being fastest") {
    const DryerParams p;
    CHECK(sf_to_vm(0.0, p) == p.v_max);
    CHECK(sf_to_vm(1.0, p) == p.v_min);
    CHECK(sf_to_vm(0.5, p) == doctest::Approx(0.5 * (p.v_min + p.v_max)));
    CHECK(sf_to_vm(0.25, p) > sf_to_vm(0.75, p));
    CHECK_THROWS_AS((void)sf_to_vm(1.1, p), std::out_of_range);
}

TEST_CASE("DEP enhancement polynomial and its percent reading") {
    const std::vector<double> coeffs = {2952.4, -27003, 99171, -185349, 185596, -94421, 19133};
    for (double m : {0.1, 0.3, 0.7, 1.0, 1.5}) {
        double direct = 0.0;
        for (std::size_t k = 0; k < coeffs.size(); ++k) {
            direct += coeffs[k] * std::pow(m, static_cast<double>(k));
        }
        CHECK(dre_polynomial(m) == doctest::Approx(direct).epsilon(1e-9));
    }
    DryerParams percent;
    DryerParams literal;
    literal.dre_percent = false;
    CHECK(dep_dre(0.8, percent) == doctest::Approx(std::max(0.0, 0.01 * dre_polynomial(0.8))));
    CHECK(dep_dre(0.8, literal) == doctest::Approx(std::max(0.0, dre_polynomial(0.8))));
    CHECK(dep_dre(3.0, percent) == dep_dre(1.5, percent));  // clamped to the fit range
    CHECK(dep_dre(0.0, percent) == dep_dre(0.1, percent));
}

TEST_CASE("module boundaries follow the action") {
    const DryerParams p;
    const auto sjr = module_boundary(encode_action(ModuleType::SJR, 10), p);
    CHECK(sjr.hot_air);
    CHECK_FALSE(sjr.dep);
    CHECK(sjr.air_temp == 190.0);
    CHECK(sjr.h == p.h[1]);
    CHECK(sjr.air_velocity > 0.0);
    const auto dep = module_boundary(encode_action(ModuleType::DEP, 0), p);
    CHECK(dep.dep);
    CHECK_FALSE(dep.hot_air);
    CHECK(dep.air_temp == 80.0);
}

TEST_CASE("physics guard flags boiling, bad saturation and overdrying") {
    const DryerParams p;
    auto s = initial_paper_state(episode(0.5), p);
    CHECK(check_physics(s, p) == PhysicsFault::none);
    auto hot = s;
    hot.temp[3] = 100.0;
    CHECK(check_physics(hot, p) == PhysicsFault::boiling);
    auto wet = s;
    wet.dbmc[0] = 10.0;
    CHECK(check_physics(wet, p) == PhysicsFault::saturation);
    auto dry = s;
    for (double& m : dry.dbmc) {
        m = 0.05;
    }
    CHECK(check_physics(dry, p) == PhysicsFault::bound_water);
    auto nan = s;
    nan.temp[0] = std::nan("");
    CHECK(check_physics(nan, p) == PhysicsFault::non_finite);
}

TEST_CASE("parameter file validation") {
    const auto& p = *params();
    CHECK_NOTHROW(p.validate());
    CHECK(DryerParams::from_json(p.to_json()).to_json() == p.to_json());
    CHECK(p.dt < stable_dt_limit(p));
    auto doc = p.to_json();
    doc["porosity"] = 1.5;
    CHECK_THROWS_AS((void)DryerParams::from_json(doc), ConfigError);
    CHECK_THROWS_AS((void)load_dryer_params("/nonexistent/params.json"), ConfigError);
}

TEST_CASE("env reset validates the episode") {
    DryerEnv env(params());
    CHECK_THROWS_AS(env.reset(episode(0.2)), ConfigError);
    CHECK_THROWS_AS(env.reset(episode(0.5, 0.1)), ConfigError);
    auto e = episode(0.5);
    e.max_modules = 13;
    CHECK_THROWS_AS(env.reset(e), ConfigError);
    CHECK_THROWS_AS(env.step(0), std::logic_error);
    DryerOptions unstable;
    unstable.dt = 1.0;
    CHECK_THROWS_AS(DryerEnv(params(), unstable), ConfigError);
}

TEST_CASE("one module dries the sheet, costs energy and conserves mass") {
    DryerEnv env(params());
    const auto obs = env.reset(episode(0.5));
    REQUIRE(obs.size() == 6);
    CHECK(obs[0] == 0.5);
    CHECK(obs[5] == 0.0);
    const auto st = env.step(encode_action(ModuleType::SJR, 8));
    CHECK(st.observation[5] == doctest::Approx(1.0 / 12.0));
    CHECK(env.paper().mean_dbmc() < 1.5);
    CHECK(st.energy > 0.0);
    CHECK(st.reward == 0.0);
    CHECK(env.paper().position == doctest::Approx(params()->module_span()));
    CHECK(env.max_mass_error() <= 1e-8);
    CHECK(env.max_temp_seen() < 100.0);
}

TEST_CASE("hot fast sequence reaches the target and earns the baseline difference") {
    DryerEnv env(params());
    env.reset(episode(0.25));
    StepResult st;
    ActionSequence seq;
    for (int i = 0; i < 6; ++i) {
        seq.push_back(encode_action(ModuleType::SJR, 10));
    }
    for (int i = 0; i < 3; ++i) {
        seq.push_back(encode_action(ModuleType::PP, 10));
    }
    for (int i = 0; i < 3; ++i) {
        seq.push_back(encode_action(ModuleType::DEP, 10));
    }
    for (ActionId a : seq) {
        st = env.step(a);
        if (st.terminal()) {
            break;
        }
    }
    CHECK(st.done);
    CHECK_FALSE(st.truncated);
    CHECK(env.paper().mean_dbmc() <= 0.2);
    CHECK(st.reward == doctest::Approx(q_sqp(0.25) - st.energy).epsilon(1e-12));
    CHECK(st.episode_return == st.reward);
}

TEST_CASE("twelve cool modules leave the sheet wet and truncate with the penalty") {
    DryerEnv env(params());
    env.reset(episode(0.25));
    StepResult st;
    for (int i = 0; i < 12; ++i) {
        st = env.step(encode_action(ModuleType::SP, 0));
    }
    CHECK(st.truncated);
    CHECK_FALSE(st.failed);
    CHECK_FALSE(st.done);
    CHECK(st.reward == doctest::Approx(q_sqp(0.25) - st.energy - 1000.0).epsilon(1e-12));
    CHECK_THROWS_AS(env.step(0), EpisodeOver);
}

TEST_CASE("dryer state round-trips into a fresh instance") {
    DryerEnv env(params());
    env.reset(episode(0.4, 1.2));
    env.step(encode_action(ModuleType::SJR, 5));
    env.step(encode_action(ModuleType::DEP, 5));
    const auto bytes = env.get_state();
    DryerEnv other(params());
    other.set_state(bytes);
    CHECK(other.get_state() == bytes);
    CHECK(other.paper() == env.paper());
    const auto a = env.step(encode_action(ModuleType::PP, 7));
    const auto b = other.step(encode_action(ModuleType::PP, 7));
    CHECK(a.observation == b.observation);
    CHECK(a.energy == b.energy);
    CHECK_THROWS_AS(other.set_state(bytes.substr(0, bytes.size() / 2)), StateFormatError);
}

TEST_CASE("fixed sweep accepts speed factors outside the episode range") {
    EpisodeConfig e = episode(0.0);
    const auto r = simulate_fixed(params(), e, ActionSequence(12, encode_action(ModuleType::SJR, 0)));
    CHECK(r.fault == PhysicsFault::none);
    CHECK(r.final_state.module == 12);
    CHECK(r.final_state.mean_dbmc() < 1.5);
    CHECK(r.max_mass_error <= 1e-8);
}
