#include <doctest.h>

#include "../oracles.hpp"
#include "rlcbs/cache.hpp"
#include "rlcbs/kv_net.hpp"
#include "rlcbs/toy_env.hpp"

using namespace rlcbs;

namespace {
ToyEnv toy(std::uint64_t seed = 4) {
    ToyEnvSpec spec;
    spec.num_actions = 4;
    spec.horizon = 8;
    spec.num_states = 10;
    spec.seed = seed;
    return ToyEnv(spec);
}

EpisodeConfig toy_episode() {
    EpisodeConfig e;
    e.max_modules = 8;
    return e;
}
}  // namespace

TEST_CASE("in-memory store evicts the least recently used entry") {
    InMemoryStore store(2);
    store.set("a", "1");
    store.set("b", "2");
    CHECK(store.get("a") == "1");
    store.set("c", "3");
    CHECK(store.size() == 2);
    CHECK(store.evictions() == 1);
    CHECK_FALSE(store.get("b").has_value());
    CHECK(store.get("a") == "1");
    CHECK(store.get("c") == "3");
    InMemoryStore unbounded;
    for (int i = 0; i < 100; ++i) {
        unbounded.set(std::to_string(i), "x");
    }
    CHECK(unbounded.size() == 100);
}

TEST_CASE("canonical JSON sorts keys and prints round-trip doubles") {
    const auto a = nlohmann::json::parse(R"({"b": 1, "a": [0.1, 2]})");
    const auto b = nlohmann::json::parse(R"({"a": [0.1, 2], "b": 1})");
    CHECK(canonical_json(a) == canonical_json(b));
    CHECK(canonical_json(a).find(' ') == std::string::npos);
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("cache keys separate environments, episodes and prefixes") {
    const auto env_a = toy(1);
    const auto env_b = toy(2);
    const auto id_a = env_identity(env_a);
    const auto id_b = env_identity(env_b);
    const auto e = toy_episode();
    auto e2 = e;
    e2.dbmc_init = 1.4;
    const ActionSequence p = {1, 2};
    const ActionSequence q = {2, 1};
    CHECK(key_encode(id_a, e, p) == key_encode(id_a, e, p));
    CHECK(key_encode(id_a, e, p) != key_encode(id_b, e, p));
    CHECK(key_encode(id_a, e, p) != key_encode(id_a, e2, p));
    CHECK(key_encode(id_a, e, p) != key_encode(id_a, e, q));
}

TEST_CASE("cached rollouts reuse the longest prefix and count steps") {
    auto env = toy();
    RolloutCache cache(std::make_shared<InMemoryStore>());
    const auto e = toy_episode();
    const ActionSequence three = {0, 1, 2};
    const ActionSequence four = {0, 1, 2, 3};
    const auto r1 = cache.rollout(env, e, three);
    CHECK(r1.consumed == 3);
    CHECK(r1.cached_prefix == 0);
    const auto r2 = cache.rollout(env, e, four);
    CHECK(r2.cached_prefix == 3);
    const auto s = cache.stats();
    CHECK(s.hits == 1);
    CHECK(s.misses == 1);
    CHECK(s.env_steps_simulated == 4);
    CHECK(s.env_steps_saved == 3);
    CHECK(s.env_steps_replayed == 2);  // positions 1 and 2 of the first, cold rollout

    RolloutCache off(nullptr);
    auto env2 = toy();
    const auto u = off.rollout(env2, e, four);
    CHECK(u.state == r2.state);
    CHECK(u.status.reward == r2.status.reward);
    CHECK(off.stats().env_steps_replayed == 3);
    CHECK(off.stats().env_steps_simulated == 4);
    cache.reset_stats();
    CHECK(cache.stats().hits == 0);
}

TEST_CASE("rollouts stop at episode end") {
    auto env = toy();
    RolloutCache cache(std::make_shared<InMemoryStore>());
    auto e = toy_episode();
    const ActionSequence long_seq(12, 1);
    const auto r = cache.rollout(env, e, long_seq);
    CHECK(r.consumed == 8);
    CHECK(r.status.done);
}

TEST_CASE("step savings closed forms") {
    for (int T : {1, 5, 12}) {
        for (int n : {1, 2, 8}) {
            const auto [uncached, cached] = step_savings(T, n);
            CHECK(uncached == oracle::uncached_replayed_steps(T, n));
            CHECK(cached == oracle::cached_steps(T, n));
        }
    }
}

TEST_CASE("remote store talks to the key-value server") {
    KvServer server;
    server.start("127.0.0.1", 0);
    REQUIRE(server.port() > 0);
    RemoteStore store(server.address());
    CHECK_FALSE(store.get("missing").has_value());
    const std::string binary("a\nb\0c d", 7);
    store.set("key with spaces", binary);
    CHECK(store.get("key with spaces") == binary);
    CHECK(server.store()->size() == 1);

    auto env = toy();
    auto local_env = toy();
    RolloutCache remote(std::make_shared<RemoteStore>(server.address()));
    RolloutCache local(std::make_shared<InMemoryStore>());
    const ActionSequence seq = {3, 0, 2, 2, 1};
    const auto a = remote.rollout(env, toy_episode(), seq);
    const auto b = remote.rollout(env, toy_episode(), seq);
    const auto c = local.rollout(local_env, toy_episode(), seq);
    CHECK(a.state == c.state);
    CHECK(b.state == c.state);
    CHECK(b.cached_prefix == 5);
    server.stop();
}

TEST_CASE("an unreachable store degrades to uncached rollouts") {
    KvServer server;
    server.start("127.0.0.1", 0);
    const auto address = server.address();
    server.stop();
    auto env = toy();
    RolloutCache cache(std::make_shared<RemoteStore>(address));
    const ActionSequence seq = {1, 1, 1};
    const auto r = cache.rollout(env, toy_episode(), seq);
    CHECK(r.consumed == 3);
    CHECK(cache.stats().store_fallbacks >= 1);
}

TEST_CASE("store specs") {
    CHECK(make_store({{"backend", "none"}}) == nullptr);
    CHECK(make_store({{"backend", "memory"}}) != nullptr);
    CHECK_THROWS_AS((void)make_store({{"backend", "disk"}}), ConfigError);
}
