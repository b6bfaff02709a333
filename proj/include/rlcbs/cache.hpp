#pragma once

#include <atomic>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include <json.hpp>

#include "rlcbs/environment.hpp"

namespace rlcbs {

// ─── Key-value stores ────────────────────────────────

class StoreUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Byte-string store. Operations are atomic per key; values for a key are always
/// identical, so concurrent writers cannot disagree.
class KeyValueStore {
public:
    virtual ~KeyValueStore() = default;
    [[nodiscard]] virtual std::optional<std::string> get(const std::string& key) = 0;
    virtual void set(const std::string& key, const std::string& value) = 0;
};

/// In-process map. max_entries = 0 means unbounded; otherwise least-recently-used
/// entries are evicted.
class InMemoryStore final : public KeyValueStore {
public:
    explicit InMemoryStore(std::size_t max_entries = 0);
    [[nodiscard]] std::optional<std::string> get(const std::string& key) override;
    void set(const std::string& key, const std::string& value) override;
    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] std::size_t evictions() const;

private:
    struct Entry {
        std::string value;
        std::list<std::string>::iterator lru_pos;
    };
    mutable std::mutex mutex_;
    std::size_t max_entries_;
    std::size_t evictions_ = 0;
    std::unordered_map<std::string, Entry> map_;
    std::list<std::string> lru_;  // front = most recent
};

// ─── Keys ────────────────────────────────────────────

/// Canonical JSON: sorted object keys, no whitespace, doubles as %.17g.
[[nodiscard]] std::string canonical_json(const nlohmann::json& value);

/// 64-bit FNV-1a.
[[nodiscard]] std::uint64_t fnv1a64(std::string_view bytes);

/// Environment identity plus a fingerprint of it.
[[nodiscard]] nlohmann::json env_identity(const Environment& env);

[[nodiscard]] std::string key_encode(const nlohmann::json& env_id, const EpisodeConfig& config,
                                     std::span<const ActionId> prefix);

// ─── Rollout cache ───────────────────────────────────

struct CacheStats {
    std::int64_t hits = 0;                  // lookups that found a non-empty cached prefix
    std::int64_t misses = 0;                // lookups that had to start from reset
    std::int64_t env_steps_simulated = 0;   // every env.step executed
    std::int64_t env_steps_replayed = 0;    // steps re-simulating an earlier position of the request
    std::int64_t env_steps_saved = 0;       // steps skipped by restoring a cached prefix
    std::int64_t store_fallbacks = 0;       // rollouts run uncached because the store failed

    [[nodiscard]] double hit_rate() const {
        const auto n = hits + misses;
        return n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n);
    }
    [[nodiscard]] nlohmann::json to_json() const;
    CacheStats& operator+=(const CacheStats& other);
};

struct RolloutResult {
    StepResult status;
    std::string state;       // env.get_state() after the rollout
    int consumed = 0;        // actions applied (fewer than requested when the episode ended early)
    int cached_prefix = 0;   // length of the restored prefix
};

/// Longest-prefix memoized rollout over a deterministic environment. With a null store
/// every call is a fresh reset-and-replay, which is the uncached reference behavior.
class RolloutCache {
public:
    explicit RolloutCache(std::shared_ptr<KeyValueStore> store);

    /// Leaves `env` positioned after the rollout. Safe to call concurrently as long as
    /// each caller passes its own env instance.
    RolloutResult rollout(Environment& env, const EpisodeConfig& config, std::span<const ActionId> actions);

    [[nodiscard]] bool enabled() const { return store_ != nullptr; }
    [[nodiscard]] CacheStats stats() const;
    void reset_stats();

private:
    RolloutResult uncached(Environment& env, const EpisodeConfig& config, std::span<const ActionId> actions);
    void count_steps(int from, int to, int length);

    std::shared_ptr<KeyValueStore> store_;
    std::atomic<std::int64_t> hits_{0};
    std::atomic<std::int64_t> misses_{0};
    std::atomic<std::int64_t> simulated_{0};
    std::atomic<std::int64_t> replayed_{0};
    std::atomic<std::int64_t> saved_{0};
    std::atomic<std::int64_t> fallbacks_{0};
    std::once_flag warn_once_;
};

/// Theoretical single-thread step totals for a full search: (uncached, cached) =
/// (T(T-1)n_b/2, T n_b).
[[nodiscard]] std::pair<std::int64_t, std::int64_t> step_savings(int horizon, int beams);

/// Builds a store from a run-config block {backend: memory|remote|none, address, max_entries}.
/// Returns null for "none".
[[nodiscard]] std::shared_ptr<KeyValueStore> make_store(const nlohmann::json& spec);

}  // namespace rlcbs
