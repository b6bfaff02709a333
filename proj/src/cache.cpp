#include "rlcbs/cache.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>

#include <spdlog/spdlog.h>

#include "rlcbs/kv_net.hpp"

namespace rlcbs {

// ─── InMemoryStore ───────────────────────────────────

InMemoryStore::InMemoryStore(std::size_t max_entries) : max_entries_(max_entries) {}

std::optional<std::string> InMemoryStore::get(const std::string& key) {
    std::lock_guard lock(mutex_);
    auto it = map_.find(key);
    if (it == map_.end()) {
        return std::nullopt;
    }
    if (max_entries_ > 0) {
        lru_.splice(lru_.begin(), lru_, it->second.lru_pos);
    }
    return it->second.value;
}

void InMemoryStore::set(const std::string& key, const std::string& value) {
    std::lock_guard lock(mutex_);
    auto it = map_.find(key);
    if (it != map_.end()) {
        it->second.value = value;
        if (max_entries_ > 0) {
            lru_.splice(lru_.begin(), lru_, it->second.lru_pos);
        }
        return;
    }
    std::list<std::string>::iterator pos;
    if (max_entries_ > 0) {
        lru_.push_front(key);
        pos = lru_.begin();
    }
    map_.emplace(key, Entry{value, pos});
    if (max_entries_ > 0 && map_.size() > max_entries_) {
        map_.erase(lru_.back());
        lru_.pop_back();
        ++evictions_;
    }
}

std::size_t InMemoryStore::size() const {
    std::lock_guard lock(mutex_);
    return map_.size();
}

std::size_t InMemoryStore::evictions() const {
    std::lock_guard lock(mutex_);
    return evictions_;
}

// ─── Keys ────────────────────────────────────────────

namespace {

void write_canonical(const nlohmann::json& v, std::string& out) {
    using value_t = nlohmann::json::value_t;
    switch (v.type()) {
        case value_t::object: {
            out.push_back('{');
            bool first = true;
            for (const auto& [k, item] : v.items()) {  // std::map storage: already sorted
                if (!first) {
                    out.push_back(',');
                }
                first = false;
                out += nlohmann::json(k).dump();
                out.push_back(':');
                write_canonical(item, out);
            }
            out.push_back('}');
            break;
        }
        case value_t::array: {
            out.push_back('[');
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (i > 0) {
                    out.push_back(',');
                }
                write_canonical(v[i], out);
            }
            out.push_back(']');
            break;
        }
        case value_t::number_float: {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
            out += buf;
            break;
        }
        default:
            out += v.dump();
    }
}

}  // namespace

std::string canonical_json(const nlohmann::json& value) {
    std::string out;
    write_canonical(value, out);
    return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

nlohmann::json env_identity(const Environment& env) {
    auto id = env.describe();
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a64(canonical_json(id)));
    id["fingerprint"] = buf;
    return id;
}

std::string key_encode(const nlohmann::json& env_id, const EpisodeConfig& config,
                       std::span<const ActionId> prefix) {
    nlohmann::json doc = {{"actions", std::vector<ActionId>(prefix.begin(), prefix.end())},
                          {"env", env_id},
                          {"init", episode_config_to_json(config)}};
    return canonical_json(doc);
}

// ─── CacheStats ──────────────────────────────────────

nlohmann::json CacheStats::to_json() const {
    return {{"hits", hits},
            {"misses", misses},
            {"hit_rate", hit_rate()},
            {"env_steps_simulated", env_steps_simulated},
            {"env_steps_replayed", env_steps_replayed},
            {"env_steps_saved", env_steps_saved},
            {"store_fallbacks", store_fallbacks}};
}

CacheStats& CacheStats::operator+=(const CacheStats& o) {
    hits += o.hits;
    misses += o.misses;
    env_steps_simulated += o.env_steps_simulated;
    env_steps_replayed += o.env_steps_replayed;
    env_steps_saved += o.env_steps_saved;
    store_fallbacks += o.store_fallbacks;
    return *this;
}

// ─── RolloutCache ────────────────────────────────────

RolloutCache::RolloutCache(std::shared_ptr<KeyValueStore> store) : store_(std::move(store)) {}

void RolloutCache::count_steps(int from, int to, int length) {
    // Positions [from, to) were simulated; those before the request's last position
    // re-derive states an earlier request already produced.
    simulated_ += to - from;
    const int replay_end = std::min(to, length - 1);
    if (replay_end > from) {
        replayed_ += replay_end - from;
    }
}

RolloutResult RolloutCache::uncached(Environment& env, const EpisodeConfig& config,
                                     std::span<const ActionId> actions) {
    RolloutResult out;
    env.reset(config);
    out.status = env.status();
    const int n = static_cast<int>(actions.size());
    int i = 0;
    while (i < n && !out.status.terminal()) {
        out.status = env.step(actions[i]);
        ++i;
    }
    count_steps(0, i, n);
    out.consumed = i;
    out.state = env.get_state();
    return out;
}

RolloutResult RolloutCache::rollout(Environment& env, const EpisodeConfig& config,
                                    std::span<const ActionId> actions) {
    if (!store_) {
        ++misses_;
        return uncached(env, config, actions);
    }
    const int n = static_cast<int>(actions.size());
    try {
        const auto env_id = env_identity(env);
        int restored = 0;
        for (int len = n; len > 0; --len) {
            const auto bytes = store_->get(key_encode(env_id, config, actions.first(len)));
            if (!bytes) {
                continue;
            }
            try {
                env.set_state(*bytes);
                restored = len;
                break;
            } catch (const StateFormatError& e) {
                spdlog::debug("ignoring stale cache entry: {}", e.what());
            }
        }

        RolloutResult out;
        out.cached_prefix = restored;
        if (restored > 0) {
            ++hits_;
            saved_ += restored;
            out.status = env.status();
        } else {
            ++misses_;
            env.reset(config);
            out.status = env.status();
        }

        int i = restored;
        while (i < n && !out.status.terminal()) {
            out.status = env.step(actions[i]);
            ++i;
            store_->set(key_encode(env_id, config, actions.first(i)), env.get_state());
        }
        count_steps(restored, i, n);
        // A cached terminal prefix means the tail was never applicable.
        out.consumed = i;
        out.state = env.get_state();
        return out;
    } catch (const StoreUnavailable& e) {
        ++fallbacks_;
        std::call_once(warn_once_, [&] {
            spdlog::warn("rollout cache store unavailable ({}); continuing without cache", e.what());
        });
        return uncached(env, config, actions);
    }
}

CacheStats RolloutCache::stats() const {
    CacheStats s;
    s.hits = hits_.load();
    s.misses = misses_.load();
    s.env_steps_simulated = simulated_.load();
    s.env_steps_replayed = replayed_.load();
    s.env_steps_saved = saved_.load();
    s.store_fallbacks = fallbacks_.load();
    return s;
}

void RolloutCache::reset_stats() {
    hits_ = 0;
    misses_ = 0;
    simulated_ = 0;
    replayed_ = 0;
    saved_ = 0;
    fallbacks_ = 0;
}

std::pair<std::int64_t, std::int64_t> step_savings(int horizon, int beams) {
    if (horizon < 1 || beams < 1) {
        throw std::invalid_argument("step_savings needs T >= 1 and n_b >= 1");
    }
    const std::int64_t T = horizon;
    const std::int64_t nb = beams;
    return {T * (T - 1) / 2 * nb, T * nb};
}

std::shared_ptr<KeyValueStore> make_store(const nlohmann::json& spec) {
    const std::string backend = spec.value("backend", "memory");
    if (backend == "none") {
        return nullptr;
    }
    if (backend == "memory") {
        return std::make_shared<InMemoryStore>(spec.value("max_entries", std::size_t{0}));
    }
    if (backend == "remote") {
        if (!spec.contains("address")) {
            throw ConfigError("remote cache backend needs an 'address' (host:port)");
        }
        return std::make_shared<RemoteStore>(spec["address"].get<std::string>());
    }
    throw ConfigError("unknown cache backend: " + backend);
}

}  // namespace rlcbs
