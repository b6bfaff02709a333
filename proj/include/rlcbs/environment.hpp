#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rlcbs/core.hpp"

namespace rlcbs {

class StateFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EpisodeOver : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct StepResult {
    Observation observation;
    double reward = 0.0;          // reward of the last step
    double episode_return = 0.0;  // sum of rewards so far
    double energy = 0.0;          // accumulated process energy, kJ/m² (0 for envs without one)
    bool done = false;            // reached the goal condition
    bool truncated = false;       // ran out of steps or failed
    bool failed = false;          // simulation failure (subset of truncated)
    int t = 0;                    // steps taken

    [[nodiscard]] bool terminal() const { return done || truncated; }
};

/// Deterministic, serializable environment. Identical state + action must give a
/// bit-identical successor state; set_state(get_state()) must be an exact restore.
class Environment {
public:
    virtual ~Environment() = default;

    virtual Observation reset(const EpisodeConfig& config) = 0;
    virtual StepResult step(ActionId action) = 0;
    [[nodiscard]] virtual StepResult status() const = 0;

    [[nodiscard]] virtual std::string get_state() const = 0;
    /// Throws StateFormatError when the bytes come from another env kind or format version.
    virtual void set_state(std::string_view bytes) = 0;

    [[nodiscard]] virtual int action_count() const = 0;
    [[nodiscard]] virtual std::string action_label(ActionId a) const = 0;

    /// Identity used in cache keys: env kind, format version, parameter fingerprint.
    [[nodiscard]] virtual nlohmann::json describe() const = 0;

    /// Fresh instance sharing the same (immutable) parameters.
    [[nodiscard]] virtual std::unique_ptr<Environment> clone() const = 0;
};

// ─── State byte format ───────────────────────────────
// "RLST" | u32 tag length | tag bytes | u32 version | u64 count | count x f64
// All integers and doubles little-endian.

[[nodiscard]] std::string encode_state(std::string_view tag, std::uint32_t version,
                                       std::span<const double> values);

/// Returns the scalar payload; throws StateFormatError on any mismatch.
[[nodiscard]] std::vector<double> decode_state(std::string_view bytes, std::string_view tag,
                                               std::uint32_t version);

// EpisodeConfig as a fixed block of doubles, embedded in every env state so a fresh
// instance can be restored without a prior reset.
inline constexpr std::size_t kEpisodeConfigSlots = 6;
void append_episode_config(std::vector<double>& out, const EpisodeConfig& config);
[[nodiscard]] EpisodeConfig read_episode_config(std::span<const double> values, std::size_t offset);
[[nodiscard]] nlohmann::json episode_config_to_json(const EpisodeConfig& config);
[[nodiscard]] EpisodeConfig episode_config_from_json(const nlohmann::json& doc,
                                                     const EpisodeConfig& defaults = {});

}  // namespace rlcbs
