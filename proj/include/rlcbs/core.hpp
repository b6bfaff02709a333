#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rlcbs {

using ActionId = int;
using ActionSequence = std::vector<ActionId>;
using Observation = std::vector<double>;

class InvalidAction : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ─── Dryer action space ──────────────────────────────
// Combined id a = module_index * 11 + temp_index.
//   0-10 PP, 11-21 SJR, 22-32 DEP, 33-43 SP

enum class ModuleType : std::uint8_t { PP = 0, SJR = 1, DEP = 2, SP = 3 };

inline constexpr int kModuleTypeCount = 4;
inline constexpr int kTempLevelCount = 11;
inline constexpr int kActionCount = kModuleTypeCount * kTempLevelCount;  // 44

inline constexpr std::array<double, kTempLevelCount> kTempLevels = {
    80.0, 91.0, 102.0, 113.0, 124.0, 135.0, 146.0, 157.0, 168.0, 179.0, 190.0};

inline constexpr std::array<std::string_view, kModuleTypeCount> kModuleLabels = {
    "PP", "SJR", "DEP", "SP"};

struct DryerAction {
    ModuleType module = ModuleType::PP;
    int temp_index = 0;

    [[nodiscard]] double temp_celsius() const { return kTempLevels.at(temp_index); }
    [[nodiscard]] ActionId id() const;
    [[nodiscard]] std::string label() const;
    bool operator==(const DryerAction&) const = default;
};

[[nodiscard]] DryerAction decode_action(ActionId a);
[[nodiscard]] ActionId encode_action(ModuleType module, int temp_index);
[[nodiscard]] ActionId encode_action(int module_index, int temp_index);

// "SJR@124"
[[nodiscard]] std::string action_label(ActionId a);
[[nodiscard]] ActionId parse_action_label(std::string_view label);
[[nodiscard]] ModuleType parse_module_type(std::string_view label);

// All action ids for one module type, ascending.
[[nodiscard]] std::vector<ActionId> module_actions(ModuleType module);

[[nodiscard]] inline bool is_module(ActionId a, ModuleType m) {
    return a / kTempLevelCount == static_cast<int>(m);
}

// Log-domain beam score extension; logp must be <= 0.
[[nodiscard]] double accumulate_score(double prefix_score, double logp);

// ─── Episode configuration ───────────────────────────

struct EpisodeConfig {
    double speed_factor = 0.5;
    double paper_temp_init = 20.0;  // °C
    double dbmc_init = 1.5;
    double dbmc_target = 0.2;
    int max_modules = 12;
    bool ir_enabled = false;

    bool operator==(const EpisodeConfig&) const = default;
};

}  // namespace rlcbs
