#include "rlcbs/core.hpp"

#include <charconv>
#include <cmath>

namespace rlcbs {

ActionId DryerAction::id() const { return encode_action(module, temp_index); }

std::string DryerAction::label() const { return action_label(id()); }

DryerAction decode_action(ActionId a) {
    if (a < 0 || a >= kActionCount) {
        throw InvalidAction("action id out of range: " + std::to_string(a));
    }
    return DryerAction{static_cast<ModuleType>(a / kTempLevelCount), a % kTempLevelCount};
}

ActionId encode_action(int module_index, int temp_index) {
    if (module_index < 0 || module_index >= kModuleTypeCount) {
        throw InvalidAction("module index out of range: " + std::to_string(module_index));
    }
    if (temp_index < 0 || temp_index >= kTempLevelCount) {
        throw InvalidAction("temperature index out of range: " + std::to_string(temp_index));
    }
    return module_index * kTempLevelCount + temp_index;
}

ActionId encode_action(ModuleType module, int temp_index) {
    return encode_action(static_cast<int>(module), temp_index);
}

std::string action_label(ActionId a) {
    const DryerAction d = decode_action(a);
    const auto temp = static_cast<int>(kTempLevels[d.temp_index]);
    return std::string(kModuleLabels[static_cast<int>(d.module)]) + "@" + std::to_string(temp);
}

ModuleType parse_module_type(std::string_view label) {
    for (int m = 0; m < kModuleTypeCount; ++m) {
        if (kModuleLabels[m] == label) {
            return static_cast<ModuleType>(m);
        }
    }
    throw InvalidAction("unknown module type: " + std::string(label));
}

ActionId parse_action_label(std::string_view label) {
    const auto at = label.find('@');
    if (at == std::string_view::npos) {
        throw InvalidAction("action label must look like SJR@124: " + std::string(label));
    }
    const ModuleType module = parse_module_type(label.substr(0, at));
    const auto temp_text = label.substr(at + 1);
    int temp = 0;
    const auto [ptr, ec] = std::from_chars(temp_text.data(), temp_text.data() + temp_text.size(), temp);
    if (ec != std::errc{} || ptr != temp_text.data() + temp_text.size()) {
        throw InvalidAction("bad temperature in action label: " + std::string(label));
    }
    for (int t = 0; t < kTempLevelCount; ++t) {
        if (static_cast<int>(kTempLevels[t]) == temp) {
            return encode_action(module, t);
        }
    }
    throw InvalidAction("temperature not on the action grid: " + std::string(label));
}

std::vector<ActionId> module_actions(ModuleType module) {
    std::vector<ActionId> ids;
    ids.reserve(kTempLevelCount);
    for (int t = 0; t < kTempLevelCount; ++t) {
        ids.push_back(encode_action(module, t));
    }
    return ids;
}

double accumulate_score(double prefix_score, double logp) {
    if (logp > 0.0) {
        throw std::invalid_argument("log-probability must be <= 0");
    }
    return prefix_score + logp;
}

}  // namespace rlcbs
