#include "rlcbs/environment.hpp"

#include <bit>
#include <cstring>

namespace rlcbs {

namespace {

constexpr std::string_view kMagic = "RLST";

template <typename U>
void put_le(std::string& out, U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
    }
}

template <typename U>
U get_le(std::string_view bytes, std::size_t& pos) {
    if (pos + sizeof(U) > bytes.size()) {
        throw StateFormatError("state bytes truncated");
    }
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        value |= static_cast<U>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    }
    pos += sizeof(U);
    return value;
}

}  // namespace

std::string encode_state(std::string_view tag, std::uint32_t version, std::span<const double> values) {
    std::string out;
    out.reserve(kMagic.size() + 4 + tag.size() + 4 + 8 + 8 * values.size());
    out.append(kMagic);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tag.size()));
    out.append(tag);
    put_le<std::uint32_t>(out, version);
    put_le<std::uint64_t>(out, values.size());
    for (double v : values) {
        put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
    return out;
}

std::vector<double> decode_state(std::string_view bytes, std::string_view tag, std::uint32_t version) {
    if (bytes.substr(0, kMagic.size()) != kMagic) {
        throw StateFormatError("not an environment state (bad magic)");
    }
    std::size_t pos = kMagic.size();
    const auto tag_len = get_le<std::uint32_t>(bytes, pos);
    if (pos + tag_len > bytes.size() || bytes.substr(pos, tag_len) != tag) {
        throw StateFormatError("state belongs to a different environment kind");
    }
    pos += tag_len;
    const auto stored_version = get_le<std::uint32_t>(bytes, pos);
    if (stored_version != version) {
        throw StateFormatError("state format version " + std::to_string(stored_version) +
                               " does not match " + std::to_string(version));
    }
    const auto count = get_le<std::uint64_t>(bytes, pos);
    if (bytes.size() - pos != count * 8) {
        throw StateFormatError("state payload length mismatch");
    }
    std::vector<double> values(count);
    for (auto& v : values) {
        v = std::bit_cast<double>(get_le<std::uint64_t>(bytes, pos));
    }
    return values;
}

void append_episode_config(std::vector<double>& out, const EpisodeConfig& config) {
    out.push_back(config.speed_factor);
    out.push_back(config.paper_temp_init);
    out.push_back(config.dbmc_init);
    out.push_back(config.dbmc_target);
    out.push_back(static_cast<double>(config.max_modules));
    out.push_back(config.ir_enabled ? 1.0 : 0.0);
}

EpisodeConfig read_episode_config(std::span<const double> values, std::size_t offset) {
    if (offset + kEpisodeConfigSlots > values.size()) {
        throw StateFormatError("state too short for episode config");
    }
    EpisodeConfig c;
    c.speed_factor = values[offset];
    c.paper_temp_init = values[offset + 1];
    c.dbmc_init = values[offset + 2];
    c.dbmc_target = values[offset + 3];
    c.max_modules = static_cast<int>(values[offset + 4]);
    c.ir_enabled = values[offset + 5] != 0.0;
    return c;
}

nlohmann::json episode_config_to_json(const EpisodeConfig& config) {
    return {{"speed_factor", config.speed_factor},     {"paper_temp_init", config.paper_temp_init},
            {"dbmc_init", config.dbmc_init},           {"dbmc_target", config.dbmc_target},
            {"max_modules", config.max_modules},       {"ir_enabled", config.ir_enabled}};
}

EpisodeConfig episode_config_from_json(const nlohmann::json& doc, const EpisodeConfig& defaults) {
    EpisodeConfig c = defaults;
    try {
        c.speed_factor = doc.value("speed_factor", c.speed_factor);
        c.paper_temp_init = doc.value("paper_temp_init", c.paper_temp_init);
        c.dbmc_init = doc.value("dbmc_init", c.dbmc_init);
        c.dbmc_target = doc.value("dbmc_target", c.dbmc_target);
        c.max_modules = doc.value("max_modules", c.max_modules);
        c.ir_enabled = doc.value("ir_enabled", c.ir_enabled);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad episode config: ") + e.what());
    }
    if (c.max_modules < 1) {
        throw ConfigError("max_modules must be >= 1");
    }
    return c;
}

}  // namespace rlcbs
