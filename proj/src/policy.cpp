#include "rlcbs/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <random>

#include "rlcbs/parallel.hpp"
#include "rlcbs/rng.hpp"

namespace rlcbs {

std::vector<std::vector<double>> log_probs_batch(const Policy& policy, const std::vector<Observation>& obs,
                                                 int workers) {
    std::vector<std::vector<double>> out(obs.size());
    parallel_for(obs.size(), workers, [&](std::size_t i) { out[i] = policy.log_probs(obs[i]); });
    return out;
}

std::vector<double> log_softmax(const std::vector<double>& logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double l : logits) {
        sum += std::exp(l - m);
    }
    const double log_z = m + std::log(sum);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = logits[i] - log_z;
    }
    return out;
}

// ─── MLP ─────────────────────────────────────────────

void MlpWeights::validate() const {
    constexpr std::array<std::pair<int, int>, 3> shapes = {
        std::pair{kObservationSize, kHiddenSize}, std::pair{kHiddenSize, kHiddenSize},
        std::pair{kHiddenSize, kHeadSize}};
    if (layers.size() != shapes.size()) {
        throw ConfigError("policy net needs exactly 3 layers, got " + std::to_string(layers.size()));
    }
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        const auto& l = layers[i];
        if (l.rows != shapes[i].first || l.cols != shapes[i].second) {
            throw ConfigError("layer " + std::to_string(i) + " has shape " + std::to_string(l.rows) + "x" +
                              std::to_string(l.cols) + ", expected " + std::to_string(shapes[i].first) +
                              "x" + std::to_string(shapes[i].second));
        }
        if (l.weights.size() != static_cast<std::size_t>(l.rows) * l.cols ||
            l.bias.size() != static_cast<std::size_t>(l.cols)) {
            throw ConfigError("layer " + std::to_string(i) + " weight/bias length mismatch");
        }
    }
    if (normalizer.mean.size() != kObservationSize || normalizer.var.size() != kObservationSize) {
        throw ConfigError("normalizer stats must have 6 components");
    }
    if (std::any_of(normalizer.var.begin(), normalizer.var.end(), [](double v) { return !(v > 0.0); })) {
        throw ConfigError("normalizer variances must be > 0");
    }
    if (action_space_version != kActionSpaceVersion) {
        throw ConfigError("weights were trained for action space '" + action_space_version + "', expected '" +
                          kActionSpaceVersion + "'");
    }
}

std::vector<double> normalize(const Observation& obs, const NormalizerStats& stats) {
    std::vector<double> x(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        x[i] = (obs[i] - stats.mean.at(i)) / std::sqrt(stats.var.at(i) + kNormalizerEps);
    }
    return x;
}

namespace {

std::vector<double> dense(const DenseLayer& layer, const std::vector<double>& x, bool activate) {
    if (static_cast<int>(x.size()) != layer.rows) {
        throw ConfigError("layer input width mismatch");
    }
    std::vector<double> y(layer.bias);
    for (int i = 0; i < layer.rows; ++i) {
        const double xi = x[i];
        const double* row = layer.weights.data() + static_cast<std::size_t>(i) * layer.cols;
        for (int j = 0; j < layer.cols; ++j) {
            y[j] += xi * row[j];
        }
    }
    if (activate) {
        for (double& v : y) {
            v = std::tanh(v);
        }
    }
    return y;
}

}  // namespace

HeadLogits mlp_forward(const MlpWeights& weights, const std::vector<double>& x) {
    if (weights.layers.size() != 3) {
        throw ConfigError("policy net needs exactly 3 layers");
    }
    auto h = dense(weights.layers[0], x, true);
    h = dense(weights.layers[1], h, true);
    const auto out = dense(weights.layers[2], h, false);
    if (out.size() != kHeadSize) {
        throw ConfigError("policy net output width must be 15");
    }
    HeadLogits heads;
    heads.temp.assign(out.begin(), out.begin() + kTempLevelCount);
    heads.module.assign(out.begin() + kTempLevelCount, out.end());
    return heads;
}

std::vector<double> combine_heads(const std::vector<double>& module_logits,
                                  const std::vector<double>& temp_logits) {
    if (module_logits.size() != kModuleTypeCount || temp_logits.size() != kTempLevelCount) {
        throw ConfigError("head sizes must be 4 (module) and 11 (temperature)");
    }
    const auto lm = log_softmax(module_logits);
    const auto lt = log_softmax(temp_logits);
    std::vector<double> out(kActionCount);
    for (int a = 0; a < kActionCount; ++a) {
        out[a] = lm[a / kTempLevelCount] + lt[a % kTempLevelCount];
    }
    return out;
}

MlpWeights mlp_weights_from_json(const nlohmann::json& doc) {
    MlpWeights w;
    try {
        for (const auto& l : doc.at("layers")) {
            DenseLayer layer;
            layer.rows = l.at("rows").get<int>();
            layer.cols = l.at("cols").get<int>();
            layer.weights = l.at("weights_row_major").get<std::vector<double>>();
            layer.bias = l.at("bias").get<std::vector<double>>();
            w.layers.push_back(std::move(layer));
        }
        w.normalizer.mean = doc.at("normalizer").at("mean").get<std::vector<double>>();
        w.normalizer.var = doc.at("normalizer").at("var").get<std::vector<double>>();
        w.action_space_version = doc.at("action_space_version").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed weights document: ") + e.what());
    }
    w.validate();
    return w;
}

nlohmann::json mlp_weights_to_json(const MlpWeights& weights) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : weights.layers) {
        layers.push_back({{"rows", l.rows}, {"cols", l.cols}, {"weights_row_major", l.weights}, {"bias", l.bias}});
    }
    return {{"layers", layers},
            {"normalizer", {{"mean", weights.normalizer.mean}, {"var", weights.normalizer.var}}},
            {"action_space_version", weights.action_space_version}};
}

MlpWeights load_mlp_weights(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open weights file " + path.string());
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("weights file " + path.string() + " is not valid JSON: " + e.what());
    }
    return mlp_weights_from_json(doc);
}

namespace {

MlpWeights shaped_weights(const std::function<double()>& draw) {
    MlpWeights w;
    constexpr std::array<std::pair<int, int>, 3> shapes = {
        std::pair{kObservationSize, kHiddenSize}, std::pair{kHiddenSize, kHiddenSize},
        std::pair{kHiddenSize, kHeadSize}};
    for (auto [rows, cols] : shapes) {
        DenseLayer l{rows, cols, std::vector<double>(static_cast<std::size_t>(rows) * cols),
                     std::vector<double>(cols)};
        for (double& v : l.weights) {
            v = draw();
        }
        for (double& v : l.bias) {
            v = draw();
        }
        w.layers.push_back(std::move(l));
    }
    return w;
}

}  // namespace

MlpWeights random_mlp_weights(std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, scale);
    auto w = shaped_weights([&] { return normal(rng); });
    // Observation scales differ by orders of magnitude; stats keep the inputs near unit range.
    w.normalizer.mean = {0.5, 60.0, 60.0, 0.8, 0.8, 0.5};
    w.normalizer.var = {0.03, 900.0, 900.0, 0.2, 0.2, 0.09};
    return w;
}

MlpWeights zero_mlp_weights() {
    return shaped_weights([] { return 0.0; });
}

MlpPolicy::MlpPolicy(MlpWeights weights) : weights_(std::move(weights)) { weights_.validate(); }

std::vector<double> MlpPolicy::log_probs(const Observation& obs) const {
    if (obs.size() != kObservationSize) {
        throw ConfigError("mlp policy expects a 6-component observation");
    }
    const auto heads = mlp_forward(weights_, normalize(obs, weights_.normalizer));
    return combine_heads(heads.module, heads.temp);
}

// ─── Guide policies ──────────────────────────────────

HeuristicPolicy::HeuristicPolicy(double dbmc_init, double dbmc_target)
    : dbmc_init_(dbmc_init), dbmc_target_(dbmc_target) {
    if (!(dbmc_init_ > dbmc_target_)) {
        throw ConfigError("heuristic policy needs dbmc_init > dbmc_target");
    }
}

int HeuristicPolicy::preferred_temp_index(const Observation& obs) const {
    if (obs.size() != kObservationSize) {
        throw ConfigError("heuristic policy expects a 6-component observation");
    }
    const double sf = obs[0];
    const double dbmc_mean = 0.5 * (obs[3] + obs[4]);
    const double load = (dbmc_mean - dbmc_target_) / (dbmc_init_ - dbmc_target_);
    const double idx = std::round(10.0 * load * (0.5 + sf));
    return static_cast<int>(std::clamp(idx, 0.0, 10.0));
}

HeadLogits HeuristicPolicy::head_logits(const Observation& obs) const {
    const int pref = preferred_temp_index(obs);
    HeadLogits heads;
    heads.module.assign(kModuleLogits.begin(), kModuleLogits.end());
    heads.temp.resize(kTempLevelCount);
    for (int i = 0; i < kTempLevelCount; ++i) {
        const double d = i - pref;
        heads.temp[i] = -(d * d) / (2.0 * kTempSigma * kTempSigma);
    }
    return heads;
}

std::vector<double> HeuristicPolicy::log_probs(const Observation& obs) const {
    const auto heads = head_logits(obs);
    return combine_heads(heads.module, heads.temp);
}

RandomPolicy::RandomPolicy(int action_count, std::uint64_t seed, double spread)
    : action_count_(action_count), seed_(seed), spread_(spread) {
    if (action_count_ < 1) {
        throw ConfigError("policy needs at least one action");
    }
}

std::vector<double> RandomPolicy::log_probs(const Observation& obs) const {
    std::uint64_t h = splitmix64(seed_);
    for (double v : obs) {
        h = splitmix64(h ^ std::bit_cast<std::uint64_t>(v));
    }
    std::vector<double> logits(action_count_);
    for (int a = 0; a < action_count_; ++a) {
        h = splitmix64(h);
        logits[a] = spread_ * (2.0 * unit_double(h) - 1.0);
    }
    return log_softmax(logits);
}

UniformPolicy::UniformPolicy(int action_count) : action_count_(action_count) {
    if (action_count_ < 1) {
        throw ConfigError("policy needs at least one action");
    }
}

std::vector<double> UniformPolicy::log_probs(const Observation&) const {
    return std::vector<double>(action_count_, -std::log(static_cast<double>(action_count_)));
}

std::shared_ptr<const Policy> make_policy(const nlohmann::json& spec, int action_count,
                                          const EpisodeConfig& episode) {
    const std::string kind = spec.value("kind", action_count == kActionCount ? "heuristic" : "random");
    if (kind == "uniform") {
        return std::make_shared<UniformPolicy>(action_count);
    }
    if (kind == "random") {
        return std::make_shared<RandomPolicy>(action_count, spec.value("seed", std::uint64_t{0}));
    }
    if (action_count != kActionCount) {
        throw ConfigError("policy kind '" + kind + "' only applies to the 44-action dryer space");
    }
    if (kind == "heuristic") {
        return std::make_shared<HeuristicPolicy>(episode.dbmc_init, episode.dbmc_target);
    }
    if (kind == "mlp") {
        if (spec.contains("weights")) {
            return std::make_shared<MlpPolicy>(load_mlp_weights(spec["weights"].get<std::string>()));
        }
        if (spec.contains("seed")) {
            return std::make_shared<MlpPolicy>(random_mlp_weights(spec["seed"].get<std::uint64_t>()));
        }
        throw ConfigError("mlp policy needs 'weights' (path) or 'seed'");
    }
    throw ConfigError("unknown policy kind: " + kind);
}

}  // namespace rlcbs
