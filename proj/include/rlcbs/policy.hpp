#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlcbs/core.hpp"

namespace rlcbs {

/// Maps an observation to log-probabilities over the action space. Entries are finite
/// or -inf and exp-sum to 1. Implementations are read-only after construction and
/// safe to call from several threads.
class Policy {
public:
    virtual ~Policy() = default;
    [[nodiscard]] virtual std::vector<double> log_probs(const Observation& obs) const = 0;
    [[nodiscard]] virtual int action_count() const = 0;
    [[nodiscard]] virtual std::string name() const = 0;
};

/// Evaluates the policy on every observation; workers > 1 fans out over OpenMP.
[[nodiscard]] std::vector<std::vector<double>> log_probs_batch(const Policy& policy,
                                                               const std::vector<Observation>& obs,
                                                               int workers);

/// Plain log-softmax with max subtraction.
[[nodiscard]] std::vector<double> log_softmax(const std::vector<double>& logits);

// ─── MLP ─────────────────────────────────────────────

inline constexpr int kObservationSize = 6;
inline constexpr int kHiddenSize = 64;
inline constexpr int kHeadSize = kTempLevelCount + kModuleTypeCount;  // 15
inline constexpr double kNormalizerEps = 1e-8;
inline constexpr const char* kActionSpaceVersion = "modules4-temps11-v1";

struct DenseLayer {
    int rows = 0;                    // input width
    int cols = 0;                    // output width
    std::vector<double> weights;     // row-major [rows][cols]
    std::vector<double> bias;        // [cols]
};

struct NormalizerStats {
    std::vector<double> mean = std::vector<double>(kObservationSize, 0.0);
    std::vector<double> var = std::vector<double>(kObservationSize, 1.0);
};

struct MlpWeights {
    std::vector<DenseLayer> layers;  // 6x64, 64x64, 64x15
    NormalizerStats normalizer;
    std::string action_space_version = kActionSpaceVersion;

    /// Throws ConfigError unless the shapes are exactly those of the policy net.
    void validate() const;
};

struct HeadLogits {
    std::vector<double> module;  // 4
    std::vector<double> temp;    // 11
};

[[nodiscard]] std::vector<double> normalize(const Observation& obs, const NormalizerStats& stats);
[[nodiscard]] HeadLogits mlp_forward(const MlpWeights& weights, const std::vector<double>& x);
[[nodiscard]] std::vector<double> combine_heads(const std::vector<double>& module_logits,
                                                const std::vector<double>& temp_logits);

[[nodiscard]] MlpWeights mlp_weights_from_json(const nlohmann::json& doc);
[[nodiscard]] nlohmann::json mlp_weights_to_json(const MlpWeights& weights);
[[nodiscard]] MlpWeights load_mlp_weights(const std::filesystem::path& path);
/// Gaussian-initialized weights for tests and smoke runs.
[[nodiscard]] MlpWeights random_mlp_weights(std::uint64_t seed, double scale = 0.5);
[[nodiscard]] MlpWeights zero_mlp_weights();

class MlpPolicy final : public Policy {
public:
    explicit MlpPolicy(MlpWeights weights);
    [[nodiscard]] std::vector<double> log_probs(const Observation& obs) const override;
    [[nodiscard]] int action_count() const override { return kActionCount; }
    [[nodiscard]] std::string name() const override { return "mlp"; }
    [[nodiscard]] const MlpWeights& weights() const { return weights_; }

private:
    MlpWeights weights_;
};

// ─── Guide policies ──────────────────────────────────

/// Hand-written dryer guide: prefers SJR and an air temperature that scales with the
/// remaining drying load and the machine speed.
class HeuristicPolicy final : public Policy {
public:
    explicit HeuristicPolicy(double dbmc_init = 1.5, double dbmc_target = 0.2);
    [[nodiscard]] std::vector<double> log_probs(const Observation& obs) const override;
    [[nodiscard]] int action_count() const override { return kActionCount; }
    [[nodiscard]] std::string name() const override { return "heuristic"; }

    [[nodiscard]] int preferred_temp_index(const Observation& obs) const;
    [[nodiscard]] HeadLogits head_logits(const Observation& obs) const;

    static constexpr double kTempSigma = 1.5;
    static constexpr std::array<double, kModuleTypeCount> kModuleLogits = {1.0, 2.0, 0.0, -1.0};

private:
    double dbmc_init_;
    double dbmc_target_;
};

/// Deterministic pseudo-random distribution per observation (hash of the observation
/// bits and a seed). Useful for exercising search without a trained model.
class RandomPolicy final : public Policy {
public:
    RandomPolicy(int action_count, std::uint64_t seed, double spread = 2.0);
    [[nodiscard]] std::vector<double> log_probs(const Observation& obs) const override;
    [[nodiscard]] int action_count() const override { return action_count_; }
    [[nodiscard]] std::string name() const override { return "random"; }

private:
    int action_count_;
    std::uint64_t seed_;
    double spread_;
};

class UniformPolicy final : public Policy {
public:
    explicit UniformPolicy(int action_count);
    [[nodiscard]] std::vector<double> log_probs(const Observation& obs) const override;
    [[nodiscard]] int action_count() const override { return action_count_; }
    [[nodiscard]] std::string name() const override { return "uniform"; }

private:
    int action_count_;
};

/// Builds a policy from a run-config block {kind: heuristic|mlp|random|uniform, weights, seed}.
[[nodiscard]] std::shared_ptr<const Policy> make_policy(const nlohmann::json& spec, int action_count,
                                                        const EpisodeConfig& episode);

}  // namespace rlcbs
