#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlcbs/cache.hpp"
#include "rlcbs/dryer.hpp"
#include "rlcbs/search.hpp"
#include "rlcbs/toy_env.hpp"

namespace rlcbs {

/// Process exit codes of the command-line front-end.
enum ExitCode : int { kExitOk = 0, kExitInfeasible = 2, kExitConfig = 3, kExitEnvironment = 4 };

/// Raised when an environment cannot be built or misbehaves during a run.
class EnvironmentFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kResultSchema = "rlcbs-result-v1";
inline constexpr std::string_view kCompareSchema = "rlcbs-compare-v1";

struct RunConfig {
    std::vector<std::string> methods = {"rlcbs"};  // rlcbs | greedy | ga | brute
    std::string environment = "dryer";             // dryer | toy
    std::vector<double> speed_factors = {0.5};
    std::vector<int> n_b_schedule = {2, 4, 8};
    nlohmann::json constraints;  // null = all dryer design rules for the dryer, none for the toy
    bool include_greedy_seed = true;
    bool refine = true;
    bool verify = false;
    std::optional<std::uint64_t> seed;
    int workers = 1;
    int max_length = 12;
    nlohmann::json policy = {{"kind", "heuristic"}};
    nlohmann::json cache = {{"backend", "memory"}};
    std::string dryer_params;  // empty = shipped parameter file
    double dt = 0.0;           // 0 = parameter file value
    EpisodeConfig episode;
    ToyEnvSpec toy;
    int ga_population = 32;
    int ga_generations = 100;
    int ga_genome_length = 0;  // 0 = length of the best RLCBS solution for the same SF, else max_length
    std::string output_dir;    // empty = do not write files
    bool write_traces = false;

    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
    /// Unknown keys are rejected so typos surface as config errors.
    [[nodiscard]] static RunConfig from_json(const nlohmann::json& doc);
};

[[nodiscard]] RunConfig load_run_config(const std::filesystem::path& path);

/// Constraint specs registering all three dryer design rules.
[[nodiscard]] nlohmann::json default_dryer_constraint_specs();

/// Builds the environment prototype described by the config.
[[nodiscard]] std::shared_ptr<const Environment> make_environment(const RunConfig& config);

struct SolveSummary {
    std::vector<nlohmann::json> records;
    int feasible = 0;
    [[nodiscard]] int exit_code() const { return records.empty() || feasible > 0 ? kExitOk : kExitInfeasible; }
};

/// Runs every configured method over the SF grid and n_b schedule. One record per
/// (method, SF, n_b); written to output_dir when set.
[[nodiscard]] SolveSummary cmd_solve(const RunConfig& config);

/// Record minus its wall-time fields, for determinism checks.
[[nodiscard]] nlohmann::json strip_timing(nlohmann::json record);

/// Loads every *.json record under the given directories (non-recursive), sorted by path.
[[nodiscard]] std::vector<nlohmann::json> load_records(const std::vector<std::filesystem::path>& dirs);

inline constexpr std::string_view kCompareHeader =
    "v_m,greedy_R,greedy_time_s,rlcbs_n_b,rlcbs_R,rlcbs_cumulative_time_s,rlcbs_n_dryers,ga_R,ga_time_s";

/// Per-SF comparison table with an average row. Throws ConfigError when the records come
/// from different environment versions.
[[nodiscard]] std::string compare_csv(const std::vector<nlohmann::json>& records);

struct BenchCacheRow {
    int horizon = 0;
    int n_b = 0;
    int workers = 1;
    bool cache_enabled = true;
    long long measured = 0;     // simulated steps with cache on, replayed steps with cache off
    long long theoretical = 0;  // T n_b or T (T - 1) n_b / 2
    long long simulated = 0;
    long long replayed = 0;
    bool identical = true;      // same sequence and reward as the serial cached run
    double wall_time_s = 0.0;
};

/// Full constrained-beam runs on a toy environment with |A| = 8, measuring step counters.
[[nodiscard]] std::vector<BenchCacheRow> cmd_bench_cache(int horizon, const std::vector<int>& n_bs, int workers,
                                                         std::uint64_t seed = 1);
[[nodiscard]] nlohmann::json bench_rows_to_json(const std::vector<BenchCacheRow>& rows);

/// Exhaustive optimum on the toy environment.
[[nodiscard]] nlohmann::json cmd_brute(const ToyEnvSpec& spec, const nlohmann::json& constraint_specs);

/// Replays a sequence on a dryer env and writes the nodal trace as CSV.
void write_dryer_trace(const DryerEnv& prototype, const EpisodeConfig& episode, const ActionSequence& actions,
                       std::ostream& out, double interval = 0.5);

}  // namespace rlcbs
