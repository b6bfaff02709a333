#include "rlcbs/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "rlcbs/ga.hpp"

namespace rlcbs {

namespace {

const std::set<std::string> kKnownKeys = {
    "method",          "environment",    "speed_factors",  "speed_factor",  "n_b_schedule",
    "constraints",     "include_greedy_seed", "refine",   "verify",        "ir_enabled",
    "seed",            "workers",        "max_length",     "policy",        "cache",
    "dryer_params",    "dt",             "episode",        "toy",           "ga",
    "output_dir",      "write_traces"};

template <typename T>
T field(const nlohmann::json& doc, const char* key, T fallback) {
    if (!doc.contains(key)) {
        return fallback;
    }
    try {
        return doc.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config field '") + key + "' has the wrong type");
    }
}

std::string sf_tag(double sf) { return fmt::format("{:.3f}", sf); }

/// Shortest round-trip representation for CSV cells.
std::string number_cell(double v) { return fmt::format("{}", v); }

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

ConstraintBundle resolve_constraints(const RunConfig& config) {
    if (config.constraints.is_null()) {
        return config.environment == "dryer" ? parse_constraint_specs(default_dryer_constraint_specs())
                                             : ConstraintBundle{};
    }
    return parse_constraint_specs(config.constraints);
}

std::shared_ptr<const Policy> resolve_policy(const RunConfig& config, const Environment& env,
                                             const EpisodeConfig& episode) {
    if (config.policy.is_object() && config.policy.value("kind", "") == "dp_oracle") {
        const auto* toy = dynamic_cast<const ToyEnv*>(&env);
        if (toy == nullptr) {
            throw ConfigError("policy 'dp_oracle' requires the toy environment");
        }
        return std::make_shared<TabularPolicy>(dp_oracle_policy(toy->tables().spec));
    }
    auto spec = config.policy;
    if (config.seed && spec.is_object() && !spec.contains("seed")) {
        spec["seed"] = *config.seed;
    }
    return make_policy(spec, env.action_count(), episode);
}

nlohmann::json record_header(const std::string& method, const Environment& env, const RunConfig& config,
                             std::optional<double> sf) {
    const auto id = env_identity(env);
    nlohmann::json r;
    r["schema"] = kResultSchema;
    r["method"] = method;
    r["environment"] = id.at("kind");
    r["env_fingerprint"] = id.at("fingerprint");
    r["speed_factor"] = sf ? nlohmann::json(*sf) : nlohmann::json();
    r["v_m"] = sf && config.environment == "dryer" ? nlohmann::json(sf_to_vm(*sf)) : nlohmann::json();
    r["seed"] = config.seed ? nlohmann::json(*config.seed) : nlohmann::json();
    return r;
}

void merge_into(nlohmann::json& record, const nlohmann::json& result) {
    for (const auto& [k, v] : result.items()) {
        record[k] = v;
    }
}

void write_record(const RunConfig& config, const std::string& name, const nlohmann::json& record) {
    if (config.output_dir.empty()) {
        return;
    }
    const std::filesystem::path dir(config.output_dir);
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / name);
    if (!out) {
        throw std::runtime_error("cannot write " + (dir / name).string());
    }
    out << record.dump(2) << '\n';
}

std::string record_name(const std::string& method, std::optional<double> sf, std::optional<int> n_b) {
    std::string name = method;
    if (sf) {
        name += "_sf" + sf_tag(*sf);
    }
    if (n_b) {
        name += fmt::format("_nb{:03d}", *n_b);
    }
    return name + ".json";
}

}  // namespace

// ─── RunConfig ───────────────────────────────────────

nlohmann::json default_dryer_constraint_specs() {
    return nlohmann::json::parse(R"([
        {"type": "max_count", "actions": ["SJR"], "n": 6},
        {"type": "min_count", "actions": ["DEP"], "n": 3},
        {"type": "temp_continuity"}
    ])");
}

void RunConfig::validate() const {
    static const std::set<std::string> known_methods = {"rlcbs", "greedy", "ga", "brute"};
    if (methods.empty()) {
        throw ConfigError("config field 'method': at least one method is required");
    }
    for (const auto& m : methods) {
        if (known_methods.count(m) == 0) {
            throw ConfigError("config field 'method': unknown method '" + m + "'");
        }
    }
    if (environment != "dryer" && environment != "toy") {
        throw ConfigError("config field 'environment' must be 'dryer' or 'toy'");
    }
    if (n_b_schedule.empty()) {
        throw ConfigError("config field 'n_b_schedule' must not be empty");
    }
    for (std::size_t i = 0; i < n_b_schedule.size(); ++i) {
        if (n_b_schedule[i] < 1 || (i > 0 && n_b_schedule[i] <= n_b_schedule[i - 1])) {
            throw ConfigError("config field 'n_b_schedule' must be positive and strictly increasing");
        }
    }
    if (environment == "dryer") {
        if (speed_factors.empty()) {
            throw ConfigError("config field 'speed_factors' must not be empty");
        }
        for (double sf : speed_factors) {
            if (!(sf >= 0.25 && sf <= 0.75)) {
                throw ConfigError("config field 'speed_factors': " + number_cell(sf) + " outside [0.25, 0.75]");
            }
        }
        for (const auto& m : methods) {
            if (m == "brute") {
                throw ConfigError("config field 'method': brute requires the toy environment");
            }
        }
    } else {
        toy.validate();
        for (const auto& m : methods) {
            if (m == "ga") {
                throw ConfigError("config field 'method': ga requires the dryer environment");
            }
        }
    }
    if (workers < 1) {
        throw ConfigError("config field 'workers' must be >= 1");
    }
    if (max_length < 1) {
        throw ConfigError("config field 'max_length' must be >= 1");
    }
    if (std::find(methods.begin(), methods.end(), "ga") != methods.end() && !seed) {
        throw ConfigError("config field 'seed' is required for the ga method");
    }
    if (ga_population < 2 || ga_generations < 0 || ga_genome_length < 0) {
        throw ConfigError("config field 'ga' has out-of-range values");
    }
    (void)resolve_constraints(*this);
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["method"] = methods;
    j["environment"] = environment;
    j["speed_factors"] = speed_factors;
    j["n_b_schedule"] = n_b_schedule;
    j["constraints"] = constraints;
    j["include_greedy_seed"] = include_greedy_seed;
    j["refine"] = refine;
    j["verify"] = verify;
    j["ir_enabled"] = episode.ir_enabled;
    j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json();
    j["workers"] = workers;
    j["max_length"] = max_length;
    j["policy"] = policy;
    j["cache"] = cache;
    j["dryer_params"] = dryer_params;
    j["dt"] = dt;
    j["episode"] = episode_config_to_json(episode);
    j["toy"] = toy.to_json();
    j["ga"] = {{"population", ga_population}, {"generations", ga_generations}, {"genome_length", ga_genome_length}};
    j["output_dir"] = output_dir;
    j["write_traces"] = write_traces;
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) {
        throw ConfigError("run config must be a JSON object");
    }
    for (const auto& [key, value] : doc.items()) {
        if (kKnownKeys.count(key) == 0) {
            throw ConfigError("unknown config field '" + key + "'");
        }
    }
    RunConfig c;
    if (doc.contains("method")) {
        const auto& m = doc["method"];
        if (m.is_string()) {
            c.methods = {m.get<std::string>()};
        } else {
            c.methods = field<std::vector<std::string>>(doc, "method", {});
        }
    }
    c.environment = field<std::string>(doc, "environment", c.environment);
    if (doc.contains("speed_factor")) {
        c.speed_factors = {field<double>(doc, "speed_factor", 0.5)};
    }
    c.speed_factors = field<std::vector<double>>(doc, "speed_factors", c.speed_factors);
    c.n_b_schedule = field<std::vector<int>>(doc, "n_b_schedule", c.n_b_schedule);
    if (doc.contains("constraints")) {
        c.constraints = doc["constraints"];
    }
    c.include_greedy_seed = field<bool>(doc, "include_greedy_seed", c.include_greedy_seed);
    c.refine = field<bool>(doc, "refine", c.refine);
    c.verify = field<bool>(doc, "verify", c.verify);
    if (doc.contains("seed") && !doc["seed"].is_null()) {
        c.seed = field<std::uint64_t>(doc, "seed", 0);
    }
    c.workers = field<int>(doc, "workers", c.workers);
    c.max_length = field<int>(doc, "max_length", c.max_length);
    if (doc.contains("policy")) {
        c.policy = doc["policy"];
    }
    if (doc.contains("cache")) {
        c.cache = doc["cache"];
    }
    c.dryer_params = field<std::string>(doc, "dryer_params", c.dryer_params);
    c.dt = field<double>(doc, "dt", c.dt);
    if (doc.contains("episode")) {
        c.episode = episode_config_from_json(doc["episode"], c.episode);
    }
    c.episode.ir_enabled = field<bool>(doc, "ir_enabled", c.episode.ir_enabled);
    if (doc.contains("toy")) {
        c.toy = ToyEnvSpec::from_json(doc["toy"]);
    }
    if (doc.contains("ga")) {
        const auto& ga = doc["ga"];
        c.ga_population = field<int>(ga, "population", c.ga_population);
        c.ga_generations = field<int>(ga, "generations", c.ga_generations);
        c.ga_genome_length = field<int>(ga, "genome_length", c.ga_genome_length);
    }
    c.output_dir = field<std::string>(doc, "output_dir", c.output_dir);
    c.write_traces = field<bool>(doc, "write_traces", c.write_traces);
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open run config " + path.string());
    }
    try {
        return RunConfig::from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("run config " + path.string() + " is not valid JSON: " + e.what());
    }
}

std::shared_ptr<const Environment> make_environment(const RunConfig& config) {
    if (config.environment == "toy") {
        return std::make_shared<ToyEnv>(config.toy);
    }
    std::shared_ptr<const DryerParams> params;
    try {
        params = std::make_shared<DryerParams>(load_dryer_params(
            config.dryer_params.empty() ? default_dryer_params_path() : std::filesystem::path(config.dryer_params)));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw EnvironmentFailure(std::string("cannot load dryer parameters: ") + e.what());
    }
    DryerOptions opts;
    opts.dt = config.dt;
    return std::make_shared<DryerEnv>(params, opts);
}

// ─── solve ───────────────────────────────────────────

SolveSummary cmd_solve(const RunConfig& config) {
    config.validate();
    const auto env = make_environment(config);
    const auto constraints = resolve_constraints(config);
    auto cache = std::make_shared<RolloutCache>(make_store(config.cache));
    SolveSummary summary;

    auto emit = [&](nlohmann::json record, const std::string& name) {
        if (record.value("feasible", false)) {
            ++summary.feasible;
        }
        write_record(config, name, record);
        summary.records.push_back(std::move(record));
    };
    auto has = [&](const char* m) { return std::find(config.methods.begin(), config.methods.end(), m) != config.methods.end(); };

    std::vector<std::optional<double>> grid;
    if (config.environment == "dryer") {
        grid.assign(config.speed_factors.begin(), config.speed_factors.end());
    } else {
        grid.push_back(std::nullopt);
    }

    for (const auto& sf : grid) {
        EpisodeConfig episode = config.episode;
        if (sf) {
            episode.speed_factor = *sf;
        }
        if (config.environment == "toy") {
            episode.max_modules = config.toy.horizon;
        }
        const auto policy = resolve_policy(config, *env, episode);
        SearchProblem problem{policy, env, episode, constraints, cache};

        if (has("brute")) {
            auto record = record_header("brute", *env, config, sf);
            merge_into(record, cmd_brute(config.toy, config.constraints.is_null() ? nlohmann::json::array()
                                                                                  : config.constraints));
            emit(std::move(record), record_name("brute", sf, std::nullopt));
        }

        if (has("greedy")) {
            const auto g = greedy_decode(*policy, *env, episode, constraints, config.max_length);
            auto record = record_header("greedy", *env, config, sf);
            std::vector<std::string> labels;
            for (ActionId a : g.actions) {
                labels.push_back(env->action_label(a));
            }
            const bool ok = g.feasible && g.constraints_met;
            record["feasible"] = ok;
            record["actions"] = ok ? nlohmann::json(labels) : nlohmann::json::array();
            record["action_ids"] = ok ? nlohmann::json(g.actions) : nlohmann::json::array();
            record["reward_kj_per_m2"] = ok ? finite_or_null(g.reward) : nlohmann::json();
            record["energy_kj_per_m2"] = ok ? nlohmann::json(g.energy) : nlohmann::json();
            record["n_modules"] = ok ? static_cast<int>(g.actions.size()) : 0;
            record["dead_end"] = g.dead_end;
            record["failed"] = g.failed;
            record["timing"] = {{"wall_time_s", g.wall_time_s}};
            emit(std::move(record), record_name("greedy", sf, std::nullopt));
        }

        std::optional<int> incumbent_length;
        if (has("rlcbs")) {
            double cumulative = 0.0;
            double best_reward = -std::numeric_limits<double>::infinity();
            ActionSequence best_actions;
            for (int n_b : config.n_b_schedule) {
                SearchConfig sc;
                sc.n_b = n_b;
                sc.include_greedy_seed = config.include_greedy_seed;
                sc.refine = config.refine;
                sc.verify = config.verify;
                sc.workers = config.workers;
                sc.max_length = config.max_length;
                const auto result = rlcbs_solve(sc, problem);
                cumulative += result.wall_time_s;
                auto record = record_header("rlcbs", *env, config, sf);
                merge_into(record, result.to_json());
                record["timing"]["cumulative_wall_time_s"] = cumulative;
                if (result.feasible && result.reward > best_reward) {
                    best_reward = result.reward;
                    best_actions = result.actions;
                }
                emit(std::move(record), record_name("rlcbs", sf, n_b));
            }
            if (!best_actions.empty()) {
                incumbent_length = static_cast<int>(best_actions.size());
                if (config.write_traces && !config.output_dir.empty() && sf) {
                    const auto path = std::filesystem::path(config.output_dir) / ("trace_sf" + sf_tag(*sf) + ".csv");
                    std::ofstream out(path);
                    write_dryer_trace(dynamic_cast<const DryerEnv&>(*env), episode, best_actions, out);
                }
            }
        }

        if (has("ga")) {
            GaConfig gc;
            gc.population = config.ga_population;
            gc.generations = config.ga_generations;
            gc.seed = config.seed;
            gc.workers = config.workers;
            gc.genome_length = config.ga_genome_length > 0 ? config.ga_genome_length
                                                           : incumbent_length.value_or(config.max_length);
            const auto& dryer = dynamic_cast<const DryerEnv&>(*env);
            gc.genome_length = std::min(gc.genome_length, dryer.params().modules);
            const auto evaluator = make_dryer_evaluator(dryer, episode, cache, config.workers);
            const auto ga = evolve(gc, evaluator, env->action_count());
            auto record = record_header("ga", *env, config, sf);
            merge_into(record, ga.to_json([&](ActionId a) { return env->action_label(a); }));
            emit(std::move(record), record_name("ga", sf, std::nullopt));
        }
    }
    return summary;
}

nlohmann::json strip_timing(nlohmann::json record) {
    record.erase("timing");
    return record;
}

// ─── compare ─────────────────────────────────────────

std::vector<nlohmann::json> load_records(const std::vector<std::filesystem::path>& dirs) {
    std::vector<std::filesystem::path> files;
    for (const auto& dir : dirs) {
        if (!std::filesystem::is_directory(dir)) {
            throw ConfigError("not a result directory: " + dir.string());
        }
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (entry.is_regular_file() && entry.path().extension() == ".json") {
                files.push_back(entry.path());
            }
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<nlohmann::json> records;
    for (const auto& f : files) {
        std::ifstream in(f);
        try {
            auto doc = nlohmann::json::parse(in);
            if (doc.is_object() && doc.value("schema", "") == kResultSchema) {
                records.push_back(std::move(doc));
            }
        } catch (const nlohmann::json::parse_error&) {
            spdlog::warn("skipping unreadable result file {}", f.string());
        }
    }
    return records;
}

std::string compare_csv(const std::vector<nlohmann::json>& records) {
    std::set<std::string> fingerprints;
    for (const auto& r : records) {
        fingerprints.insert(r.value("env_fingerprint", ""));
    }
    if (fingerprints.size() > 1) {
        throw ConfigError("refusing to compare results from different environment versions");
    }

    struct Row {
        std::optional<double> greedy_r, greedy_t;
        std::optional<double> embedded_greedy_r, embedded_greedy_t;
        std::optional<double> rlcbs_r, rlcbs_t;
        std::optional<int> rlcbs_n_b, rlcbs_n;
        std::optional<double> ga_r, ga_t;
    };
    auto reward_of = [](const nlohmann::json& r) -> std::optional<double> {
        if (!r.value("feasible", false) || !r.contains("reward_kj_per_m2") || !r["reward_kj_per_m2"].is_number()) {
            return std::nullopt;
        }
        return r["reward_kj_per_m2"].get<double>();
    };
    std::map<double, Row> rows;
    for (const auto& r : records) {
        if (!r.contains("v_m") || !r["v_m"].is_number()) {
            continue;
        }
        auto& row = rows[r["v_m"].get<double>()];
        const auto method = r.value("method", "");
        const auto reward = reward_of(r);
        const auto& timing = r.value("timing", nlohmann::json::object());
        if (method == "greedy") {
            row.greedy_r = reward;
            row.greedy_t = timing.value("wall_time_s", 0.0);
        } else if (method == "ga") {
            row.ga_r = reward;
            row.ga_t = timing.value("wall_time_s", 0.0);
        } else if (method == "rlcbs") {
            if (r.contains("greedy") && !row.embedded_greedy_t) {
                const auto& g = r["greedy"];
                if (g.value("feasible", false) && g.value("constraints_met", false) &&
                    g["reward_kj_per_m2"].is_number()) {
                    row.embedded_greedy_r = g["reward_kj_per_m2"].get<double>();
                }
                row.embedded_greedy_t = timing.value("greedy_wall_time_s", 0.0);
            }
            const int n_b = r.value("n_b", 0);
            if (reward && (!row.rlcbs_r || *reward > *row.rlcbs_r ||
                           (*reward == *row.rlcbs_r && n_b < row.rlcbs_n_b.value_or(n_b + 1)))) {
                row.rlcbs_r = reward;
                row.rlcbs_n_b = n_b;
                row.rlcbs_t = timing.value("cumulative_wall_time_s", timing.value("wall_time_s", 0.0));
                row.rlcbs_n = r.value("n_modules", 0);
            }
        }
    }

    auto cell = [](const std::optional<double>& v) { return v ? number_cell(*v) : std::string(); };
    std::ostringstream out;
    out << kCompareHeader << '\n';
    if (rows.empty()) {
        return out.str();
    }
    std::array<double, 8> sums{};
    std::array<int, 8> counts{};
    for (auto& [v_m, row] : rows) {
        if (!row.greedy_t && row.embedded_greedy_t) {
            row.greedy_r = row.embedded_greedy_r;
            row.greedy_t = row.embedded_greedy_t;
        }
        std::array<std::optional<double>, 8> cells;
        cells[0] = row.greedy_r;
        if (row.greedy_r) {
            cells[1] = row.greedy_t;  // a greedy time only means something next to a feasible reward
        }
        if (row.rlcbs_n_b) {
            cells[2] = static_cast<double>(*row.rlcbs_n_b);
        }
        cells[3] = row.rlcbs_r;
        cells[4] = row.rlcbs_t;
        if (row.rlcbs_n) {
            cells[5] = static_cast<double>(*row.rlcbs_n);
        }
        cells[6] = row.ga_r;
        if (row.ga_r) {
            cells[7] = row.ga_t;
        }
        out << fmt::format("{:.6f}", v_m);
        for (std::size_t i = 0; i < cells.size(); ++i) {
            out << ',' << cell(cells[i]);
            if (cells[i]) {
                sums[i] += *cells[i];
                ++counts[i];
            }
        }
        out << '\n';
    }
    out << "average";
    for (int i = 0; i < 8; ++i) {
        out << ',' << (counts[i] > 0 ? number_cell(sums[i] / counts[i]) : std::string());
    }
    out << '\n';
    return out.str();
}

// ─── bench-cache ─────────────────────────────────────

std::vector<BenchCacheRow> cmd_bench_cache(int horizon, const std::vector<int>& n_bs, int workers,
                                           std::uint64_t seed) {
    ToyEnvSpec spec;
    spec.num_actions = kToyMaxActions;
    spec.horizon = horizon;
    spec.num_states = 32;
    spec.seed = seed;
    spec.validate();
    const auto env = std::make_shared<ToyEnv>(spec);
    EpisodeConfig episode;
    episode.max_modules = horizon;
    const auto policy = std::make_shared<RandomPolicy>(spec.num_actions, seed);
    const long long T = horizon;

    std::vector<BenchCacheRow> rows;
    for (int n_b : n_bs) {
        std::optional<SolveResult> reference;
        for (int w : std::set<int>{1, workers}) {
            for (bool enabled : {true, false}) {
                auto cache = std::make_shared<RolloutCache>(enabled ? std::make_shared<InMemoryStore>() : nullptr);
                SearchConfig sc;
                sc.n_b = n_b;
                sc.include_greedy_seed = false;
                sc.refine = false;
                sc.workers = w;
                sc.max_length = horizon;
                const auto result = rlcbs_solve(sc, SearchProblem{policy, env, episode, {}, cache});
                BenchCacheRow row;
                row.horizon = horizon;
                row.n_b = n_b;
                row.workers = w;
                row.cache_enabled = enabled;
                row.simulated = result.cache.env_steps_simulated;
                row.replayed = result.cache.env_steps_replayed;
                row.measured = enabled ? row.simulated : row.replayed;
                row.theoretical = enabled ? T * n_b : T * (T - 1) * n_b / 2;
                row.wall_time_s = result.wall_time_s;
                if (!reference) {
                    reference = result;
                }
                row.identical = result.actions == reference->actions && result.reward == reference->reward;
                rows.push_back(row);
            }
        }
    }
    return rows;
}

nlohmann::json bench_rows_to_json(const std::vector<BenchCacheRow>& rows) {
    auto out = nlohmann::json::array();
    for (const auto& r : rows) {
        out.push_back({{"T", r.horizon},
                       {"n_b", r.n_b},
                       {"workers", r.workers},
                       {"cache", r.cache_enabled},
                       {"measured", r.measured},
                       {"theoretical", r.theoretical},
                       {"env_steps_simulated", r.simulated},
                       {"env_steps_replayed", r.replayed},
                       {"identical", r.identical},
                       {"timing", {{"wall_time_s", r.wall_time_s}}}});
    }
    return out;
}

// ─── brute ───────────────────────────────────────────

nlohmann::json cmd_brute(const ToyEnvSpec& spec, const nlohmann::json& constraint_specs) {
    const auto bundle = parse_constraint_specs(constraint_specs);
    const auto r = brute_force_optimum(spec, bundle);
    ToyEnv env(spec);
    std::vector<std::string> labels;
    for (ActionId a : r.best) {
        labels.push_back(env.action_label(a));
    }
    return {{"feasible", r.found},
            {"actions", r.found ? nlohmann::json(labels) : nlohmann::json::array()},
            {"action_ids", r.found ? nlohmann::json(r.best) : nlohmann::json::array()},
            {"reward", r.found ? nlohmann::json(r.best_reward) : nlohmann::json()},
            {"enumerated", r.enumerated},
            {"feasible_count", r.feasible}};
}

// ─── traces ──────────────────────────────────────────

void write_dryer_trace(const DryerEnv& prototype, const EpisodeConfig& episode, const ActionSequence& actions,
                       std::ostream& out, double interval) {
    out << "time_s,position_m,temp_mean_c,temp_top_c,temp_bottom_c,dbmc_mean,dbmc_top,dbmc_bottom,dq_kj_per_m2\n";
    DryerOptions opts;
    opts.dt = prototype.dt();
    opts.trace_interval = interval;
    opts.trace = [&out](const TraceRow& r) {
        out << fmt::format("{:.4f},{:.5f},{:.4f},{:.4f},{:.4f},{:.6f},{:.6f},{:.6f},{:.6f}\n", r.time, r.position,
                           r.temp_mean, r.temp_top, r.temp_bottom, r.dbmc_mean, r.dbmc_top, r.dbmc_bottom, r.dq);
    };
    DryerEnv env(std::make_shared<const DryerParams>(prototype.params()), opts);
    env.reset(episode);
    for (ActionId a : actions) {
        if (env.status().terminal()) {
            break;
        }
        (void)env.step(a);
    }
}

}  // namespace rlcbs
