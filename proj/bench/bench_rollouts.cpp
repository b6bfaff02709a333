#include <random>
#include <thread>

#include <benchmark/benchmark.h>

#include "rlcbs/dryer.hpp"
#include "rlcbs/ga.hpp"
#include "rlcbs/parallel.hpp"
#include "rlcbs/policy.hpp"
#include "rlcbs/search.hpp"
#include "rlcbs/toy_env.hpp"

namespace {

using namespace rlcbs;

int parallel_workers() { return std::max(2, static_cast<int>(std::thread::hardware_concurrency())); }

// Arg 0 = serial reference path, 1 = OpenMP path.
int workers_for(const benchmark::State& state) { return state.range(0) == 0 ? 1 : parallel_workers(); }

void BM_DryerModuleRollouts(benchmark::State& state) {
    const int workers = workers_for(state);
    const auto params = std::make_shared<const DryerParams>(load_dryer_params(default_dryer_params_path()));
    DryerEnv proto(params);
    EpisodeConfig episode;
    episode.speed_factor = 0.75;
    std::vector<ActionSequence> seqs;
    for (int i = 0; i < 8; ++i) {
        seqs.push_back({encode_action(ModuleType::PP, i), encode_action(ModuleType::DEP, i)});
    }
    std::vector<std::unique_ptr<Environment>> envs;
    for (int w = 0; w < workers; ++w) {
        envs.push_back(proto.clone());
    }
    RolloutCache uncached(nullptr);
    for (auto _ : state) {
        std::vector<double> energy(seqs.size());
        parallel_for_worker(seqs.size(), workers, [&](std::size_t i, int w) {
            energy[i] = uncached.rollout(*envs[w], episode, seqs[i]).status.energy;
        });
        benchmark::DoNotOptimize(energy.data());
    }
    state.SetLabel(workers == 1 ? "serial" : "openmp");
}
BENCHMARK(BM_DryerModuleRollouts)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_PolicyBatch(benchmark::State& state) {
    const int workers = workers_for(state);
    MlpPolicy policy(random_mlp_weights(7));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Observation> obs(512);
    for (auto& o : obs) {
        o = {0.25 + 0.5 * u(rng), 20 + 60 * u(rng), 20 + 60 * u(rng), 1.5 * u(rng), 1.5 * u(rng), u(rng)};
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(log_probs_batch(policy, obs, workers));
    }
    state.SetLabel(workers == 1 ? "serial" : "openmp");
}
BENCHMARK(BM_PolicyBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond)->UseRealTime();

void BM_ToySolve(benchmark::State& state) {
    const int workers = workers_for(state);
    ToyEnvSpec spec;
    spec.num_actions = 8;
    spec.horizon = 10;
    spec.num_states = 64;
    spec.seed = 11;
    const auto env = std::make_shared<ToyEnv>(spec);
    const auto policy = std::make_shared<RandomPolicy>(spec.num_actions, 5);
    EpisodeConfig episode;
    episode.max_modules = spec.horizon;
    SearchConfig config;
    config.n_b = 64;
    config.max_length = spec.horizon;
    config.workers = workers;
    for (auto _ : state) {
        auto cache = std::make_shared<RolloutCache>(std::make_shared<InMemoryStore>());
        benchmark::DoNotOptimize(rlcbs_solve(config, SearchProblem{policy, env, episode, {}, cache}));
    }
    state.SetLabel(workers == 1 ? "serial" : "openmp");
}
BENCHMARK(BM_ToySolve)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_GaDepCount(benchmark::State& state) {
    const int workers = workers_for(state);
    GaConfig config;
    config.seed = 1;
    config.genome_length = 8;
    config.workers = workers;
    const auto evaluator = make_dep_count_evaluator(3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(evolve(config, evaluator, kActionCount));
    }
    state.SetLabel(workers == 1 ? "serial" : "openmp");
}
BENCHMARK(BM_GaDepCount)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
