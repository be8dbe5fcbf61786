#include "closedobs/closedobs.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace closedobs;

namespace {

Eigen::MatrixXd random_points(Eigen::Index n, Eigen::Index dim) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXd X(n, dim);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < dim; ++c) X(i, c) = u(rng);
    return X;
}

TrajectoryBundle spiral_bundle(std::size_t grid) {
    SpiralConfig cfg;
    cfg.grid = grid;
    return gen_spiral(cfg);
}

} // namespace

static void BM_PairwiseDistances(benchmark::State &state) {
    const auto X = random_points(state.range(0), 6);
    for (auto _ : state) benchmark::DoNotOptimize(pairwise_distances(X));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_PairwiseDistances)->RangeMultiplier(2)->Range(128, 1024)->Complexity(benchmark::oNSquared);

static void BM_DiffusionCoordinates(benchmark::State &state) {
    const auto D = pairwise_distances(random_points(state.range(0), 3));
    for (auto _ : state) benchmark::DoNotOptimize(build_coordinates(D, {}, {}));
}
BENCHMARK(BM_DiffusionCoordinates)->RangeMultiplier(2)->Range(128, 1024)->Unit(benchmark::kMillisecond);

static void BM_InterpolantFit(benchmark::State &state) {
    const auto nodes = random_points(state.range(0), 2);
    const Eigen::MatrixXd values = nodes.rowwise().squaredNorm();
    InterpSpec spec;
    spec.method = static_cast<InterpMethod>(state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(Interpolant::fit(nodes, values, spec));
    state.SetLabel(to_string(spec.method));
}
BENCHMARK(BM_InterpolantFit)
    ->ArgsProduct({{256, 1024}, {static_cast<long>(InterpMethod::shepard), static_cast<long>(InterpMethod::rbf_gaussian),
                                 static_cast<long>(InterpMethod::polyharmonic)}})
    ->Unit(benchmark::kMillisecond);

static void BM_InterpolantEval(benchmark::State &state) {
    const auto nodes = random_points(1024, 2);
    const Eigen::MatrixXd values = nodes.rowwise().squaredNorm();
    InterpSpec spec;
    spec.method = static_cast<InterpMethod>(state.range(0));
    const auto f = Interpolant::fit(nodes, values, spec);
    const Eigen::VectorXd q = Eigen::Vector2d(0.1, -0.2);
    for (auto _ : state) benchmark::DoNotOptimize(f.eval(q));
    state.SetLabel(to_string(spec.method));
}
BENCHMARK(BM_InterpolantEval)
    ->Arg(static_cast<long>(InterpMethod::nearest))
    ->Arg(static_cast<long>(InterpMethod::shepard))
    ->Arg(static_cast<long>(InterpMethod::rbf_gaussian))
    ->Arg(static_cast<long>(InterpMethod::polyharmonic));

static void BM_BuildSpiralModel(benchmark::State &state) {
    const auto bundle = spiral_bundle(static_cast<std::size_t>(state.range(0)));
    ModelConfig cfg;
    cfg.T = 5;
    for (auto _ : state) benchmark::DoNotOptimize(build_model(bundle, cfg));
    state.counters["trajectories"] = static_cast<double>(bundle.trajectories.size());
}
BENCHMARK(BM_BuildSpiralModel)->Arg(7)->Arg(13)->Arg(21)->Unit(benchmark::kMillisecond);

static void BM_Simulate(benchmark::State &state) {
    ModelConfig cfg;
    cfg.T = 5;
    const auto model = build_model(spiral_bundle(13), cfg);
    const auto integrator = static_cast<Integrator>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(simulate(model, {0.5, 0.2}, 100, integrator));
    state.SetLabel(to_string(integrator));
}
BENCHMARK(BM_Simulate)->Arg(static_cast<long>(Integrator::iterate))->Arg(static_cast<long>(Integrator::rk4));

static void BM_StorageEnumeration(benchmark::State &state) {
    for (auto _ : state)
        for (std::uint64_t d = 1; d <= 3; ++d)
            for (std::uint64_t n0 = 1; n0 <= 3; ++n0)
                benchmark::DoNotOptimize(storage_account(d, 1, n0, 100));
}
BENCHMARK(BM_StorageEnumeration);
BENCHMARK_MAIN();
