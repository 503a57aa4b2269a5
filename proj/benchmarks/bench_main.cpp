#include "hippoasym/classifier.hpp"
#include "hippoasym/mesher.hpp"
#include "hippoasym/spharm.hpp"
#include "hippoasym/sphereparam.hpp"
#include "hippoasym/stats.hpp"
#include "hippoasym/volgrid.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace hippoasym;

namespace {

const VoxelMask& subject_mask() {
  static const VoxelMask m = [] {
    SyntheticSubjectSpec s;
    s.noise_amplitude_mm = 0.3;
    s.bend_mm = 1.5;
    s.seed = 4;
    return gen_subject_pair(s).first;
  }();
  return m;
}

const TriangleMesh& subject_mesh() {
  static const TriangleMesh m = marching_cubes(subject_mask());
  return m;
}

const SphericalParam& subject_param() {
  static const SphericalParam p = parametrize(subject_mesh());
  return p;
}

}  // namespace

static void BM_MarchingCubes(benchmark::State& state) {
  subject_mask();
  for (auto _ : state) benchmark::DoNotOptimize(marching_cubes(subject_mask()));
  state.counters["vertices"] = static_cast<double>(subject_mesh().vertices.size());
}
BENCHMARK(BM_MarchingCubes)->Unit(benchmark::kMillisecond);

static void BM_InitialParam(benchmark::State& state) {
  subject_mesh();
  for (auto _ : state) benchmark::DoNotOptimize(initial_param(subject_mesh()));
}
BENCHMARK(BM_InitialParam)->Unit(benchmark::kMillisecond);

static void BM_Parametrize(benchmark::State& state) {
  ParamConfig c;
  c.max_outer_iterations = static_cast<int>(state.range(0));
  subject_mesh();
  for (auto _ : state) benchmark::DoNotOptimize(parametrize(subject_mesh(), c));
}
BENCHMARK(BM_Parametrize)->Arg(5)->Arg(50)->Unit(benchmark::kMillisecond);

static void BM_Fit(benchmark::State& state) {
  const int l_max = static_cast<int>(state.range(0));
  subject_param();
  for (auto _ : state) benchmark::DoNotOptimize(fit(subject_mesh(), subject_param(), l_max));
}
BENCHMARK(BM_Fit)->Arg(8)->Arg(15)->Unit(benchmark::kMillisecond);

static void BM_SvmTrain(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937 rng(3);
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int i = 0; i < n; ++i) {
    const int label = i % 2 ? 1 : -1;
    std::vector<double> row(8);
    for (auto& v : row) v = g(rng) + 0.8 * label;
    x.push_back(row);
    y.push_back(label);
  }
  for (auto _ : state) benchmark::DoNotOptimize(train(x, y));
}
BENCHMARK(BM_SvmTrain)->Arg(12)->Arg(100);

static void BM_WelchTtest(benchmark::State& state) {
  std::mt19937 rng(5);
  std::normal_distribution<double> g;
  std::vector<double> a(12), b(13);
  for (auto& v : a) v = g(rng);
  for (auto& v : b) v = g(rng) + 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(welch_ttest(a, b));
}
BENCHMARK(BM_WelchTtest);

BENCHMARK_MAIN();
