#include "ff/dynamics.hpp"
#include "ff/intensity.hpp"
#include "ff/nn/layers.hpp"
#include "ff/pipeline.hpp"
#include "ff/random.hpp"
#include "ff/synth.hpp"
#include "ff/tempo.hpp"

#include <benchmark/benchmark.h>

using namespace ff;

namespace {

Matrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m(i) = standard_normal(rng);
  return m;
}

void BM_AttentionForward(benchmark::State& state) {
  Rng rng(1);
  const nn::MultiHeadAttention mha("mha", 40, 10, rng);
  const Matrix x = random_matrix(state.range(0), 40, 2);
  for (auto _ : state) benchmark::DoNotOptimize(mha.forward(x, nullptr));
}
BENCHMARK(BM_AttentionForward)->Arg(64)->Arg(256);

void BM_AttentionBackward(benchmark::State& state) {
  Rng rng(1);
  nn::MultiHeadAttention mha("mha", 40, 10, rng);
  const Matrix x = random_matrix(state.range(0), 40, 2);
  const Matrix dy = random_matrix(state.range(0), 40, 3);
  nn::MultiHeadAttention::Cache cache;
  for (auto _ : state) {
    mha.forward(x, &cache);
    benchmark::DoNotOptimize(mha.backward(cache, dy));
  }
}
BENCHMARK(BM_AttentionBackward)->Arg(64)->Arg(256);

void BM_TempoEncode(benchmark::State& state) {
  const auto profile = generate_subject_profile(3, SubjectId{0}, GeneratorConfig::defaults());
  const auto g = generate_gait(profile, FatigueState::NonFatigued, state.range(0), 3);
  for (auto _ : state) benchmark::DoNotOptimize(tempo::encode_normalize(g.motion, g.segmentation));
}
BENCHMARK(BM_TempoEncode)->Arg(20)->Arg(100);

void BM_AnalyticTorques(benchmark::State& state) {
  const auto profile = generate_subject_profile(3, SubjectId{0}, GeneratorConfig::defaults());
  const auto g = generate_gait(profile, FatigueState::NonFatigued, state.range(0), 3);
  const auto body = dynamics::BodyModel::standard(g.motion.channels().joint_names());
  for (auto _ : state) benchmark::DoNotOptimize(dynamics::torques_from_motion(g.motion, body));
}
BENCHMARK(BM_AnalyticTorques)->Arg(20)->Arg(100);

void BM_SavitzkyGolay(benchmark::State& state) {
  const Matrix x = random_matrix(6000, 11, 4);
  for (auto _ : state) benchmark::DoNotOptimize(pipeline::savitzky_golay(x, state.range(0), 3));
}
BENCHMARK(BM_SavitzkyGolay)->Arg(9)->Arg(31);

void BM_ThreeCompartment(benchmark::State& state) {
  Rng rng(5);
  Matrix tl(state.range(0), 8);
  for (Index i = 0; i < tl.size(); ++i) tl(i) = uniform(rng, 0.0, 100.0);
  const std::vector<double> dt(static_cast<std::size_t>(tl.rows()), 1.0 / 128.0);
  for (auto _ : state) benchmark::DoNotOptimize(intensity::simulate_fatigue(tl, intensity::CcParams{}, dt));
  state.SetItemsProcessed(state.iterations() * tl.size());
}
BENCHMARK(BM_ThreeCompartment)->Arg(6000)->Arg(60000);

}  // namespace

BENCHMARK_MAIN();
