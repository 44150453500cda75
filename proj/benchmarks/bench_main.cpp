#include "accel2grf/align.hpp"
#include "accel2grf/encode.hpp"
#include "accel2grf/gait.hpp"
#include "accel2grf/model.hpp"
#include "accel2grf/rng.hpp"
#include "accel2grf/simulate.hpp"

#include <benchmark/benchmark.h>

using namespace accel2grf;

namespace {

model::NetworkSpec net_spec(std::size_t size) {
  model::NetworkSpec s;
  s.input_size = size;
  s.k_outputs = 12;
  return s;
}

encode::Image noise_image(std::size_t size, std::uint64_t seed) {
  Rng rng(seed, 0);
  encode::Image img;
  img.height = size;
  img.width = size;
  img.pixels.resize(size * size * 3);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

TrialRecord accel_trial() {
  simulate::SynthSpec s;
  s.seed = 3;
  s.source_kind = SourceKind::Accelerometers;
  s.movement = MovementClass::RunModerate;
  s.speed_mps = 4.0;
  return simulate::generate_synthetic_trial(s, 0);
}

void BM_Forward(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  const auto bundle = model::init_network(net_spec(size), 1);
  const auto img = noise_image(size, 2);
  for (auto _ : state) benchmark::DoNotOptimize(model::forward(bundle, img));
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(64);

void BM_ForwardBackward(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  const auto bundle = model::init_network(net_spec(size), 1);
  const std::vector<encode::Image> images{noise_image(size, 2)};
  const std::vector<std::vector<double>> targets{std::vector<double>(12, 0.5)};
  std::vector<double> grad(bundle.params.size());
  for (auto _ : state) {
    std::fill(grad.begin(), grad.end(), 0.0);
    benchmark::DoNotOptimize(model::loss_and_gradient(bundle, images, targets, grad));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(32)->Arg(64);

void BM_PcaAlign(benchmark::State& state) {
  const auto trial = accel_trial();
  for (auto _ : state) benchmark::DoNotOptimize(align::align_trial(trial, align::AlignmentMode::Pca));
}
BENCHMARK(BM_PcaAlign);

void BM_EncodeImage(benchmark::State& state) {
  const auto trial = align::align_trial(accel_trial(), align::AlignmentMode::Pca).trial;
  const auto window = gait::detect_stance_events(*trial.force);
  encode::EncodeOptions opts;
  opts.size = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(encode::encode_image(trial, window, opts));
}
BENCHMARK(BM_EncodeImage)->Arg(64)->Arg(227);

void BM_FitOutputPca(benchmark::State& state) {
  Rng rng(4, 0);
  std::vector<std::vector<double>> targets(static_cast<std::size_t>(state.range(0)));
  for (auto& t : targets) {
    t.resize(606);
    for (auto& v : t) v = rng.normal();
  }
  for (auto _ : state) benchmark::DoNotOptimize(encode::fit_output_pca(targets));
}
BENCHMARK(BM_FitOutputPca)->Arg(100)->Arg(400);

}  // namespace
BENCHMARK_MAIN();
