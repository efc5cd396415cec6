#include <benchmark/benchmark.h>

#include <tmask/harness.hpp>
#include <tmask/nn.hpp>

namespace {

using namespace tmask;

void BM_Conv3x3(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int hw = static_cast<int>(state.range(1));
  SplitMix64 rng(1);
  nn::Conv2d conv("c", c, c, 3);
  conv.init(rng);
  FeatureMap x(c, hw, hw, 1.0);
  for (double& v : x.data) v = rng.normal();
  for (auto _ : state) {
    auto y = conv.forward(x);
    benchmark::DoNotOptimize(y.data.data());
  }
}

void BM_TrainStep(benchmark::State& state) {
  ExperimentConfig cfg;
  cfg.model.head.kind = static_cast<HeadKind>(state.range(0));
  cfg.model.head.lambda = cfg.model.head.kind == HeadKind::UpscaleAligned ||
                                  cfg.model.head.kind == HeadKind::UpscaleNatural
                              ? 5
                              : 1;
  cfg.data.train_images = 4;
  cfg.train.epochs = 1;
  cfg.train.batch_size = 4;
  const Splits s = make_splits(cfg.data);
  Detector model(cfg.model, 1);
  for (auto _ : state) train(model, s.train, cfg.train);
  state.SetItemsProcessed(state.iterations() * 4);
}

}  // namespace

BENCHMARK(BM_Conv3x3)->Args({16, 32})->Args({32, 32})->Args({32, 64})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainStep)->DenseRange(0, 4)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
  tmask::retain_heap_memory();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
