#include <benchmark/benchmark.h>

#include <oracle.hpp>
#include <tmask/transforms.hpp>

namespace {

using namespace tmask;

// Input (15,15,64,64) for every lambda, so the output element count is fixed.
StructuredTensor make_input(int lambda) {
  SplitMix64 rng(42);
  return oracle::random_tensor(rng, {15, 15, 64, 64}, Repr::Aligned, Units(lambda, 1.0));
}

void BM_SwapFused(benchmark::State& state) {
  const int lambda = static_cast<int>(state.range(0));
  const auto t = make_input(lambda);
  const TransformConfig cfg{lambda, 0.0, Interpolation::Bilinear};
  for (auto _ : state) {
    auto out = swap_align2nat(t, cfg);
    benchmark::DoNotOptimize(out.data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(t.shape().size()));
}

void BM_SwapNaive(benchmark::State& state) {
  const int lambda = static_cast<int>(state.range(0));
  const auto t = make_input(lambda);
  const TransformConfig cfg{lambda, 0.0, Interpolation::Bilinear};
  for (auto _ : state) {
    auto out = subsample_hw(up_align2nat(t, cfg), lambda);
    benchmark::DoNotOptimize(out.data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(t.shape().size()));
}

void BM_SwapBackward(benchmark::State& state) {
  const int lambda = static_cast<int>(state.range(0));
  const auto t = make_input(lambda);
  const TransformConfig cfg{lambda, 0.0, Interpolation::Bilinear};
  const auto g = swap_align2nat(t, cfg);
  for (auto _ : state) {
    auto out = swap_align2nat_backward(g, t.meta(), cfg);
    benchmark::DoNotOptimize(out.data().data());
  }
}

}  // namespace

BENCHMARK(BM_SwapFused)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SwapNaive)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SwapBackward)->Arg(2)->Arg(8)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
