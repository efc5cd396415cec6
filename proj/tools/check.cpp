#include "check.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>

#include <oracle.hpp>
#include <tmask/transforms.hpp>

namespace tmask::cli {

namespace {

double max_abs_diff(const StructuredTensor& a, const StructuredTensor& b) {
  if (a.shape() != b.shape()) return HUGE_VAL;
  double d = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  return d;
}

void record(CheckRow& row, const StructuredTensor& got, const StructuredTensor& want) {
  ++row.cases;
  const double d = max_abs_diff(got, want);
  const bool same_meta = got.repr() == want.repr() && got.units() == want.units();
  if (d != 0.0 || !same_meta) ++row.failures;
  row.max_abs_diff = std::max(row.max_abs_diff, d);
}

}  // namespace

std::vector<CheckRow> check_transforms(std::uint64_t seed, int trials) {
  SplitMix64 rng(seed);
  CheckRow a2n{"align2nat"}, n2a{"nat2align"}, gen{"align2nat_general"}, up{"up_bilinear_vu"},
      upnn{"up_bilinear_vu (nearest)"}, sub{"subsample_hw"}, swap{"swap_align2nat"},
      ifcn{"instancefcn_decode"};
  for (int t = 0; t < trials; ++t) {
    const int v = rng.uniform_int(1, 5);
    const int u = rng.uniform_int(1, 5);
    const int alpha = rng.uniform_int(1, 3);
    const int lambda = 1 << rng.uniform_int(0, 2);
    const int h = lambda * rng.uniform_int(1, 16 / lambda);
    const int w = lambda * rng.uniform_int(1, 16 / lambda);
    const Shape4 s{v, u, h, w};

    const auto al = oracle::random_tensor(rng, s, Repr::Aligned, Units(alpha, 1.0));
    const auto na = oracle::random_tensor(rng, s, Repr::Natural, Units(alpha, 1.0));
    record(a2n, align2nat(al), oracle::align2nat(al));
    record(n2a, nat2align(na), oracle::nat2align(na));

    const auto code = oracle::code_tensor({2 * v, 2 * u, h, w}, Repr::Aligned, Units(2.0, 1.0));
    record(gen, align2nat_general(code, Units(4.0, 1.0)),
           oracle::align2nat_general(code, Units(4.0, 1.0)));

    record(up, up_bilinear_vu(al, lambda), oracle::up_bilinear_vu(al, lambda));
    record(upnn, up_bilinear_vu(al, lambda, Interpolation::NearestNeighbor),
           oracle::up_bilinear_vu(al, lambda, Interpolation::NearestNeighbor));
    record(sub, subsample_hw(al, lambda), oracle::subsample_hw(al, lambda));

    const auto sw = oracle::random_tensor(rng, s, Repr::Aligned, Units(lambda, 1.0));
    for (Interpolation i : {Interpolation::Bilinear, Interpolation::NearestNeighbor}) {
      const TransformConfig cfg{lambda, 0.0, i};
      record(swap, swap_align2nat(sw, cfg), oracle::naive_swap(sw, cfg));
    }

    const int k = 2 * rng.uniform_int(0, 2) + 1;
    const int n = k * rng.uniform_int(1, 3);
    const auto g = oracle::random_tensor(rng, {k, k, h, w}, Repr::Aligned, Units(1.0, 1.0));
    record(ifcn, instancefcn_decode(g, n, n), oracle::instancefcn_direct(g, n, n));
  }
  return {a2n, n2a, gen, up, upnn, sub, swap, ifcn};
}

void print_check_table(std::ostream& os, const std::vector<CheckRow>& rows) {
  os << std::left << std::setw(28) << "op" << std::right << std::setw(8) << "cases"
     << std::setw(10) << "failures" << std::setw(16) << "max_abs_diff" << "  status\n";
  for (const CheckRow& r : rows) {
    os << std::left << std::setw(28) << r.name << std::right << std::setw(8) << r.cases
       << std::setw(10) << r.failures << std::setw(16) << std::scientific << std::setprecision(3)
       << r.max_abs_diff << std::defaultfloat << "  " << (r.failures == 0 ? "PASS" : "FAIL")
       << '\n';
  }
}

SwapTiming time_swap(int v, int h, int lambda, int repeats, std::uint64_t seed, bool run_naive) {
  SplitMix64 rng(seed);
  const auto t = oracle::random_tensor(rng, {v, v, h, h}, Repr::Aligned, Units(lambda, 1.0));
  const TransformConfig cfg{lambda, 0.0, Interpolation::Bilinear};
  SwapTiming r;
  r.lambda = lambda;
  r.elements = t.shape().size();
  const auto clock = [] { return std::chrono::steady_clock::now(); };
  double best = HUGE_VAL;
  for (int i = 0; i < repeats; ++i) {
    const auto t0 = clock();
    const auto out = swap_align2nat(t, cfg);
    best = std::min(best, std::chrono::duration<double, std::nano>(clock() - t0).count());
    if (out.data().empty()) return r;
  }
  r.fused_ns = best;
  if (!run_naive) return r;
  best = HUGE_VAL;
  for (int i = 0; i < repeats; ++i) {
    const auto t0 = clock();
    const auto out = subsample_hw(up_align2nat(t, cfg), lambda);
    best = std::min(best, std::chrono::duration<double, std::nano>(clock() - t0).count());
    if (out.data().empty()) return r;
  }
  r.naive_ns = best;
  return r;
}

}  // namespace tmask::cli
