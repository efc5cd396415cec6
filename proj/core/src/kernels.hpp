#pragma once

// Shared per-element arithmetic for the VU interpolation kernels. Every
// code path that produces an upsampled value goes through `blend`, which is
// what makes the fused and composed paths agree bit for bit.

#include <vector>

#include "tmask/transforms.hpp"

namespace tmask::detail {

/// Source taps for one output VU coordinate, as storage indices.
struct Tap {
  int i0 = 0;
  int i1 = 0;
  double w = 0.0;  // weight of i1
};

std::vector<Tap> make_vu_taps(int out_len, int in_len, int lambda,
                              Interpolation interp);

inline double blend(double a00, double a01, double a10, double a11, double wv,
                    double wu) {
  return (1.0 - wv) * ((1.0 - wu) * a00 + wu * a01) +
         wv * ((1.0 - wu) * a10 + wu * a11);
}

inline int floor_div(int a, int b) {
  const int q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

}  // namespace tmask::detail
