#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace tmask::cli {

struct CheckRow {
  std::string name;
  int cases = 0;
  int failures = 0;
  double max_abs_diff = 0.0;
};

/// Runs every transform against its oracle on random and code tensors.
std::vector<CheckRow> check_transforms(std::uint64_t seed, int trials);
void print_check_table(std::ostream& os, const std::vector<CheckRow>& rows);

struct SwapTiming {
  int lambda = 0;
  std::size_t elements = 0;
  double fused_ns = 0.0;
  double naive_ns = 0.0;
};

/// Best-of-`repeats` wall time of the fused and composed swap at a fixed
/// element count V*U*H*W.
SwapTiming time_swap(int v, int h, int lambda, int repeats, std::uint64_t seed, bool run_naive);

}  // namespace tmask::cli
