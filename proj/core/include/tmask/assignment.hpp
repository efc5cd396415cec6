#pragma once

#include <array>
#include <span>
#include <vector>

#include "tmask/geometry.hpp"
#include "tmask/tensor.hpp"

namespace tmask {

struct GroundTruthInstance {
  BinaryMask mask;
  Box bbox;
  int category = 0;

  /// Builds an instance from a non-empty mask; bbox is its tight box.
  static GroundTruthInstance from_mask(BinaryMask mask, int category);
};

/// Sliding-window grid of one pyramid level. Grid cell (y, x) has its window
/// center at (origin + y * s_hw, origin + x * s_hw) in image coordinates.
struct LevelGrid {
  int level = 0;
  int height = 0;
  int width = 0;
  Units units;
  double origin = 0.5;
  /// Window side V (= U), in samples, for each window size at this level.
  std::vector<int> window_sizes;
};

struct WindowSpec {
  int level = 0;
  int size_index = 0;
  /// Index of the (level, size) prediction map this window reads from.
  int slot = 0;
  int y = 0;
  int x = 0;
  int v = 1;
  int u = 1;
  Units units;
  double center_y = 0.0;
  double center_x = 0.0;

  /// Longer window side in image pixels.
  double side() const { return (v > u ? v : u) * units.sigma_vu(); }
  /// Union of the window's sample cells.
  Box footprint() const;
};

std::vector<WindowSpec> enumerate_windows(std::span<const LevelGrid> levels);

enum class CentralityUnit {
  /// Radius is the window's VU unit.
  VU,
  /// Radius is max(s_vu, s_hw); equal to VU for every baseline head.
  Coarser,
};

struct AssignmentRule {
  CentralityUnit centrality = CentralityUnit::VU;
  /// Masks below the minimum assignable size may go to the smallest windows.
  bool fallback = true;
};

struct Assignment {
  WindowSpec window;
  bool positive = false;
  int instance = -1;
  int category = -1;
  /// Row-major V x U soft target in [0, 1] (positives only).
  std::vector<double> target_mask;
  /// (dy, dx, log dh, log dw) relative to window center and side.
  std::array<double, 4> target_box{};
};

bool window_contains(const WindowSpec& w, const Box& b);
double centrality_radius(const WindowSpec& w, CentralityUnit unit);

/// Mask-driven labeling: a window is positive for mask m when it contains
/// m, m's longer side is at least half the window's, m's box center lies
/// within one unit of the window center, and no other mask qualifies.
std::vector<Assignment> assign(std::span<const WindowSpec> windows,
                               std::span<const GroundTruthInstance> instances,
                               const AssignmentRule& rule = {});

/// Area-averaged coverage of `mask` over each V x U sample cell.
std::vector<double> rasterize_target(const BinaryMask& mask, const WindowSpec& w);

std::array<double, 4> encode_box(const WindowSpec& w, const Box& b);
Box decode_box(const WindowSpec& w, std::span<const double> deltas);

std::size_t count_positives(std::span<const Assignment> assignments);

}  // namespace tmask
