#pragma once

#include <cstdint>
#include <vector>

namespace tmask {

// Image coordinates are continuous: pixel (i, j) covers [i, i+1) x [j, j+1).

/// Axis-aligned rectangle [y0, y1) x [x0, x1) in image pixels.
struct Box {
  double y0 = 0.0;
  double x0 = 0.0;
  double y1 = 0.0;
  double x1 = 0.0;

  double height() const { return y1 > y0 ? y1 - y0 : 0.0; }
  double width() const { return x1 > x0 ? x1 - x0 : 0.0; }
  double area() const { return height() * width(); }
  double center_y() const { return 0.5 * (y0 + y1); }
  double center_x() const { return 0.5 * (x0 + x1); }
  double longer_side() const { return height() > width() ? height() : width(); }
  bool operator==(const Box&) const = default;
};

double iou(const Box& a, const Box& b);

struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  BinaryMask() = default;
  BinaryMask(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w, 0) {}

  std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t count() const;
  bool empty() const { return count() == 0; }
  bool operator==(const BinaryMask&) const = default;
};

/// Tight bounding box of the set pixels. An empty mask yields a zero box.
Box tight_box(const BinaryMask& m);

double mask_iou(const BinaryMask& a, const BinaryMask& b);

}  // namespace tmask
