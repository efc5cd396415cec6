#include "tmask/geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace tmask {

double iou(const Box& a, const Box& b) {
  const double ih = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  const double iw = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  if (ih <= 0.0 || iw <= 0.0) return 0.0;
  const double inter = ih * iw;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(),
                                                [](std::uint8_t b) { return b != 0; }));
}

Box tight_box(const BinaryMask& m) {
  int y0 = m.height, x0 = m.width, y1 = -1, x1 = -1;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(y, x)) continue;
      y0 = std::min(y0, y);
      x0 = std::min(x0, x);
      y1 = std::max(y1, y);
      x1 = std::max(x1, x);
    }
  }
  if (y1 < 0) return {};
  return {double(y0), double(x0), double(y1 + 1), double(x1 + 1)};
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.height != b.height || a.width != b.width) {
    throw std::invalid_argument("mask_iou: size mismatch");
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const bool pa = a.data[i] != 0;
    const bool pb = b.data[i] != 0;
    inter += pa && pb;
    uni += pa || pb;
  }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

}  // namespace tmask
