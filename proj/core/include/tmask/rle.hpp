#pragma once

#include <cstdint>
#include <vector>

#include "tmask/geometry.hpp"

namespace tmask {

/// Uncompressed run-length encoding in column-major order. Runs alternate
/// between background and foreground, starting with background (a leading
/// zero-length run when the first pixel is set).
struct Rle {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;

  bool operator==(const Rle&) const = default;
};

Rle rle_encode(const BinaryMask& m);
/// Throws std::invalid_argument when the runs do not cover height*width.
BinaryMask rle_decode(const Rle& r);

}  // namespace tmask
