#include "tmask/rle.hpp"

#include <stdexcept>

namespace tmask {

Rle rle_encode(const BinaryMask& m) {
  Rle r;
  r.height = m.height;
  r.width = m.width;
  std::uint8_t cur = 0;
  std::uint32_t run = 0;
  for (int x = 0; x < m.width; ++x) {
    for (int y = 0; y < m.height; ++y) {
      const std::uint8_t b = m.at(y, x) ? 1 : 0;
      if (b != cur) {
        r.counts.push_back(run);
        run = 0;
        cur = b;
      }
      ++run;
    }
  }
  r.counts.push_back(run);
  return r;
}

BinaryMask rle_decode(const Rle& r) {
  if (r.height < 0 || r.width < 0) throw std::invalid_argument("rle: negative size");
  BinaryMask m(r.height, r.width);
  const std::size_t total = static_cast<std::size_t>(r.height) * r.width;
  std::size_t pos = 0;
  std::uint8_t val = 0;
  for (std::uint32_t run : r.counts) {
    if (pos + run > total) throw std::invalid_argument("rle: runs exceed mask size");
    for (std::uint32_t i = 0; i < run; ++i, ++pos) {
      if (val) {
        const std::size_t x = pos / r.height;
        const std::size_t y = pos % r.height;
        m.at(static_cast<int>(y), static_cast<int>(x)) = 1;
      }
    }
    val ^= 1;
  }
  if (pos != total) throw std::invalid_argument("rle: runs do not cover the mask");
  return m;
}

}  // namespace tmask
