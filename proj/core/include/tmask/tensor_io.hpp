#pragma once

#include <filesystem>
#include <iosfwd>

#include "tmask/tensor.hpp"

namespace tmask {

// Binary tensor dump, little-endian:
//   u32 V, u32 U, u32 H, u32 W
//   f64 sigma_vu, f64 sigma_hw
//   u8  repr (0 = natural, 1 = aligned)
//   f64 data[V*U*H*W] in (v,u,y,x) row-major order
inline constexpr std::size_t kTensorDumpHeaderBytes = 4 * 4 + 2 * 8 + 1;

void write_tensor(std::ostream& os, const StructuredTensor& t);
StructuredTensor read_tensor(std::istream& is);

void save_tensor(const std::filesystem::path& path, const StructuredTensor& t);
StructuredTensor load_tensor(const std::filesystem::path& path);

}  // namespace tmask
