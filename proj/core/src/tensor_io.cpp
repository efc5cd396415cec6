#include "tmask/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace tmask {
namespace {

template <typename T>
T to_little(T value) {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
      std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    std::memcpy(&value, bytes, sizeof(T));
    return value;
  }
}

template <typename T>
void put(std::ostream& os, T value) {
  value = to_little(value);
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw std::runtime_error("truncated tensor dump");
  return to_little(value);
}

}  // namespace

void write_tensor(std::ostream& os, const StructuredTensor& t) {
  const Shape4& s = t.shape();
  put<std::uint32_t>(os, s.v);
  put<std::uint32_t>(os, s.u);
  put<std::uint32_t>(os, s.h);
  put<std::uint32_t>(os, s.w);
  put<double>(os, t.units().sigma_vu());
  put<double>(os, t.units().sigma_hw());
  put<std::uint8_t>(os, static_cast<std::uint8_t>(t.repr()));
  for (double v : t.data()) put<double>(os, v);
  if (!os) throw std::runtime_error("failed writing tensor dump");
}

StructuredTensor read_tensor(std::istream& is) {
  Shape4 s;
  s.v = static_cast<int>(get<std::uint32_t>(is));
  s.u = static_cast<int>(get<std::uint32_t>(is));
  s.h = static_cast<int>(get<std::uint32_t>(is));
  s.w = static_cast<int>(get<std::uint32_t>(is));
  const double svu = get<double>(is);
  const double shw = get<double>(is);
  const auto tag = get<std::uint8_t>(is);
  if (tag > 1) throw std::runtime_error("invalid representation tag in tensor dump");
  if (s.v <= 0 || s.u <= 0 || s.h <= 0 || s.w <= 0) {
    throw ShapeError("invalid shape in tensor dump");
  }
  std::vector<double> data(s.size());
  for (double& v : data) v = get<double>(is);
  return StructuredTensor(s, static_cast<Repr>(tag), Units(svu, shw),
                          std::move(data));
}

void save_tensor(const std::filesystem::path& path, const StructuredTensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  write_tensor(os, t);
}

StructuredTensor load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_tensor(is);
}

}  // namespace tmask
