#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tmask {

/// Coordinate outside the domain of a tensor axis.
class DomainError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// An operation was called on an input that violates its precondition
/// (non-integer unit ratio, wrong representation tag, ...).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Mismatched or indivisible shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Length of one sample step, in image pixels, along the VU and HW axis pairs.
class Units {
 public:
  Units() = default;
  Units(double sigma_vu, double sigma_hw);

  double sigma_vu() const { return sigma_vu_; }
  double sigma_hw() const { return sigma_hw_; }
  double alpha() const { return sigma_vu_ / sigma_hw_; }

  /// alpha as a positive integer, or nullopt when it is not one.
  std::optional<int> integer_alpha() const;

  bool operator==(const Units&) const = default;

 private:
  double sigma_vu_ = 1.0;
  double sigma_hw_ = 1.0;
};

enum class Repr : std::uint8_t { Natural = 0, Aligned = 1 };

const char* to_string(Repr r);

struct Shape4 {
  int v = 1;
  int u = 1;
  int h = 1;
  int w = 1;

  std::size_t size() const {
    return static_cast<std::size_t>(v) * u * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  bool operator==(const Shape4&) const = default;
};

std::string to_string(const Shape4& s);

// Centered axis of length n covers the integers in [-n/2, n/2).
constexpr int centered_min(int n) { return -(n / 2); }
constexpr int centered_max(int n) { return n - 1 - n / 2; }
inline bool centered_contains(int n, int c) {
  return c >= centered_min(n) && c <= centered_max(n);
}
std::vector<int> centered_coords(int n);

/// Shape, representation and units of a tensor, without data. Backward
/// passes take the forward input's meta to know what gradient to produce.
struct TensorMeta {
  Shape4 shape;
  Repr repr = Repr::Natural;
  Units units;
};

/// Dense (V,U,H,W) tensor stored row-major in (v,u,y,x) order. VU axes are
/// addressed by centered coordinates, HW axes from zero.
class StructuredTensor {
 public:
  StructuredTensor() = default;
  StructuredTensor(Shape4 shape, Repr repr, Units units, double value = 0.0);
  StructuredTensor(Shape4 shape, Repr repr, Units units,
                   std::vector<double> data);
  explicit StructuredTensor(const TensorMeta& meta, double value = 0.0)
      : StructuredTensor(meta.shape, meta.repr, meta.units, value) {}

  const Shape4& shape() const { return shape_; }
  Repr repr() const { return repr_; }
  const Units& units() const { return units_; }
  TensorMeta meta() const { return {shape_, repr_, units_}; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  std::vector<double> release() && { return std::move(data_); }

  bool contains(int v, int u, int y, int x) const;

  /// Storage offset of a centered (v,u) and grid (y,x) coordinate.
  /// Throws DomainError outside the domain.
  std::size_t offset(int v, int u, int y, int x) const;

  double at(int v, int u, int y, int x) const { return data_[offset(v, u, y, x)]; }
  double& at(int v, int u, int y, int x) { return data_[offset(v, u, y, x)]; }

  /// Contiguous HW plane at storage indices (iv, iu), 0 <= iv < V.
  std::span<const double> plane(int iv, int iu) const;
  std::span<double> plane(int iv, int iu);

 private:
  Shape4 shape_;
  Repr repr_ = Repr::Natural;
  Units units_;
  std::vector<double> data_;
};

/// Sample at a centered (v,u) and grid (y,x) coordinate.
double index(const StructuredTensor& t, int v, int u, int y, int x);

/// Image-pixel offset (dy, dx) of a VU coordinate relative to its window
/// center.
std::pair<double, double> vu_to_image_offset(const StructuredTensor& t, int v,
                                             int u);

/// Dense (C,H,W) feature map. `stride` is its HW unit in image pixels.
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  double stride = 1.0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w, double stride, double value = 0.0);

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return plane() * channels; }

  double& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  std::span<double> channel(int c) { return {data.data() + c * plane(), plane()}; }
  std::span<const double> channel(int c) const {
    return {data.data() + c * plane(), plane()};
  }

  bool same_shape(const FeatureMap& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

bool all_finite(std::span<const double> values);

}  // namespace tmask
