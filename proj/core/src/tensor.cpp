#include "tmask/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tmask {

Units::Units(double sigma_vu, double sigma_hw)
    : sigma_vu_(sigma_vu), sigma_hw_(sigma_hw) {
  if (!(sigma_vu > 0.0) || !(sigma_hw > 0.0) || !std::isfinite(sigma_vu) ||
      !std::isfinite(sigma_hw)) {
    throw PreconditionError("units must be positive and finite");
  }
}

std::optional<int> Units::integer_alpha() const {
  const double a = alpha();
  const double r = std::round(a);
  if (r < 1.0 || std::abs(a - r) > 1e-9 * std::max(1.0, a)) {
    return std::nullopt;
  }
  return static_cast<int>(r);
}

const char* to_string(Repr r) {
  return r == Repr::Natural ? "natural" : "aligned";
}

std::string to_string(const Shape4& s) {
  std::ostringstream os;
  os << "(" << s.v << "," << s.u << "," << s.h << "," << s.w << ")";
  return os.str();
}

std::vector<int> centered_coords(int n) {
  std::vector<int> out;
  out.reserve(n > 0 ? n : 0);
  for (int c = centered_min(n); c <= centered_max(n); ++c) out.push_back(c);
  return out;
}

namespace {

void check_shape(const Shape4& s) {
  if (s.v <= 0 || s.u <= 0 || s.h <= 0 || s.w <= 0) {
    throw ShapeError("tensor shape must be positive: " + to_string(s));
  }
}

}  // namespace

bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

StructuredTensor::StructuredTensor(Shape4 shape, Repr repr, Units units,
                                   double value)
    : shape_(shape), repr_(repr), units_(units) {
  check_shape(shape_);
  if (!std::isfinite(value)) throw PreconditionError("non-finite fill value");
  data_.assign(shape_.size(), value);
}

StructuredTensor::StructuredTensor(Shape4 shape, Repr repr, Units units,
                                   std::vector<double> data)
    : shape_(shape), repr_(repr), units_(units), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != shape_.size()) {
    throw ShapeError("data length does not match shape " + to_string(shape_));
  }
  if (!all_finite(data_)) throw PreconditionError("tensor data is not finite");
}

bool StructuredTensor::contains(int v, int u, int y, int x) const {
  return centered_contains(shape_.v, v) && centered_contains(shape_.u, u) &&
         y >= 0 && y < shape_.h && x >= 0 && x < shape_.w;
}

std::size_t StructuredTensor::offset(int v, int u, int y, int x) const {
  if (!contains(v, u, y, x)) {
    std::ostringstream os;
    os << "coordinate (" << v << "," << u << "," << y << "," << x
       << ") outside tensor of shape " << to_string(shape_);
    throw DomainError(os.str());
  }
  const std::size_t iv = v - centered_min(shape_.v);
  const std::size_t iu = u - centered_min(shape_.u);
  return ((iv * shape_.u + iu) * shape_.h + y) * shape_.w + x;
}

std::span<const double> StructuredTensor::plane(int iv, int iu) const {
  const std::size_t n = shape_.plane();
  return {data_.data() + (static_cast<std::size_t>(iv) * shape_.u + iu) * n, n};
}

std::span<double> StructuredTensor::plane(int iv, int iu) {
  const std::size_t n = shape_.plane();
  return {data_.data() + (static_cast<std::size_t>(iv) * shape_.u + iu) * n, n};
}

double index(const StructuredTensor& t, int v, int u, int y, int x) {
  return t.at(v, u, y, x);
}

std::pair<double, double> vu_to_image_offset(const StructuredTensor& t, int v,
                                             int u) {
  return {v * t.units().sigma_vu(), u * t.units().sigma_vu()};
}

FeatureMap::FeatureMap(int c, int h, int w, double s, double value)
    : channels(c), height(h), width(w), stride(s) {
  if (c <= 0 || h <= 0 || w <= 0) throw ShapeError("feature map shape must be positive");
  if (!(s > 0.0)) throw PreconditionError("feature map stride must be positive");
  data.assign(size(), value);
}

}  // namespace tmask
