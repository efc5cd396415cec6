#include "tmask/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>

namespace tmask {

double SplitMix64::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

Param::Param(std::string n, std::size_t size)
    : name(std::move(n)), value(size, 0.0), grad(size, 0.0), velocity(size, 0.0) {}

void Param::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

Conv2d::Conv2d(std::string name, int in_channels, int out_channels, int kernel)
    : in_(in_channels),
      out_(out_channels),
      k_(kernel),
      weight_(name + ".weight",
              static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel),
      bias_(name + ".bias", out_channels) {
  if (in_channels <= 0 || out_channels <= 0) throw ShapeError("conv channel counts must be positive");
  if (kernel <= 0 || kernel % 2 == 0) throw ShapeError("conv kernel must be odd");
}

void Conv2d::init(SplitMix64& rng, double bias, double gain) {
  const double std = std::sqrt(gain / (in_ * k_ * k_));
  for (double& w : weight_.value) w = std * rng.normal();
  std::fill(bias_.value.begin(), bias_.value.end(), bias);
}

void Conv2d::init_normal(SplitMix64& rng, double stddev, double bias) {
  for (double& w : weight_.value) w = stddev * rng.normal();
  std::fill(bias_.value.begin(), bias_.value.end(), bias);
}

namespace {

// Column matrix (C*k*k, H*W) with zero padding.
RowMat im2col(const FeatureMap& x, int k) {
  const int pad = k / 2;
  const int h = x.height;
  const int w = x.width;
  RowMat col = RowMat::Zero(static_cast<Eigen::Index>(x.channels) * k * k,
                            static_cast<Eigen::Index>(h) * w);
  for (int c = 0; c < x.channels; ++c) {
    const double* src = x.data.data() + c * x.plane();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* dst = col.row((c * k + ky) * k + kx).data();
        const int dy = ky - pad;
        const int dx = kx - pad;
        const int x_lo = std::max(0, -dx);
        const int x_hi = std::min(w, w - dx);
        for (int y = std::max(0, -dy); y < std::min(h, h - dy); ++y) {
          const double* srow = src + (y + dy) * w + dx;
          double* drow = dst + y * w;
          for (int xx = x_lo; xx < x_hi; ++xx) drow[xx] = srow[xx];
        }
      }
    }
  }
  return col;
}

void col2im_add(const RowMat& col, int k, FeatureMap& x) {
  const int pad = k / 2;
  const int h = x.height;
  const int w = x.width;
  for (int c = 0; c < x.channels; ++c) {
    double* dst = x.data.data() + c * x.plane();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* src = col.row((c * k + ky) * k + kx).data();
        const int dy = ky - pad;
        const int dx = kx - pad;
        const int x_lo = std::max(0, -dx);
        const int x_hi = std::min(w, w - dx);
        for (int y = std::max(0, -dy); y < std::min(h, h - dy); ++y) {
          double* drow = dst + (y + dy) * w + dx;
          const double* srow = src + y * w;
          for (int xx = x_lo; xx < x_hi; ++xx) drow[xx] += srow[xx];
        }
      }
    }
  }
}

}  // namespace

FeatureMap Conv2d::forward(const FeatureMap& x) const {
  if (x.channels != in_) {
    throw ShapeError("conv " + weight_.name + ": expected " + std::to_string(in_) +
                     " input channels, got " + std::to_string(x.channels));
  }
  const Eigen::Index hw = static_cast<Eigen::Index>(x.plane());
  FeatureMap y(out_, x.height, x.width, x.stride);
  MapC wmat(weight_.value.data(), out_, static_cast<Eigen::Index>(in_) * k_ * k_);
  Map ymat(y.data.data(), out_, hw);
  if (k_ == 1) {
    ymat.noalias() = wmat * MapC(x.data.data(), in_, hw);
  } else {
    ymat.noalias() = wmat * im2col(x, k_);
  }
  for (int o = 0; o < out_; ++o) ymat.row(o).array() += bias_.value[o];
  return y;
}

FeatureMap Conv2d::backward(const FeatureMap& x, const FeatureMap& grad_y) {
  if (x.channels != in_ || grad_y.channels != out_ || grad_y.height != x.height ||
      grad_y.width != x.width) {
    throw ShapeError("conv " + weight_.name + ": backward shape mismatch");
  }
  const Eigen::Index hw = static_cast<Eigen::Index>(x.plane());
  const Eigen::Index fan = static_cast<Eigen::Index>(in_) * k_ * k_;
  MapC g(grad_y.data.data(), out_, hw);
  MapC wmat(weight_.value.data(), out_, fan);
  Map gw(weight_.grad.data(), out_, fan);
  // Eigen's vectorized sum starts at the first aligned element, so its
  // rounding would follow the buffer address.
  for (int o = 0; o < out_; ++o) {
    const double* row = grad_y.data.data() + o * hw;
    bias_.grad[o] += std::accumulate(row, row + hw, 0.0);
  }

  FeatureMap gx(in_, x.height, x.width, x.stride);
  if (k_ == 1) {
    MapC xm(x.data.data(), in_, hw);
    gw.noalias() += g * xm.transpose();
    Map(gx.data.data(), in_, hw).noalias() = wmat.transpose() * g;
  } else {
    const RowMat col = im2col(x, k_);
    gw.noalias() += g * col.transpose();
    const RowMat gcol = wmat.transpose() * g;
    col2im_add(gcol, k_, gx);
  }
  return gx;
}

FeatureMap relu(const FeatureMap& x) {
  FeatureMap y = x;
  for (double& v : y.data) v = v > 0.0 ? v : 0.0;
  return y;
}

FeatureMap relu_backward(const FeatureMap& y, const FeatureMap& grad_y) {
  if (!y.same_shape(grad_y)) throw ShapeError("relu_backward: shape mismatch");
  FeatureMap g = grad_y;
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    if (!(y.data[i] > 0.0)) g.data[i] = 0.0;
  }
  return g;
}

FeatureMap avg_pool2(const FeatureMap& x) {
  const int h = x.height / 2;
  const int w = x.width / 2;
  if (h == 0 || w == 0) throw ShapeError("avg_pool2: input too small");
  FeatureMap y(x.channels, h, w, x.stride * 2);
  for (int c = 0; c < x.channels; ++c) {
    for (int j = 0; j < h; ++j) {
      for (int i = 0; i < w; ++i) {
        y.at(c, j, i) = 0.25 * (x.at(c, 2 * j, 2 * i) + x.at(c, 2 * j, 2 * i + 1) +
                                x.at(c, 2 * j + 1, 2 * i) + x.at(c, 2 * j + 1, 2 * i + 1));
      }
    }
  }
  return y;
}

FeatureMap avg_pool2_backward(const FeatureMap& grad_y, const FeatureMap& x) {
  FeatureMap g(x.channels, x.height, x.width, x.stride);
  if (grad_y.channels != x.channels || grad_y.height != x.height / 2 ||
      grad_y.width != x.width / 2) {
    throw ShapeError("avg_pool2_backward: shape mismatch");
  }
  for (int c = 0; c < x.channels; ++c) {
    for (int j = 0; j < grad_y.height; ++j) {
      for (int i = 0; i < grad_y.width; ++i) {
        const double q = 0.25 * grad_y.at(c, j, i);
        g.at(c, 2 * j, 2 * i) += q;
        g.at(c, 2 * j, 2 * i + 1) += q;
        g.at(c, 2 * j + 1, 2 * i) += q;
        g.at(c, 2 * j + 1, 2 * i + 1) += q;
      }
    }
  }
  return g;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void sgd_step(std::span<Param* const> params, double lr, double momentum) {
  for (Param* p : params) {
    if (p->grad.size() != p->value.size() || p->velocity.size() != p->value.size()) {
      throw ShapeError("sgd_step: parameter/gradient size mismatch for " + p->name);
    }
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      p->velocity[i] = momentum * p->velocity[i] + p->grad[i];
      p->value[i] -= lr * p->velocity[i];
    }
  }
}

void zero_grads(std::span<Param* const> params) {
  for (Param* p : params) p->zero_grad();
}

namespace {

constexpr char kMagic[4] = {'T', 'M', 'C', 'K'};

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     std::span<Param* const> params, std::uint64_t seed) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint64_t>(os, seed);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const Param* p : params) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p->name.size()));
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put<std::uint64_t>(os, p->value.size());
    os.write(reinterpret_cast<const char*>(p->value.data()),
             static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(p->velocity.data()),
             static_cast<std::streamsize>(p->velocity.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

std::uint64_t load_checkpoint(const std::filesystem::path& path,
                              std::span<Param* const> params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error(path.string() + " is not a checkpoint");
  }
  const auto version = get<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  const auto seed = get<std::uint64_t>(is);
  const auto count = get<std::uint32_t>(is);
  if (count != params.size()) {
    throw std::runtime_error("checkpoint holds " + std::to_string(count) +
                             " params, model expects " + std::to_string(params.size()));
  }
  for (Param* p : params) {
    const auto len = get<std::uint32_t>(is);
    std::string name(len, '\0');
    is.read(name.data(), len);
    if (name != p->name) {
      throw std::runtime_error("checkpoint param " + name + " does not match " + p->name);
    }
    const auto n = get<std::uint64_t>(is);
    if (n != p->value.size()) throw ShapeError("checkpoint size mismatch for " + name);
    is.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    is.read(reinterpret_cast<char*>(p->velocity.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw std::runtime_error("truncated checkpoint");
  }
  return seed;
}

}  // namespace nn
}  // namespace tmask
