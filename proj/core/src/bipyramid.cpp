#include "tmask/bipyramid.hpp"

#include <algorithm>
#include <cmath>

namespace tmask {

void BipyramidSpec::validate() const {
  if (levels < 1) throw ShapeError("bipyramid needs at least one level");
  if (base_v < 1 || base_u < 1 || base_h < 1 || base_w < 1) {
    throw ShapeError("bipyramid base shape must be positive");
  }
  const int f = 1 << (levels - 1);
  if (base_h % f != 0 || base_w % f != 0) {
    throw ShapeError("bipyramid HW extent not divisible by 2^(levels-1)");
  }
  if (!(base_sigma_hw > 0.0)) throw PreconditionError("bipyramid stride must be positive");
}

LevelShape level_shape(const BipyramidSpec& spec, int k) {
  spec.validate();
  if (k < 0 || k >= spec.levels) {
    throw DomainError("bipyramid level " + std::to_string(k) + " out of range");
  }
  const int f = 1 << k;
  return {{spec.base_v * f, spec.base_u * f, spec.base_h / f, spec.base_w / f},
          Units(spec.base_sigma_hw, spec.base_sigma_hw * f)};
}

std::vector<StructuredTensor> build_bipyramid(
    const std::vector<StructuredTensor>& per_level, Interpolation interp,
    double fill) {
  std::vector<StructuredTensor> out;
  out.reserve(per_level.size());
  for (std::size_t k = 0; k < per_level.size(); ++k) {
    out.push_back(swap_align2nat(per_level[k], {1 << k, fill, interp}));
  }
  return out;
}

std::vector<StructuredTensor> build_bipyramid_backward(
    const std::vector<StructuredTensor>& grads,
    const std::vector<TensorMeta>& inputs, Interpolation interp) {
  if (grads.size() != inputs.size()) throw ShapeError("bipyramid level count mismatch");
  std::vector<StructuredTensor> out;
  out.reserve(grads.size());
  for (std::size_t k = 0; k < grads.size(); ++k) {
    out.push_back(swap_align2nat_backward(grads[k], inputs[k], {1 << k, 0.0, interp}));
  }
  return out;
}

namespace {

struct HwTap {
  int i0;
  int i1;
  double w;
};

std::vector<HwTap> hw_taps(int out_len, int in_len, int factor) {
  std::vector<HwTap> taps(out_len);
  for (int o = 0; o < out_len; ++o) {
    const double s = std::min(static_cast<double>(o) / factor,
                              static_cast<double>(in_len - 1));
    const int f = static_cast<int>(std::floor(s));
    taps[o] = {f, std::min(f + 1, in_len - 1), s - f};
  }
  return taps;
}

}  // namespace

FeatureMap upsample_hw_bilinear(const FeatureMap& x, int factor) {
  if (factor < 1) throw PreconditionError("upsample factor must be >= 1");
  FeatureMap y(x.channels, x.height * factor, x.width * factor, x.stride / factor);
  const auto ty = hw_taps(y.height, x.height, factor);
  const auto tx = hw_taps(y.width, x.width, factor);
  for (int c = 0; c < x.channels; ++c) {
    for (int j = 0; j < y.height; ++j) {
      const HwTap& a = ty[j];
      for (int i = 0; i < y.width; ++i) {
        const HwTap& b = tx[i];
        y.at(c, j, i) = (1.0 - a.w) * ((1.0 - b.w) * x.at(c, a.i0, b.i0) + b.w * x.at(c, a.i0, b.i1)) +
                        a.w * ((1.0 - b.w) * x.at(c, a.i1, b.i0) + b.w * x.at(c, a.i1, b.i1));
      }
    }
  }
  return y;
}

FeatureMap upsample_hw_bilinear_backward(const FeatureMap& grad_y,
                                         const FeatureMap& x, int factor) {
  if (grad_y.channels != x.channels || grad_y.height != x.height * factor ||
      grad_y.width != x.width * factor) {
    throw ShapeError("upsample_hw_bilinear_backward: shape mismatch");
  }
  FeatureMap g(x.channels, x.height, x.width, x.stride);
  const auto ty = hw_taps(grad_y.height, x.height, factor);
  const auto tx = hw_taps(grad_y.width, x.width, factor);
  for (int c = 0; c < x.channels; ++c) {
    for (int j = 0; j < grad_y.height; ++j) {
      const HwTap& a = ty[j];
      for (int i = 0; i < grad_y.width; ++i) {
        const HwTap& b = tx[i];
        const double q = grad_y.at(c, j, i);
        g.at(c, a.i0, b.i0) += (1.0 - a.w) * (1.0 - b.w) * q;
        g.at(c, a.i0, b.i1) += (1.0 - a.w) * b.w * q;
        g.at(c, a.i1, b.i0) += a.w * (1.0 - b.w) * q;
        g.at(c, a.i1, b.i1) += a.w * b.w * q;
      }
    }
  }
  return g;
}

namespace {

void check_fpn_inputs(const std::vector<FeatureMap>& maps, const FeatureMap& finest,
                      const nn::Conv2d& conv) {
  if (conv.in_channels() != finest.channels || conv.kernel() != 3) {
    throw ShapeError("convert_fpn_maps: conversion conv must be 3x3 over C channels");
  }
  for (std::size_t k = 0; k < maps.size(); ++k) {
    const int f = 1 << k;
    if (maps[k].channels != finest.channels || maps[k].height * f != finest.height ||
        maps[k].width * f != finest.width) {
      throw ShapeError("convert_fpn_maps: level " + std::to_string(k) +
                       " does not match the finest map scaled by 2^k");
    }
  }
}

}  // namespace

std::vector<FeatureMap> convert_fpn_maps(const std::vector<FeatureMap>& maps,
                                         const FeatureMap& finest,
                                         const nn::Conv2d& conv,
                                         FpnConversionCache* cache) {
  check_fpn_inputs(maps, finest, conv);
  std::vector<FeatureMap> out;
  if (cache) {
    cache->summed.clear();
    cache->outputs.clear();
  }
  for (std::size_t k = 0; k < maps.size(); ++k) {
    FeatureMap sum = upsample_hw_bilinear(maps[k], 1 << k);
    for (std::size_t i = 0; i < sum.data.size(); ++i) sum.data[i] += finest.data[i];
    sum.stride = finest.stride;
    FeatureMap y = nn::relu(conv.forward(sum));
    if (cache) {
      cache->summed.push_back(sum);
      cache->outputs.push_back(y);
    }
    out.push_back(std::move(y));
  }
  return out;
}

FpnConversionGrads convert_fpn_maps_backward(
    const std::vector<FeatureMap>& grads, const std::vector<FeatureMap>& maps,
    const FeatureMap& finest, nn::Conv2d& conv, const FpnConversionCache& cache) {
  if (grads.size() != maps.size() || cache.summed.size() != maps.size()) {
    throw ShapeError("convert_fpn_maps_backward: level count mismatch");
  }
  FpnConversionGrads out;
  out.finest = FeatureMap(finest.channels, finest.height, finest.width, finest.stride);
  for (std::size_t k = 0; k < maps.size(); ++k) {
    const FeatureMap g_pre = nn::relu_backward(cache.outputs[k], grads[k]);
    const FeatureMap g_sum = conv.backward(cache.summed[k], g_pre);
    for (std::size_t i = 0; i < g_sum.data.size(); ++i) out.finest.data[i] += g_sum.data[i];
    out.maps.push_back(upsample_hw_bilinear_backward(g_sum, maps[k], 1 << k));
  }
  return out;
}

}  // namespace tmask
