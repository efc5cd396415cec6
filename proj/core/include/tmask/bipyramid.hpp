#pragma once

#include <vector>

#include "tmask/nn.hpp"
#include "tmask/tensor.hpp"
#include "tmask/transforms.hpp"

namespace tmask {

/// Shape parameters of a tensor bipyramid. Level k has shape
/// (2^k V, 2^k U, H / 2^k, W / 2^k) and units (s, 2^k s) where s is the
/// finest HW stride.
struct BipyramidSpec {
  int base_v = 15;
  int base_u = 15;
  int base_h = 64;
  int base_w = 64;
  int levels = 1;
  double base_sigma_hw = 1.0;

  /// Throws ShapeError unless H and W are divisible by 2^(levels - 1).
  void validate() const;
};

struct LevelShape {
  Shape4 shape;
  Units units;
};

LevelShape level_shape(const BipyramidSpec& spec, int k);

/// Level k output is swap_align2nat(per_level[k], 2^k). Inputs are aligned
/// (V,U,H,W) tensors with s^vu = 2^k s^hw.
std::vector<StructuredTensor> build_bipyramid(
    const std::vector<StructuredTensor>& per_level,
    Interpolation interp = Interpolation::Bilinear, double fill = 0.0);
std::vector<StructuredTensor> build_bipyramid_backward(
    const std::vector<StructuredTensor>& grads,
    const std::vector<TensorMeta>& inputs,
    Interpolation interp = Interpolation::Bilinear);

/// Upsamples the HW grid by `factor`, output row y reading source row
/// y / factor with edge clamping. Stride is divided by `factor`.
FeatureMap upsample_hw_bilinear(const FeatureMap& x, int factor);
FeatureMap upsample_hw_bilinear_backward(const FeatureMap& grad_y,
                                         const FeatureMap& x, int factor);

/// Intermediates kept for the backward pass of convert_fpn_maps.
struct FpnConversionCache {
  std::vector<FeatureMap> summed;
  std::vector<FeatureMap> outputs;
};

/// Brings pyramid level k (C, H/2^k, W/2^k) to the finest resolution:
/// bilinear upsampling by 2^k, plus the finest map, then the shared 3x3
/// convolution and ReLU.
std::vector<FeatureMap> convert_fpn_maps(const std::vector<FeatureMap>& maps,
                                         const FeatureMap& finest,
                                         const nn::Conv2d& conv,
                                         FpnConversionCache* cache = nullptr);

struct FpnConversionGrads {
  std::vector<FeatureMap> maps;
  FeatureMap finest;
};

FpnConversionGrads convert_fpn_maps_backward(
    const std::vector<FeatureMap>& grads, const std::vector<FeatureMap>& maps,
    const FeatureMap& finest, nn::Conv2d& conv, const FpnConversionCache& cache);

}  // namespace tmask
