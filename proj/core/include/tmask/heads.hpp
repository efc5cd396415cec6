#pragma once

#include <string>
#include <vector>

#include "tmask/nn.hpp"
#include "tmask/transforms.hpp"

namespace tmask {

enum class HeadKind {
  SimpleNatural,
  SimpleAligned,
  UpscaleNatural,
  UpscaleAligned,
  Bipyramid,
};

const char* to_string(HeadKind k);
HeadKind parse_head_kind(const std::string& name);

struct HeadSpec {
  HeadKind kind = HeadKind::Bipyramid;
  int lambda = 1;
  Interpolation interpolation = Interpolation::Bilinear;
  /// Output window sizes V (= U) at the finest level.
  std::vector<int> window_sizes{15};
  double fill = 0.0;

  void validate() const;
  /// Side of the (V,U) block produced by the 1x1 projection.
  int projected_size(int size_index) const;
};

/// 1x1 convolution followed by reading the channel axis as a row-major
/// (v,u) block. The FeatureMap (V*U, H, W) and the tensor (V,U,H,W) share
/// the same memory layout.
StructuredTensor conv_reshape(const FeatureMap& fm, const nn::Conv2d& conv,
                              int v, int u, Repr repr, const Units& units);
FeatureMap conv_reshape_backward(const FeatureMap& fm, nn::Conv2d& conv,
                                 const StructuredTensor& grad);

/// Mask prediction head. One projection per window size; the same weights
/// serve every pyramid level.
class MaskHead {
 public:
  MaskHead() = default;
  MaskHead(HeadSpec spec, int channels);

  void init(SplitMix64& rng);
  const HeadSpec& spec() const { return spec_; }

  /// Natural-representation mask logits. For the baseline heads `fm` is
  /// the level's own feature map and the output has s_vu = s_hw = stride.
  /// For the bipyramid head `fm` is a finest-resolution map and `level`
  /// selects the 2^level swap.
  StructuredTensor forward(const FeatureMap& fm, int size_index, int level) const;
  FeatureMap backward(const FeatureMap& fm, int size_index, int level,
                      const StructuredTensor& grad);

  nn::Conv2d& projection(int size_index) { return proj_.at(size_index); }
  const nn::Conv2d& projection(int size_index) const { return proj_.at(size_index); }
  void collect(std::vector<nn::Param*>& out);

 private:
  TensorMeta projected_meta(const FeatureMap& fm, int size_index, int level) const;

  HeadSpec spec_;
  std::vector<nn::Conv2d> proj_;
};

StructuredTensor run_head(const MaskHead& head, const FeatureMap& fm,
                          int size_index = 0, int level = 0);

/// `depth` 3x3 conv + ReLU layers, optionally followed by a 3x3 output
/// convolution without activation.
class ConvTower {
 public:
  struct Cache {
    std::vector<FeatureMap> acts;  // acts[0] is the input
  };

  ConvTower() = default;
  ConvTower(const std::string& name, int channels, int depth, int out_channels);

  void init(SplitMix64& rng, double out_bias = 0.0);
  FeatureMap forward(const FeatureMap& x, Cache* cache = nullptr) const;
  FeatureMap backward(const Cache& cache, const FeatureMap& grad_out);
  void collect(std::vector<nn::Param*>& out);

  std::vector<nn::Conv2d>& layers() { return layers_; }
  bool has_output() const { return has_out_; }
  nn::Conv2d& output() { return out_; }
  const nn::Conv2d& output() const { return out_; }

 private:
  std::vector<nn::Conv2d> layers_;
  nn::Conv2d out_;
  bool has_out_ = false;
};

/// Prior probability used to bias the classification output at init.
inline constexpr double kClassPrior = 0.01;

/// One logit per (window size, class) at every location: channel
/// size_index * num_classes + class.
ConvTower make_cls_head(int channels, int depth, int num_sizes, int num_classes);
/// Four deltas (dy, dx, log dh, log dw) per window size: channel
/// size_index * 4 + component.
ConvTower make_box_head(int channels, int depth, int num_sizes);

FeatureMap run_cls_head(const ConvTower& head, const FeatureMap& fm);
FeatureMap run_box_head(const ConvTower& head, const FeatureMap& fm);

}  // namespace tmask
