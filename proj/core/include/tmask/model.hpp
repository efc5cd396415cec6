#pragma once

#include <cstdint>
#include <vector>

#include "tmask/assignment.hpp"
#include "tmask/bipyramid.hpp"
#include "tmask/heads.hpp"
#include "tmask/nn.hpp"

namespace tmask {

struct ModelConfig {
  HeadSpec head;
  int channels = 32;
  int image_channels = 3;
  /// Pyramid levels; level k has stride 2^(k+1).
  int levels = 2;
  int mask_depth = 2;
  int cls_depth = 2;
  int box_depth = 2;
  int num_classes = 3;
  bool use_box = true;

  void validate() const;
  /// Image stride of the finest pyramid level.
  double base_stride() const { return 2.0; }
};

struct Predictions {
  std::vector<FeatureMap> cls;          // per level
  std::vector<FeatureMap> box;          // per level; empty without a box head
  std::vector<StructuredTensor> masks;  // per slot = level * sizes + size
};

/// Gradients with the same layout as Predictions. Empty entries are zero.
struct PredictionGrads {
  std::vector<FeatureMap> cls;
  std::vector<FeatureMap> box;
  std::vector<StructuredTensor> masks;
};

/// Toy dense detector: a small strided backbone with a top-down pathway,
/// class and box towers on each pyramid level, and the mask head. The
/// bipyramid head reads all levels at the finest resolution through
/// convert_fpn_maps.
class Detector {
 public:
  struct Cache;

  Detector(ModelConfig cfg, std::uint64_t seed);
  ~Detector();
  Detector(Detector&&) noexcept;
  Detector& operator=(Detector&&) noexcept;

  const ModelConfig& config() const { return cfg_; }

  /// Sliding-window grids produced for an image of the given size.
  std::vector<LevelGrid> level_grids(int height, int width) const;

  Predictions forward(const FeatureMap& image, Cache* cache = nullptr) const;
  /// Accumulates parameter gradients. Returns dLoss/dimage.
  FeatureMap backward(const Cache& cache, const PredictionGrads& grads);

  std::vector<nn::Param*> params();
  MaskHead& mask_head() { return mask_head_; }

 private:
  ModelConfig cfg_;
  nn::Conv2d stem_;
  std::vector<nn::Conv2d> stage_a_;
  std::vector<nn::Conv2d> stage_b_;
  ConvTower mask_tower_;
  MaskHead mask_head_;
  ConvTower cls_tower_;
  ConvTower box_tower_;
  nn::Conv2d fpn_conv_;
};

struct Detector::Cache {
  FeatureMap image;
  FeatureMap stem;  // relu(stem(image))
  std::vector<FeatureMap> pooled, a, b;  // per level
  std::vector<FeatureMap> pyramid;       // top-down outputs P_k
  std::vector<FeatureMap> mask_in;       // input of the mask tower per level
  FpnConversionCache fpn;
  std::vector<ConvTower::Cache> mask_tower, cls_tower, box_tower;
  std::vector<FeatureMap> mask_feat;  // mask tower outputs per level
};

}  // namespace tmask
