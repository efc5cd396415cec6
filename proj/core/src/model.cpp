#include "tmask/model.hpp"

#include <cmath>

namespace tmask {

namespace {

void add_into(FeatureMap& a, const FeatureMap& b) {
  if (!a.same_shape(b)) throw ShapeError("gradient accumulation shape mismatch");
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

FeatureMap zeros_like(const FeatureMap& x) {
  return FeatureMap(x.channels, x.height, x.width, x.stride);
}

bool present(const std::vector<FeatureMap>& v, std::size_t i) {
  return i < v.size() && v[i].channels > 0;
}

}  // namespace

void ModelConfig::validate() const {
  head.validate();
  if (channels <= 0 || image_channels <= 0) throw PreconditionError("channel counts must be positive");
  if (levels < 1) throw PreconditionError("model needs at least one level");
  if (mask_depth < 0 || cls_depth < 0 || box_depth < 0) {
    throw PreconditionError("tower depths must be non-negative");
  }
  if (num_classes < 1) throw PreconditionError("num_classes must be positive");
}

Detector::Detector(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const int c = cfg_.channels;
  const int sizes = static_cast<int>(cfg_.head.window_sizes.size());
  stem_ = nn::Conv2d("stem", cfg_.image_channels, c, 3);
  for (int k = 0; k < cfg_.levels; ++k) {
    stage_a_.emplace_back("stage" + std::to_string(k) + ".a", c, c, 3);
    stage_b_.emplace_back("stage" + std::to_string(k) + ".b", c, c, 3);
  }
  mask_tower_ = ConvTower("mask.tower", c, cfg_.mask_depth, 0);
  mask_head_ = MaskHead(cfg_.head, c);
  cls_tower_ = make_cls_head(c, cfg_.cls_depth, sizes, cfg_.num_classes);
  if (cfg_.use_box) box_tower_ = make_box_head(c, cfg_.box_depth, sizes);
  if (cfg_.head.kind == HeadKind::Bipyramid) fpn_conv_ = nn::Conv2d("fpn.conv", c, c, 3);

  SplitMix64 rng(seed);
  stem_.init(rng);
  for (auto& l : stage_a_) l.init(rng);
  for (auto& l : stage_b_) l.init(rng);
  mask_tower_.init(rng);
  mask_head_.init(rng);
  cls_tower_.init(rng, -std::log((1.0 - kClassPrior) / kClassPrior));
  if (cfg_.use_box) box_tower_.init(rng);
  if (cfg_.head.kind == HeadKind::Bipyramid) fpn_conv_.init(rng);
}

Detector::~Detector() = default;
Detector::Detector(Detector&&) noexcept = default;
Detector& Detector::operator=(Detector&&) noexcept = default;

std::vector<LevelGrid> Detector::level_grids(int height, int width) const {
  const int f = 1 << cfg_.levels;
  if (height % f != 0 || width % f != 0) {
    throw ShapeError("image size must be divisible by 2^levels");
  }
  const double s0 = cfg_.base_stride();
  std::vector<LevelGrid> out;
  for (int k = 0; k < cfg_.levels; ++k) {
    LevelGrid g;
    g.level = k;
    const double stride = s0 * (1 << k);
    g.height = height / static_cast<int>(stride);
    g.width = width / static_cast<int>(stride);
    if (cfg_.head.kind == HeadKind::Bipyramid) {
      g.units = Units(s0, stride);
      g.origin = 0.5 * s0;
      for (int v : cfg_.head.window_sizes) g.window_sizes.push_back(v << k);
    } else {
      g.units = Units(stride, stride);
      g.origin = 0.5 * stride;
      g.window_sizes = cfg_.head.window_sizes;
    }
    out.push_back(std::move(g));
  }
  return out;
}

Predictions Detector::forward(const FeatureMap& image, Cache* cache) const {
  if (image.channels != cfg_.image_channels) throw ShapeError("image channel count mismatch");
  const int f = 1 << cfg_.levels;
  if (image.height % f != 0 || image.width % f != 0) {
    throw ShapeError("image size must be divisible by 2^levels");
  }
  const int L = cfg_.levels;
  Cache local;
  Cache& c = cache ? *cache : local;
  c = Cache{};
  c.image = image;
  c.stem = nn::relu(stem_.forward(image));
  for (int k = 0; k < L; ++k) {
    c.pooled.push_back(nn::avg_pool2(k == 0 ? c.stem : c.b[k - 1]));
    c.a.push_back(nn::relu(stage_a_[k].forward(c.pooled[k])));
    c.b.push_back(nn::relu(stage_b_[k].forward(c.a[k])));
  }
  c.pyramid.resize(L);
  c.pyramid[L - 1] = c.b[L - 1];
  for (int k = L - 2; k >= 0; --k) {
    FeatureMap p = upsample_hw_bilinear(c.pyramid[k + 1], 2);
    for (std::size_t i = 0; i < p.data.size(); ++i) p.data[i] = 0.5 * (c.b[k].data[i] + p.data[i]);
    c.pyramid[k] = std::move(p);
  }

  Predictions out;
  c.cls_tower.resize(L);
  c.box_tower.resize(L);
  c.mask_tower.resize(L);
  for (int k = 0; k < L; ++k) {
    out.cls.push_back(cls_tower_.forward(c.pyramid[k], &c.cls_tower[k]));
    if (cfg_.use_box) out.box.push_back(box_tower_.forward(c.pyramid[k], &c.box_tower[k]));
  }
  if (cfg_.head.kind == HeadKind::Bipyramid) {
    c.mask_in = convert_fpn_maps(c.pyramid, c.pyramid[0], fpn_conv_, &c.fpn);
  } else {
    c.mask_in = c.pyramid;
  }
  const int sizes = static_cast<int>(cfg_.head.window_sizes.size());
  for (int k = 0; k < L; ++k) {
    c.mask_feat.push_back(mask_tower_.forward(c.mask_in[k], &c.mask_tower[k]));
    for (int s = 0; s < sizes; ++s) out.masks.push_back(mask_head_.forward(c.mask_feat[k], s, k));
  }
  if (!cache) c = Cache{};
  return out;
}

FeatureMap Detector::backward(const Cache& c, const PredictionGrads& grads) {
  const int L = cfg_.levels;
  if (static_cast<int>(c.pyramid.size()) != L) throw ShapeError("backward: cache is empty");
  const int sizes = static_cast<int>(cfg_.head.window_sizes.size());
  std::vector<FeatureMap> g_pyr;
  for (int k = 0; k < L; ++k) g_pyr.push_back(zeros_like(c.pyramid[k]));

  for (int k = 0; k < L; ++k) {
    if (present(grads.cls, k)) add_into(g_pyr[k], cls_tower_.backward(c.cls_tower[k], grads.cls[k]));
    if (cfg_.use_box && present(grads.box, k)) {
      add_into(g_pyr[k], box_tower_.backward(c.box_tower[k], grads.box[k]));
    }
  }

  std::vector<FeatureMap> g_in;
  bool any_mask = false;
  for (int k = 0; k < L; ++k) {
    FeatureMap g_feat = zeros_like(c.mask_feat[k]);
    bool touched = false;
    for (int s = 0; s < sizes; ++s) {
      const std::size_t slot = static_cast<std::size_t>(k) * sizes + s;
      if (slot >= grads.masks.size() || grads.masks[slot].data().empty()) continue;
      add_into(g_feat, mask_head_.backward(c.mask_feat[k], s, k, grads.masks[slot]));
      touched = true;
    }
    g_in.push_back(touched ? mask_tower_.backward(c.mask_tower[k], g_feat)
                           : zeros_like(c.mask_in[k]));
    any_mask = any_mask || touched;
  }
  if (any_mask) {
    if (cfg_.head.kind == HeadKind::Bipyramid) {
      FpnConversionGrads fg =
          convert_fpn_maps_backward(g_in, c.pyramid, c.pyramid[0], fpn_conv_, c.fpn);
      for (int k = 0; k < L; ++k) add_into(g_pyr[k], fg.maps[k]);
      add_into(g_pyr[0], fg.finest);
    } else {
      for (int k = 0; k < L; ++k) add_into(g_pyr[k], g_in[k]);
    }
  }

  std::vector<FeatureMap> g_b(L);
  for (int k = 0; k + 1 < L; ++k) {
    FeatureMap half = g_pyr[k];
    for (double& v : half.data) v *= 0.5;
    add_into(g_pyr[k + 1], upsample_hw_bilinear_backward(half, c.pyramid[k + 1], 2));
    g_b[k] = std::move(half);
  }
  g_b[L - 1] = std::move(g_pyr[L - 1]);

  FeatureMap g_stem;
  for (int k = L - 1; k >= 0; --k) {
    FeatureMap g = nn::relu_backward(c.b[k], g_b[k]);
    g = stage_b_[k].backward(c.a[k], g);
    g = nn::relu_backward(c.a[k], g);
    g = stage_a_[k].backward(c.pooled[k], g);
    if (k > 0) {
      add_into(g_b[k - 1], nn::avg_pool2_backward(g, c.b[k - 1]));
    } else {
      g_stem = nn::avg_pool2_backward(g, c.stem);
    }
  }
  g_stem = nn::relu_backward(c.stem, g_stem);
  return stem_.backward(c.image, g_stem);
}

std::vector<nn::Param*> Detector::params() {
  std::vector<nn::Param*> out;
  stem_.collect(out);
  for (int k = 0; k < cfg_.levels; ++k) {
    stage_a_[k].collect(out);
    stage_b_[k].collect(out);
  }
  mask_tower_.collect(out);
  mask_head_.collect(out);
  cls_tower_.collect(out);
  if (cfg_.use_box) box_tower_.collect(out);
  if (cfg_.head.kind == HeadKind::Bipyramid) fpn_conv_.collect(out);
  return out;
}

}  // namespace tmask
