#include "tmask/heads.hpp"

#include <cmath>
#include <sstream>

namespace tmask {

const char* to_string(HeadKind k) {
  switch (k) {
    case HeadKind::SimpleNatural: return "simple_natural";
    case HeadKind::SimpleAligned: return "simple_aligned";
    case HeadKind::UpscaleNatural: return "upscale_natural";
    case HeadKind::UpscaleAligned: return "upscale_aligned";
    case HeadKind::Bipyramid: return "bipyramid";
  }
  return "?";
}

HeadKind parse_head_kind(const std::string& name) {
  for (HeadKind k : {HeadKind::SimpleNatural, HeadKind::SimpleAligned,
                     HeadKind::UpscaleNatural, HeadKind::UpscaleAligned,
                     HeadKind::Bipyramid}) {
    if (name == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown head kind: " + name);
}

void HeadSpec::validate() const {
  if (window_sizes.empty()) throw PreconditionError("head needs at least one window size");
  if (lambda < 1) throw PreconditionError("head lambda must be >= 1");
  const bool upscale = kind == HeadKind::UpscaleNatural || kind == HeadKind::UpscaleAligned;
  if (!upscale && lambda != 1) {
    throw PreconditionError(std::string(to_string(kind)) + " head does not upscale; lambda must be 1");
  }
  for (int v : window_sizes) {
    if (v < 1) throw PreconditionError("window size must be positive");
    if (upscale && v % lambda != 0) {
      std::ostringstream os;
      os << "window size " << v << " is not divisible by lambda " << lambda;
      throw PreconditionError(os.str());
    }
  }
}

int HeadSpec::projected_size(int size_index) const {
  const int v = window_sizes.at(size_index);
  return kind == HeadKind::UpscaleNatural || kind == HeadKind::UpscaleAligned ? v / lambda : v;
}

StructuredTensor conv_reshape(const FeatureMap& fm, const nn::Conv2d& conv,
                              int v, int u, Repr repr, const Units& units) {
  if (conv.out_channels() != v * u) {
    std::ostringstream os;
    os << "conv_reshape: " << conv.out_channels() << " channels do not factor as "
       << v << "x" << u;
    throw ShapeError(os.str());
  }
  FeatureMap y = conv.forward(fm);
  return StructuredTensor({v, u, fm.height, fm.width}, repr, units, std::move(y.data));
}

FeatureMap conv_reshape_backward(const FeatureMap& fm, nn::Conv2d& conv,
                                 const StructuredTensor& grad) {
  const Shape4& s = grad.shape();
  if (s.v * s.u != conv.out_channels() || s.h != fm.height || s.w != fm.width) {
    throw ShapeError("conv_reshape_backward: gradient shape mismatch");
  }
  FeatureMap g(conv.out_channels(), fm.height, fm.width, fm.stride);
  std::copy(grad.data().begin(), grad.data().end(), g.data.begin());
  return conv.backward(fm, g);
}

MaskHead::MaskHead(HeadSpec spec, int channels) : spec_(std::move(spec)) {
  spec_.validate();
  for (std::size_t i = 0; i < spec_.window_sizes.size(); ++i) {
    const int p = spec_.projected_size(static_cast<int>(i));
    proj_.emplace_back("mask.proj" + std::to_string(i), channels, p * p, 1);
  }
}

void MaskHead::init(SplitMix64& rng) {
  for (auto& c : proj_) c.init(rng, 0.0, 1.0);
}

void MaskHead::collect(std::vector<nn::Param*>& out) {
  for (auto& c : proj_) c.collect(out);
}

TensorMeta MaskHead::projected_meta(const FeatureMap& fm, int size_index,
                                    int level) const {
  const int p = spec_.projected_size(size_index);
  const double s = fm.stride;
  TensorMeta m;
  m.shape = {p, p, fm.height, fm.width};
  switch (spec_.kind) {
    case HeadKind::SimpleNatural:
      m.repr = Repr::Natural;
      m.units = Units(s, s);
      break;
    case HeadKind::SimpleAligned:
      m.repr = Repr::Aligned;
      m.units = Units(s, s);
      break;
    case HeadKind::UpscaleNatural:
      m.repr = Repr::Natural;
      m.units = Units(spec_.lambda * s, s);
      break;
    case HeadKind::UpscaleAligned:
      m.repr = Repr::Aligned;
      m.units = Units(spec_.lambda * s, s);
      break;
    case HeadKind::Bipyramid:
      m.repr = Repr::Aligned;
      m.units = Units((1 << level) * s, s);
      break;
  }
  return m;
}

StructuredTensor MaskHead::forward(const FeatureMap& fm, int size_index,
                                   int level) const {
  const TensorMeta m = projected_meta(fm, size_index, level);
  StructuredTensor t = conv_reshape(fm, proj_.at(size_index), m.shape.v, m.shape.u,
                                    m.repr, m.units);
  const TransformConfig cfg{spec_.lambda, spec_.fill, spec_.interpolation};
  switch (spec_.kind) {
    case HeadKind::SimpleNatural:
      return t;
    case HeadKind::SimpleAligned:
      return align2nat(t, spec_.fill);
    case HeadKind::UpscaleNatural:
      return up_bilinear_vu(t, spec_.lambda, spec_.interpolation);
    case HeadKind::UpscaleAligned:
      return up_align2nat(t, cfg);
    case HeadKind::Bipyramid:
      return swap_align2nat(t, {1 << level, spec_.fill, spec_.interpolation});
  }
  return t;
}

FeatureMap MaskHead::backward(const FeatureMap& fm, int size_index, int level,
                              const StructuredTensor& grad) {
  const TensorMeta m = projected_meta(fm, size_index, level);
  const TransformConfig cfg{spec_.lambda, spec_.fill, spec_.interpolation};
  StructuredTensor g;
  switch (spec_.kind) {
    case HeadKind::SimpleNatural:
      g = grad;
      break;
    case HeadKind::SimpleAligned:
      g = align2nat_backward(grad, m);
      break;
    case HeadKind::UpscaleNatural:
      g = up_bilinear_vu_backward(grad, m, spec_.lambda, spec_.interpolation);
      break;
    case HeadKind::UpscaleAligned:
      g = up_align2nat_backward(grad, m, cfg);
      break;
    case HeadKind::Bipyramid:
      g = swap_align2nat_backward(grad, m, {1 << level, spec_.fill, spec_.interpolation});
      break;
  }
  return conv_reshape_backward(fm, proj_.at(size_index), g);
}

StructuredTensor run_head(const MaskHead& head, const FeatureMap& fm,
                          int size_index, int level) {
  return head.forward(fm, size_index, level);
}

ConvTower::ConvTower(const std::string& name, int channels, int depth,
                     int out_channels) {
  for (int i = 0; i < depth; ++i) {
    layers_.emplace_back(name + ".conv" + std::to_string(i), channels, channels, 3);
  }
  if (out_channels > 0) {
    out_ = nn::Conv2d(name + ".out", channels, out_channels, 3);
    has_out_ = true;
  }
}

void ConvTower::init(SplitMix64& rng, double out_bias) {
  for (auto& l : layers_) l.init(rng);
  if (has_out_) out_.init_normal(rng, 0.01, out_bias);
}

FeatureMap ConvTower::forward(const FeatureMap& x, Cache* cache) const {
  if (cache) {
    cache->acts.clear();
    cache->acts.push_back(x);
  }
  FeatureMap h = x;
  for (const auto& l : layers_) {
    h = nn::relu(l.forward(h));
    if (cache) cache->acts.push_back(h);
  }
  return has_out_ ? out_.forward(h) : h;
}

FeatureMap ConvTower::backward(const Cache& cache, const FeatureMap& grad_out) {
  if (cache.acts.size() != layers_.size() + 1) {
    throw ShapeError("ConvTower::backward: cache does not match tower depth");
  }
  FeatureMap g = has_out_ ? out_.backward(cache.acts.back(), grad_out) : grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = nn::relu_backward(cache.acts[i + 1], g);
    g = layers_[i].backward(cache.acts[i], g);
  }
  return g;
}

void ConvTower::collect(std::vector<nn::Param*>& out) {
  for (auto& l : layers_) l.collect(out);
  if (has_out_) out_.collect(out);
}

ConvTower make_cls_head(int channels, int depth, int num_sizes, int num_classes) {
  return ConvTower("cls", channels, depth, num_sizes * num_classes);
}

ConvTower make_box_head(int channels, int depth, int num_sizes) {
  return ConvTower("box", channels, depth, num_sizes * 4);
}

FeatureMap run_cls_head(const ConvTower& head, const FeatureMap& fm) {
  return head.forward(fm);
}

FeatureMap run_box_head(const ConvTower& head, const FeatureMap& fm) {
  return head.forward(fm);
}

}  // namespace tmask
