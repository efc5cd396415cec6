#include "tmask/losses.hpp"

#include <algorithm>
#include <cmath>

#include "tmask/nn.hpp"

namespace tmask {

double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double mask_bce_window(std::span<const double> logits, std::span<const double> target,
                       double w, std::span<double> grad, double scale) {
  if (logits.size() != target.size()) throw ShapeError("mask_bce_window: size mismatch");
  if (!grad.empty() && grad.size() != logits.size()) {
    throw ShapeError("mask_bce_window: gradient size mismatch");
  }
  const double n = static_cast<double>(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double raw = logits[i];
    const double z = std::clamp(raw, -kLogitClamp, kLogitClamp);
    const double t = target[i];
    sum += w * t * softplus(-z) + (1.0 - t) * softplus(z);
    if (!grad.empty() && raw > -kLogitClamp && raw < kLogitClamp) {
      const double p = nn::sigmoid(z);
      grad[i] += scale * (w * t * (p - 1.0) + (1.0 - t) * p) / n;
    }
  }
  return sum / n;
}

MaskLossResult mask_loss(std::span<const StructuredTensor> preds,
                         std::span<const Assignment> assignments,
                         const MaskLossOptions& opt, std::optional<double> normalizer) {
  MaskLossResult r;
  r.grad.reserve(preds.size());
  for (const StructuredTensor& p : preds) r.grad.emplace_back(p.meta(), 0.0);
  const double count = normalizer ? *normalizer
                                  : static_cast<double>(count_positives(assignments));
  if (count <= 0.0) return r;

  std::vector<double> logits;
  std::vector<double> g;
  for (const Assignment& a : assignments) {
    if (!a.positive) continue;
    const WindowSpec& w = a.window;
    if (w.slot < 0 || static_cast<std::size_t>(w.slot) >= preds.size()) {
      throw ShapeError("mask_loss: window slot out of range");
    }
    const StructuredTensor& p = preds[w.slot];
    if (p.shape().v != w.v || p.shape().u != w.u) {
      throw ShapeError("mask_loss: window size does not match prediction " +
                       to_string(p.shape()));
    }
    const std::size_t cells = static_cast<std::size_t>(w.v) * w.u;
    if (a.target_mask.size() != cells) throw ShapeError("mask_loss: target size mismatch");
    logits.resize(cells);
    g.assign(cells, 0.0);
    const std::size_t stride = p.shape().plane();
    const std::size_t base = static_cast<std::size_t>(w.y) * p.shape().w + w.x;
    for (std::size_t c = 0; c < cells; ++c) logits[c] = p.data()[c * stride + base];
    r.loss += mask_bce_window(logits, a.target_mask, opt.foreground_weight, g, 1.0 / count);
    auto gd = r.grad[w.slot].data();
    for (std::size_t c = 0; c < cells; ++c) gd[c * stride + base] += g[c];
  }
  r.loss /= count;
  return r;
}

double focal_term(double x, bool positive, const FocalOptions& opt, double* grad) {
  const double sign = positive ? 1.0 : -1.0;
  const double at = positive ? opt.alpha : 1.0 - opt.alpha;
  const double xt = sign * x;
  if (opt.variant == FocalVariant::Star) {
    const double z = opt.gamma * xt + opt.beta;
    if (grad) *grad = -at * sign * nn::sigmoid(-z);
    return at * softplus(-z) / opt.gamma;
  }
  const double pt = nn::sigmoid(xt);
  const double qt = nn::sigmoid(-xt);  // 1 - p_t
  const double sp = softplus(-xt);     // -log p_t
  const double mod = std::pow(qt, opt.gamma);
  if (grad) *grad = -sign * at * mod * (opt.gamma * pt * sp + qt);
  return at * mod * sp;
}

namespace {

std::vector<FeatureMap> zeros_like(std::span<const FeatureMap> maps) {
  std::vector<FeatureMap> out;
  out.reserve(maps.size());
  for (const FeatureMap& m : maps) out.emplace_back(m.channels, m.height, m.width, m.stride);
  return out;
}

const FeatureMap& level_map(std::span<const FeatureMap> maps, int level) {
  if (level < 0 || static_cast<std::size_t>(level) >= maps.size()) {
    throw ShapeError("window level has no prediction map");
  }
  return maps[level];
}

}  // namespace

MapLossResult focal_cls_loss(std::span<const FeatureMap> logits,
                             std::span<const Assignment> assignments, int num_classes,
                             const FocalOptions& opt, std::optional<double> normalizer) {
  if (num_classes <= 0) throw ShapeError("focal_cls_loss: num_classes must be positive");
  if (opt.variant == FocalVariant::Star && !(opt.gamma > 0.0)) {
    throw PreconditionError("focal_cls_loss: the star variant needs gamma > 0");
  }
  MapLossResult r;
  r.grad = zeros_like(logits);
  const double count =
      normalizer ? *normalizer
                 : std::max(1.0, static_cast<double>(count_positives(assignments)));
  for (const Assignment& a : assignments) {
    const WindowSpec& w = a.window;
    const FeatureMap& m = level_map(logits, w.level);
    if ((w.size_index + 1) * num_classes > m.channels) {
      throw ShapeError("focal_cls_loss: too few logit channels");
    }
    FeatureMap& g = r.grad[w.level];
    for (int c = 0; c < num_classes; ++c) {
      const int ch = w.size_index * num_classes + c;
      double d = 0.0;
      r.loss += focal_term(m.at(ch, w.y, w.x), a.positive && a.category == c, opt, &d);
      g.at(ch, w.y, w.x) += d / count;
    }
  }
  r.loss /= count;
  return r;
}

MapLossResult box_l1_loss(std::span<const FeatureMap> deltas,
                          std::span<const Assignment> assignments,
                          std::optional<double> normalizer) {
  MapLossResult r;
  r.grad = zeros_like(deltas);
  const double count = normalizer ? *normalizer
                                  : static_cast<double>(count_positives(assignments));
  if (count <= 0.0) return r;
  const double denom = 4.0 * count;
  for (const Assignment& a : assignments) {
    if (!a.positive) continue;
    const WindowSpec& w = a.window;
    const FeatureMap& m = level_map(deltas, w.level);
    if ((w.size_index + 1) * 4 > m.channels) throw ShapeError("box_l1_loss: too few channels");
    for (int k = 0; k < 4; ++k) {
      const int ch = w.size_index * 4 + k;
      const double e = m.at(ch, w.y, w.x) - a.target_box[k];
      r.loss += std::abs(e);
      r.grad[w.level].at(ch, w.y, w.x) += (e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0)) / denom;
    }
  }
  r.loss /= denom;
  return r;
}

double total_loss(double mask, double cls, double box, const LossWeights& w) {
  return w.mask * mask + w.cls * cls + w.box * box;
}

}  // namespace tmask
