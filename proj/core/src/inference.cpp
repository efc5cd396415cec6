#include "tmask/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "tmask/nn.hpp"

namespace tmask {

bool detection_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  return std::tie(a.category, a.window.y, a.window.x, a.window.size_index, a.window.level) <
         std::tie(b.category, b.window.y, b.window.x, b.window.size_index, b.window.level);
}

std::vector<Detection> decode(std::span<const WindowSpec> windows,
                              std::span<const FeatureMap> cls,
                              std::span<const StructuredTensor> masks,
                              std::span<const FeatureMap> boxes, int num_classes,
                              const DecodeOptions& opt) {
  if (num_classes <= 0) throw ShapeError("decode: num_classes must be positive");
  std::vector<Detection> cands;
  for (const WindowSpec& w : windows) {
    if (w.level < 0 || static_cast<std::size_t>(w.level) >= cls.size()) {
      throw ShapeError("decode: window level has no class map");
    }
    const FeatureMap& c = cls[w.level];
    int best = 0;
    double best_logit = -HUGE_VAL;
    for (int k = 0; k < num_classes; ++k) {
      const double z = c.at(w.size_index * num_classes + k, w.y, w.x);
      if (z > best_logit) {
        best_logit = z;
        best = k;
      }
    }
    const double score = nn::sigmoid(best_logit);
    if (score < opt.score_thresh) continue;
    Detection d;
    d.score = score;
    d.category = best;
    d.window = w;
    cands.push_back(std::move(d));
  }
  std::sort(cands.begin(), cands.end(), detection_before);
  if (opt.topk >= 0 && cands.size() > static_cast<std::size_t>(opt.topk)) {
    cands.resize(opt.topk);
  }
  for (Detection& d : cands) {
    const WindowSpec& w = d.window;
    if (w.slot < 0 || static_cast<std::size_t>(w.slot) >= masks.size()) {
      throw ShapeError("decode: window slot has no mask prediction");
    }
    const StructuredTensor& m = masks[w.slot];
    if (m.shape().v != w.v || m.shape().u != w.u) throw ShapeError("decode: mask size mismatch");
    const std::size_t cells = static_cast<std::size_t>(w.v) * w.u;
    const std::size_t stride = m.shape().plane();
    const std::size_t base = static_cast<std::size_t>(w.y) * m.shape().w + w.x;
    d.soft_mask.resize(cells);
    for (std::size_t i = 0; i < cells; ++i) {
      d.soft_mask[i] = nn::sigmoid(m.data()[i * stride + base]);
    }
    if (!boxes.empty()) {
      const FeatureMap& b = boxes[w.level];
      const double deltas[4] = {b.at(w.size_index * 4 + 0, w.y, w.x),
                                b.at(w.size_index * 4 + 1, w.y, w.x),
                                b.at(w.size_index * 4 + 2, w.y, w.x),
                                b.at(w.size_index * 4 + 3, w.y, w.x)};
      d.box = decode_box(w, deltas);
    }
  }
  return cands;
}

BinaryMask paste_mask(const Detection& d, int height, int width, double thresh) {
  BinaryMask out(height, width);
  const WindowSpec& w = d.window;
  const double s = w.units.sigma_vu();
  if (d.soft_mask.size() != static_cast<std::size_t>(w.v) * w.u || !(s > 0.0)) return out;
  const Box f = w.footprint();
  const double vmin = centered_min(w.v);
  const double vmax = centered_max(w.v);
  const double umin = centered_min(w.u);
  const double umax = centered_max(w.u);
  const int y_lo = std::max(0, static_cast<int>(std::ceil(f.y0 - 0.5)));
  const int y_hi = std::min(height, static_cast<int>(std::ceil(f.y1 - 0.5)));
  const int x_lo = std::max(0, static_cast<int>(std::ceil(f.x0 - 0.5)));
  const int x_hi = std::min(width, static_cast<int>(std::ceil(f.x1 - 0.5)));
  for (int y = y_lo; y < y_hi; ++y) {
    const double sv = std::clamp((y + 0.5 - w.center_y) / s, vmin, vmax);
    const int v0 = static_cast<int>(std::floor(sv));
    const int iv0 = v0 - static_cast<int>(vmin);
    const int iv1 = std::min(iv0 + 1, w.v - 1);
    const double wv = sv - v0;
    for (int x = x_lo; x < x_hi; ++x) {
      const double su = std::clamp((x + 0.5 - w.center_x) / s, umin, umax);
      const int u0 = static_cast<int>(std::floor(su));
      const int iu0 = u0 - static_cast<int>(umin);
      const int iu1 = std::min(iu0 + 1, w.u - 1);
      const double wu = su - u0;
      const auto at = [&](int iv, int iu) { return d.soft_mask[static_cast<std::size_t>(iv) * w.u + iu]; };
      const double p = (1.0 - wv) * ((1.0 - wu) * at(iv0, iu0) + wu * at(iv0, iu1)) +
                       wv * ((1.0 - wu) * at(iv1, iu0) + wu * at(iv1, iu1));
      if (p >= thresh) out.at(y, x) = 1;
    }
  }
  return out;
}

Box nms_box(const Detection& d, NmsMode mode) {
  return mode == NmsMode::MaskBB ? tight_box(d.binary_mask) : d.box;
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_thresh, NmsMode mode) {
  std::sort(dets.begin(), dets.end(), detection_before);
  std::vector<Box> boxes;
  boxes.reserve(dets.size());
  for (const Detection& d : dets) boxes.push_back(nms_box(d, mode));
  std::vector<Detection> kept;
  std::vector<std::size_t> kept_idx;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    bool suppressed = false;
    for (std::size_t k : kept_idx) {
      if (dets[k].category == dets[i].category && iou(boxes[k], boxes[i]) > iou_thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept_idx.push_back(i);
  }
  kept.reserve(kept_idx.size());
  for (std::size_t k : kept_idx) kept.push_back(std::move(dets[k]));
  return kept;
}

double Calibration::apply(int category, double score) const {
  const auto it = curves_.find(category);
  if (it == curves_.end() || it->second.scores.empty()) return score;
  const Curve& c = it->second;
  // Operating point: the lowest-ranked validation detection still scoring
  // at least `score`. Scores above every validation score take rank 0.
  const auto pos = std::upper_bound(c.scores.begin(), c.scores.end(), score,
                                    [](double s, double e) { return s > e; });
  const std::size_t n = static_cast<std::size_t>(pos - c.scores.begin());
  return c.precision[n == 0 ? 0 : n - 1];
}

void Calibration::apply(std::vector<Detection>& dets) const {
  for (Detection& d : dets) d.calibrated = apply(d.category, d.score);
}

std::vector<bool> match_detections(std::span<const Detection> dets,
                                   std::span<const GroundTruthInstance> gts,
                                   double iou_thresh) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });
  std::vector<bool> used(gts.size(), false);
  std::vector<bool> tp(dets.size(), false);
  for (std::size_t i : order) {
    const Detection& d = dets[i];
    int best = -1;
    double best_iou = iou_thresh;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || gts[g].category != d.category) continue;
      const double o = mask_iou(d.binary_mask, gts[g].mask);
      if (o >= best_iou) {
        if (best < 0 || o > best_iou) {
          best_iou = o;
          best = static_cast<int>(g);
        }
      }
    }
    if (best >= 0) {
      used[best] = true;
      tp[i] = true;
    }
  }
  return tp;
}

std::vector<double> precision_envelope(const std::vector<bool>& tp) {
  std::vector<double> p(tp.size());
  double hits = 0.0;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    hits += tp[i] ? 1.0 : 0.0;
    p[i] = hits / static_cast<double>(i + 1);
  }
  for (std::size_t i = p.size(); i-- > 1;) p[i - 1] = std::max(p[i - 1], p[i]);
  return p;
}

namespace {

struct Pooled {
  double score;
  std::size_t image;
  std::size_t index;
  bool tp;
};

std::map<int, std::vector<Pooled>> pool(std::span<const std::vector<Detection>> dets,
                                        std::span<const std::vector<GroundTruthInstance>> gts,
                                        double iou_thresh) {
  if (dets.size() != gts.size()) throw ShapeError("detections and ground truth differ in image count");
  std::map<int, std::vector<Pooled>> by_cat;
  for (std::size_t im = 0; im < dets.size(); ++im) {
    const std::vector<bool> tp = match_detections(dets[im], gts[im], iou_thresh);
    for (std::size_t i = 0; i < dets[im].size(); ++i) {
      by_cat[dets[im][i].category].push_back({dets[im][i].score, im, i, tp[i]});
    }
  }
  for (auto& [cat, v] : by_cat) {
    std::sort(v.begin(), v.end(), [](const Pooled& a, const Pooled& b) {
      if (a.score != b.score) return a.score > b.score;
      return std::tie(a.image, a.index) < std::tie(b.image, b.index);
    });
  }
  return by_cat;
}

}  // namespace

Calibration calibrate(std::span<const std::vector<Detection>> dets,
                      std::span<const std::vector<GroundTruthInstance>> gts,
                      double iou_thresh) {
  Calibration cal;
  for (auto& [cat, v] : pool(dets, gts, iou_thresh)) {
    std::vector<bool> tp;
    Calibration::Curve curve;
    for (const Pooled& p : v) {
      tp.push_back(p.tp);
      curve.scores.push_back(p.score);
    }
    curve.precision = precision_envelope(tp);
    cal.curves()[cat] = std::move(curve);
  }
  return cal;
}

double interpolated_ap(const std::vector<bool>& tp, std::size_t num_gt) {
  if (num_gt == 0) return 0.0;
  const std::vector<double> env = precision_envelope(tp);
  std::vector<double> recall(tp.size());
  double hits = 0.0;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    hits += tp[i] ? 1.0 : 0.0;
    recall[i] = hits / static_cast<double>(num_gt);
  }
  double sum = 0.0;
  std::size_t k = 0;
  for (int r = 0; r <= 100; ++r) {
    const double rt = r / 100.0;
    while (k < recall.size() && recall[k] < rt - 1e-12) ++k;
    if (k < recall.size()) sum += env[k];
  }
  return sum / 101.0;
}

ApResult eval_ap(std::span<const std::vector<Detection>> dets,
                 std::span<const std::vector<GroundTruthInstance>> gts,
                 std::span<const double> iou_thresholds) {
  ApResult r;
  r.thresholds.assign(iou_thresholds.begin(), iou_thresholds.end());
  std::map<int, std::size_t> num_gt;
  for (const auto& im : gts) {
    for (const auto& g : im) ++num_gt[g.category];
  }
  for (double t : iou_thresholds) {
    auto pooled = pool(dets, gts, t);
    double sum = 0.0;
    for (const auto& [cat, n] : num_gt) {
      std::vector<bool> tp;
      for (const Pooled& p : pooled[cat]) tp.push_back(p.tp);
      const double ap = interpolated_ap(tp, n);
      r.per_category[cat].push_back(ap);
      sum += ap;
    }
    r.ap.push_back(num_gt.empty() ? 0.0 : sum / static_cast<double>(num_gt.size()));
  }
  return r;
}

}  // namespace tmask
