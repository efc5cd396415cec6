#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tmask::oracle {

StructuredTensor random_tensor(SplitMix64& rng, Shape4 shape, Repr repr, Units units,
                               double lo, double hi) {
  std::vector<double> d(shape.size());
  for (double& x : d) x = rng.uniform(lo, hi);
  return StructuredTensor(shape, repr, units, std::move(d));
}

FeatureMap random_map(SplitMix64& rng, int channels, int height, int width,
                      double stride, double lo, double hi) {
  FeatureMap m(channels, height, width, stride);
  for (double& v : m.data) v = rng.uniform(lo, hi);
  return m;
}

StructuredTensor code_tensor(Shape4 shape, Repr repr, Units units) {
  StructuredTensor t(shape, repr, units);
  for (int v : centered_coords(shape.v))
    for (int u : centered_coords(shape.u))
      for (int y = 0; y < shape.h; ++y)
        for (int x = 0; x < shape.w; ++x) t.at(v, u, y, x) = 1000.0 * v + 100.0 * u + 10.0 * y + x;
  return t;
}

namespace {

int alpha_of(const Units& units) {
  const double a = units.sigma_vu() / units.sigma_hw();
  const double r = std::round(a);
  if (r < 1.0 || std::abs(a - r) > 1e-9) throw PreconditionError("oracle: alpha is not a positive integer");
  return static_cast<int>(r);
}

double read_or(const StructuredTensor& t, int v, int u, int y, int x, double fill) {
  return t.contains(v, u, y, x) ? t.at(v, u, y, x) : fill;
}

}  // namespace

StructuredTensor align2nat(const StructuredTensor& t, double fill) {
  if (t.repr() != Repr::Aligned) throw PreconditionError("oracle align2nat: not aligned");
  const int a = alpha_of(t.units());
  const Shape4 s = t.shape();
  StructuredTensor out(s, Repr::Natural, t.units());
  for (int v : centered_coords(s.v))
    for (int u : centered_coords(s.u))
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) out.at(v, u, y, x) = read_or(t, v, u, y + a * v, x + a * u, fill);
  return out;
}

StructuredTensor nat2align(const StructuredTensor& t, double fill) {
  if (t.repr() != Repr::Natural) throw PreconditionError("oracle nat2align: not natural");
  const int a = alpha_of(t.units());
  const Shape4 s = t.shape();
  StructuredTensor out(s, Repr::Aligned, t.units());
  for (int v : centered_coords(s.v))
    for (int u : centered_coords(s.u))
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) out.at(v, u, y, x) = read_or(t, v, u, y - a * v, x - a * u, fill);
  return out;
}

StructuredTensor align2nat_general(const StructuredTensor& t, const Units& target, double fill) {
  const Units& src = t.units();
  const double rv = target.sigma_vu() / src.sigma_vu();
  const double rh = target.sigma_hw() / src.sigma_hw();
  const double rc = target.sigma_vu() / src.sigma_hw();
  const auto as_int = [](double c) {
    const double r = std::round(c);
    if (std::abs(c - r) > 1e-9 * std::max(1.0, std::abs(c))) {
      throw PreconditionError("oracle align2nat_general: non-integer coordinate");
    }
    return static_cast<int>(r);
  };
  const Shape4 in = t.shape();
  const Shape4 s{as_int(in.v / rv), as_int(in.u / rv), as_int(in.h / rh), as_int(in.w / rh)};
  if (s.v < 1 || s.u < 1 || s.h < 1 || s.w < 1) throw PreconditionError("oracle: empty output");
  StructuredTensor out(s, Repr::Natural, target);
  for (int v : centered_coords(s.v))
    for (int u : centered_coords(s.u))
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
          out.at(v, u, y, x) = read_or(t, as_int(rv * v), as_int(rv * u), as_int(rh * y + rc * v),
                                       as_int(rh * x + rc * u), fill);
        }
  return out;
}

int round_bin(int c, int k, int n) {
  const int b = static_cast<int>(std::floor(static_cast<double>(k) * c / n + 0.5));
  return std::clamp(b, -(k / 2), k - 1 - k / 2);
}

StructuredTensor up_bilinear_vu(const StructuredTensor& t, int lambda, Interpolation interp) {
  const Shape4 in = t.shape();
  const Shape4 s{in.v * lambda, in.u * lambda, in.h, in.w};
  StructuredTensor out(s, t.repr(), Units(t.units().sigma_vu() / lambda, t.units().sigma_hw()));
  const auto src = [&](int c, int n) {
    const double lo = -(n / 2);
    const double hi = n - 1 - n / 2;
    return std::clamp(static_cast<double>(c) / lambda, lo, hi);
  };
  for (int v : centered_coords(s.v)) {
    for (int u : centered_coords(s.u)) {
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
          double val;
          if (interp == Interpolation::NearestNeighbor) {
            val = t.at(round_bin(v, in.v, s.v), round_bin(u, in.u, s.u), y, x);
          } else {
            const double sv = src(v, in.v);
            const double su = src(u, in.u);
            const int v0 = static_cast<int>(std::floor(sv));
            const int u0 = static_cast<int>(std::floor(su));
            const int v1 = std::min(v0 + 1, in.v - 1 - in.v / 2);
            const int u1 = std::min(u0 + 1, in.u - 1 - in.u / 2);
            const double wv = sv - v0;
            const double wu = su - u0;
            val = (1.0 - wv) * ((1.0 - wu) * t.at(v0, u0, y, x) + wu * t.at(v0, u1, y, x)) +
                  wv * ((1.0 - wu) * t.at(v1, u0, y, x) + wu * t.at(v1, u1, y, x));
          }
          out.at(v, u, y, x) = val;
        }
      }
    }
  }
  return out;
}

StructuredTensor subsample_hw(const StructuredTensor& t, int factor) {
  const Shape4 in = t.shape();
  if (in.h % factor || in.w % factor) throw ShapeError("oracle subsample: indivisible");
  const Shape4 s{in.v, in.u, in.h / factor, in.w / factor};
  StructuredTensor out(s, t.repr(), Units(t.units().sigma_vu(), t.units().sigma_hw() * factor));
  for (int v : centered_coords(s.v))
    for (int u : centered_coords(s.u))
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) out.at(v, u, y, x) = t.at(v, u, factor * y, factor * x);
  return out;
}

StructuredTensor naive_swap(const StructuredTensor& t, const TransformConfig& cfg) {
  return oracle::subsample_hw(oracle::align2nat(oracle::up_bilinear_vu(t, cfg.lambda, cfg.interpolation), cfg.fill),
                      cfg.lambda);
}

StructuredTensor instancefcn_direct(const StructuredTensor& g, int v, int u, double fill) {
  const Shape4 in = g.shape();
  const Shape4 s{v, u, in.h, in.w};
  StructuredTensor out(s, Repr::Natural, Units(g.units().sigma_hw(), g.units().sigma_hw()));
  for (int cv : centered_coords(v))
    for (int cu : centered_coords(u))
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
          const int bv = round_bin(cv, in.v, v);
          const int bu = round_bin(cu, in.u, u);
          out.at(cv, cu, y, x) = read_or(g, bv, bu, y + cv, x + cu, fill);
        }
  return out;
}

double gradcheck(const std::function<double(std::span<const double>)>& f, std::vector<double> x,
                 std::span<const double> analytic, double h) {
  if (analytic.size() != x.size()) throw std::invalid_argument("gradcheck: size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    const double num = (fp - fm) / (2.0 * h);
    const double scale = std::max({1.0, std::abs(num), std::abs(analytic[i])});
    worst = std::max(worst, std::abs(num - analytic[i]) / scale);
  }
  return worst;
}

double gradcheck_sampled(const std::function<double(std::span<const double>)>& f,
                         std::vector<double> x, std::span<const double> analytic, SplitMix64& rng,
                         int probes, double h) {
  if (analytic.size() != x.size()) throw std::invalid_argument("gradcheck: size mismatch");
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    const std::size_t i = rng.next() % x.size();
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    const double num = (fp - fm) / (2.0 * h);
    const double scale = std::max({1.0, std::abs(num), std::abs(analytic[i])});
    worst = std::max(worst, std::abs(num - analytic[i]) / scale);
  }
  return worst;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  long double s = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return static_cast<double>(s);
}

int brute_force_label(const WindowSpec& w, std::span<const WindowSpec> all_windows,
                      std::span<const GroundTruthInstance> instances, const AssignmentRule& rule) {
  const double tol = 1e-9;
  const double s = w.units.sigma_vu();
  const double side = std::max(w.v, w.u) * s;
  double smallest = side;
  for (const WindowSpec& o : all_windows) smallest = std::min(smallest, std::max(o.v, o.u) * o.units.sigma_vu());
  const bool is_smallest = side <= smallest + tol;
  // Window cells are centered at center + c * s for c in [-n/2, n/2).
  const double top = w.center_y + (-(w.v / 2) - 0.5) * s;
  const double bottom = w.center_y + (w.v - 1 - w.v / 2 + 0.5) * s;
  const double left = w.center_x + (-(w.u / 2) - 0.5) * s;
  const double right = w.center_x + (w.u - 1 - w.u / 2 + 0.5) * s;
  const double radius = rule.centrality == CentralityUnit::VU
                            ? w.units.sigma_vu()
                            : std::max(w.units.sigma_vu(), w.units.sigma_hw());
  int found = -1;
  int count = 0;
  for (std::size_t m = 0; m < instances.size(); ++m) {
    const BinaryMask& mask = instances[m].mask;
    int ymin = mask.height, ymax = -1, xmin = mask.width, xmax = -1;
    bool contained = true;
    for (int y = 0; y < mask.height; ++y) {
      for (int x = 0; x < mask.width; ++x) {
        if (!mask.at(y, x)) continue;
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        // Pixel [y, y+1) x [x, x+1) must lie inside the footprint.
        if (y < top - tol || y + 1 > bottom + tol || x < left - tol || x + 1 > right + tol) {
          contained = false;
        }
      }
    }
    if (ymax < 0 || !contained) continue;
    const double longer = std::max(ymax + 1 - ymin, xmax + 1 - xmin);
    const bool below_minimum = longer < 0.5 * smallest - tol;
    const bool big_enough = longer >= 0.5 * side - tol || (rule.fallback && is_smallest && below_minimum);
    if (!big_enough) continue;
    const double cy = 0.5 * (ymin + ymax + 1);
    const double cx = 0.5 * (xmin + xmax + 1);
    if (std::hypot(cy - w.center_y, cx - w.center_x) > radius + tol) continue;
    found = static_cast<int>(m);
    ++count;
  }
  return count == 1 ? found : -1;
}

double box_iou(const Box& a, const Box& b) {
  const double y0 = std::max(a.y0, b.y0), y1 = std::min(a.y1, b.y1);
  const double x0 = std::max(a.x0, b.x0), x1 = std::min(a.x1, b.x1);
  const double inter = (y1 > y0 && x1 > x0) ? (y1 - y0) * (x1 - x0) : 0.0;
  const double area_a = std::max(0.0, a.y1 - a.y0) * std::max(0.0, a.x1 - a.x0);
  const double area_b = std::max(0.0, b.y1 - b.y0) * std::max(0.0, b.x1 - b.x0);
  const double uni = area_a + area_b - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<bool> exhaustive_nms_keep(std::span<const Detection> dets, double iou_thresh,
                                      NmsMode mode) {
  const std::size_t n = dets.size();
  std::vector<Box> boxes(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (mode == NmsMode::MaskBB) {
      const BinaryMask& m = dets[i].binary_mask;
      int y0 = m.height, y1 = -1, x0 = m.width, x1 = -1;
      for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
          if (m.at(y, x)) {
            y0 = std::min(y0, y), y1 = std::max(y1, y), x0 = std::min(x0, x), x1 = std::max(x1, x);
          }
      boxes[i] = y1 < 0 ? Box{} : Box{double(y0), double(x0), double(y1 + 1), double(x1 + 1)};
    } else {
      boxes[i] = dets[i].box;
    }
  }
  // rank[i] < rank[j] iff i outranks j.
  const auto outranks = [&](std::size_t i, std::size_t j) {
    const Detection& a = dets[i];
    const Detection& b = dets[j];
    if (a.score != b.score) return a.score > b.score;
    const int ka[5] = {a.category, a.window.y, a.window.x, a.window.size_index, a.window.level};
    const int kb[5] = {b.category, b.window.y, b.window.x, b.window.size_index, b.window.level};
    return std::lexicographical_compare(ka, ka + 5, kb, kb + 5);
  };
  std::vector<int> rank(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && outranks(j, i)) ++rank[i];
  std::vector<std::size_t> by_rank(n);
  for (std::size_t i = 0; i < n; ++i) by_rank[rank[i]] = i;
  std::vector<bool> keep(n, false);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t i = by_rank[r];
    bool k = true;
    for (std::size_t q = 0; q < r; ++q) {
      const std::size_t j = by_rank[q];
      if (keep[j] && dets[j].category == dets[i].category && box_iou(boxes[i], boxes[j]) > iou_thresh) {
        k = false;
      }
    }
    keep[i] = k;
  }
  return keep;
}

}  // namespace tmask::oracle
