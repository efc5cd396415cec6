#include "tmask/assignment.hpp"

#include <algorithm>
#include <cmath>

namespace tmask {

namespace {

constexpr double kEps = 1e-9;

}  // namespace

GroundTruthInstance GroundTruthInstance::from_mask(BinaryMask mask, int category) {
  if (mask.empty()) throw PreconditionError("ground-truth mask is empty");
  GroundTruthInstance g;
  g.bbox = tight_box(mask);
  g.mask = std::move(mask);
  g.category = category;
  return g;
}

Box WindowSpec::footprint() const {
  const double s = units.sigma_vu();
  return {center_y + (centered_min(v) - 0.5) * s, center_x + (centered_min(u) - 0.5) * s,
          center_y + (centered_max(v) + 0.5) * s, center_x + (centered_max(u) + 0.5) * s};
}

std::vector<WindowSpec> enumerate_windows(std::span<const LevelGrid> levels) {
  std::vector<WindowSpec> out;
  int slot = 0;
  for (const LevelGrid& g : levels) {
    for (std::size_t si = 0; si < g.window_sizes.size(); ++si, ++slot) {
      const int n = g.window_sizes[si];
      if (n <= 0) throw ShapeError("window size must be positive");
      for (int y = 0; y < g.height; ++y) {
        for (int x = 0; x < g.width; ++x) {
          WindowSpec w;
          w.level = g.level;
          w.size_index = static_cast<int>(si);
          w.slot = slot;
          w.y = y;
          w.x = x;
          w.v = n;
          w.u = n;
          w.units = g.units;
          w.center_y = g.origin + y * g.units.sigma_hw();
          w.center_x = g.origin + x * g.units.sigma_hw();
          out.push_back(w);
        }
      }
    }
  }
  return out;
}

bool window_contains(const WindowSpec& w, const Box& b) {
  const Box f = w.footprint();
  return b.y0 >= f.y0 - kEps && b.x0 >= f.x0 - kEps && b.y1 <= f.y1 + kEps &&
         b.x1 <= f.x1 + kEps;
}

double centrality_radius(const WindowSpec& w, CentralityUnit unit) {
  if (unit == CentralityUnit::VU) return w.units.sigma_vu();
  return std::max(w.units.sigma_vu(), w.units.sigma_hw());
}

std::vector<Assignment> assign(std::span<const WindowSpec> windows,
                               std::span<const GroundTruthInstance> instances,
                               const AssignmentRule& rule) {
  double min_side = HUGE_VAL;
  for (const WindowSpec& w : windows) min_side = std::min(min_side, w.side());
  const double min_assignable = 0.5 * min_side;

  std::vector<Assignment> out(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const WindowSpec& w = windows[i];
    Assignment& a = out[i];
    a.window = w;
    const double half_side = 0.5 * w.side();
    const bool smallest = w.side() <= min_side + kEps;
    const double radius = centrality_radius(w, rule.centrality);
    int match = -1;
    int matches = 0;
    for (std::size_t m = 0; m < instances.size(); ++m) {
      const Box& b = instances[m].bbox;
      const double longer = b.longer_side();
      bool size_ok = longer >= half_side - kEps;
      if (!size_ok && rule.fallback && smallest && longer < min_assignable - kEps) {
        size_ok = true;
      }
      if (!size_ok || !window_contains(w, b)) continue;
      const double dy = b.center_y() - w.center_y;
      const double dx = b.center_x() - w.center_x;
      if (std::sqrt(dy * dy + dx * dx) > radius + kEps) continue;
      match = static_cast<int>(m);
      ++matches;
    }
    if (matches != 1) continue;
    const GroundTruthInstance& g = instances[match];
    a.positive = true;
    a.instance = match;
    a.category = g.category;
    a.target_mask = rasterize_target(g.mask, w);
    a.target_box = encode_box(w, g.bbox);
  }
  return out;
}

namespace {

// Overlap length of [lo, hi) with each pixel [i, i+1), for pixels in [0, n).
void overlaps(double lo, double hi, int n, int& first, std::vector<double>& len) {
  len.clear();
  first = std::max(0, static_cast<int>(std::floor(lo)));
  const int last = std::min(n - 1, static_cast<int>(std::ceil(hi)) - 1);
  for (int i = first; i <= last; ++i) {
    const double o = std::min(hi, double(i + 1)) - std::max(lo, double(i));
    len.push_back(o > 0.0 ? o : 0.0);
  }
}

}  // namespace

std::vector<double> rasterize_target(const BinaryMask& mask, const WindowSpec& w) {
  const double s = w.units.sigma_vu();
  const double area = s * s;
  std::vector<double> out(static_cast<std::size_t>(w.v) * w.u, 0.0);
  std::vector<double> ly, lx;
  int fy = 0, fx = 0;
  for (int iv = 0; iv < w.v; ++iv) {
    const double cy = w.center_y + (centered_min(w.v) + iv) * s;
    overlaps(cy - 0.5 * s, cy + 0.5 * s, mask.height, fy, ly);
    for (int iu = 0; iu < w.u; ++iu) {
      const double cx = w.center_x + (centered_min(w.u) + iu) * s;
      overlaps(cx - 0.5 * s, cx + 0.5 * s, mask.width, fx, lx);
      double acc = 0.0;
      for (std::size_t a = 0; a < ly.size(); ++a) {
        double row = 0.0;
        for (std::size_t b = 0; b < lx.size(); ++b) {
          if (mask.at(fy + static_cast<int>(a), fx + static_cast<int>(b))) row += lx[b];
        }
        acc += ly[a] * row;
      }
      out[static_cast<std::size_t>(iv) * w.u + iu] = std::clamp(acc / area, 0.0, 1.0);
    }
  }
  return out;
}

std::array<double, 4> encode_box(const WindowSpec& w, const Box& b) {
  const double side = w.side();
  return {(b.center_y() - w.center_y) / side, (b.center_x() - w.center_x) / side,
          std::log(std::max(b.height(), 1e-6) / side),
          std::log(std::max(b.width(), 1e-6) / side)};
}

Box decode_box(const WindowSpec& w, std::span<const double> d) {
  if (d.size() != 4) throw ShapeError("box deltas need four components");
  const double side = w.side();
  const double cy = w.center_y + d[0] * side;
  const double cx = w.center_x + d[1] * side;
  const double h = side * std::exp(std::clamp(d[2], -10.0, 10.0));
  const double ww = side * std::exp(std::clamp(d[3], -10.0, 10.0));
  return {cy - 0.5 * h, cx - 0.5 * ww, cy + 0.5 * h, cx + 0.5 * ww};
}

std::size_t count_positives(std::span<const Assignment> assignments) {
  return static_cast<std::size_t>(std::count_if(
      assignments.begin(), assignments.end(), [](const Assignment& a) { return a.positive; }));
}

}  // namespace tmask
