#include "tmask/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tmask {

const char* to_string(ShapeClass c) {
  switch (c) {
    case ShapeClass::Disk:
      return "disk";
    case ShapeClass::Rectangle:
      return "rectangle";
    case ShapeClass::Triangle:
      return "triangle";
  }
  return "?";
}

bool ShapeSpec::inside(double y, double x) const {
  const double dy = y - cy;
  const double dx = x - cx;
  const double r = 0.5 * size;
  switch (cls) {
    case ShapeClass::Disk:
      return dy * dy + dx * dx <= r * r;
    case ShapeClass::Rectangle: {
      const double c = std::cos(angle);
      const double s = std::sin(angle);
      const double a = c * dx + s * dy;
      const double b = -s * dx + c * dy;
      return std::abs(a) <= r && std::abs(b) <= r * aspect;
    }
    case ShapeClass::Triangle: {
      // Inside iff on the inner side of all three edges of the
      // equilateral triangle with circumradius r.
      for (int k = 0; k < 3; ++k) {
        const double t = angle + std::numbers::pi / 3.0 + k * 2.0 * std::numbers::pi / 3.0;
        if (std::cos(t) * dx + std::sin(t) * dy > 0.5 * r) return false;
      }
      return true;
    }
  }
  return false;
}

std::vector<double> rasterize_coverage(const ShapeSpec& s, int height, int width,
                                       int supersample) {
  if (supersample <= 0) throw PreconditionError("supersample must be positive");
  std::vector<double> cov(static_cast<std::size_t>(height) * width, 0.0);
  const double reach = s.cls == ShapeClass::Rectangle ? std::hypot(1.0, s.aspect) : 1.0;
  const double r = 0.5 * s.size * reach + 1.0;
  const int y0 = std::max(0, static_cast<int>(std::floor(s.cy - r)));
  const int y1 = std::min(height, static_cast<int>(std::ceil(s.cy + r)) + 1);
  const int x0 = std::max(0, static_cast<int>(std::floor(s.cx - r)));
  const int x1 = std::min(width, static_cast<int>(std::ceil(s.cx + r)) + 1);
  const double step = 1.0 / supersample;
  const double inv = 1.0 / (supersample * supersample);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      int hits = 0;
      for (int a = 0; a < supersample; ++a) {
        for (int b = 0; b < supersample; ++b) {
          hits += s.inside(y + (a + 0.5) * step, x + (b + 0.5) * step);
        }
      }
      cov[static_cast<std::size_t>(y) * width + x] = hits * inv;
    }
  }
  return cov;
}

Scene render_scene(const SceneConfig& cfg, const std::vector<ShapeSpec>& shapes,
                   const std::vector<std::array<double, 3>>& colors,
                   const std::array<double, 3>& background, SplitMix64& noise) {
  const int h = cfg.height;
  const int w = cfg.width;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  Scene scene;
  scene.image = FeatureMap(3, h, w, 1.0);
  for (int c = 0; c < 3; ++c) {
    std::fill(scene.image.channel(c).begin(), scene.image.channel(c).end(), background[c]);
  }
  std::vector<std::vector<double>> cov;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    cov.push_back(rasterize_coverage(shapes[i], h, w, cfg.supersample));
    for (int c = 0; c < 3; ++c) {
      auto ch = scene.image.channel(c);
      for (std::size_t p = 0; p < n; ++p) {
        ch[p] = (1.0 - cov[i][p]) * ch[p] + cov[i][p] * colors[i][c];
      }
    }
  }
  for (double& v : scene.image.data) v += cfg.noise_std * noise.normal();

  // Visible region: covered by this shape and not by any shape in front.
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    BinaryMask m(h, w);
    for (std::size_t p = 0; p < n; ++p) {
      if (cov[i][p] < 0.5) continue;
      bool hidden = false;
      for (std::size_t j = i + 1; j < shapes.size() && !hidden; ++j) hidden = cov[j][p] >= 0.5;
      if (!hidden) m.data[p] = 1;
    }
    if (m.count() < static_cast<std::size_t>(std::max(1, cfg.min_visible_pixels))) continue;
    scene.instances.push_back(
        GroundTruthInstance::from_mask(std::move(m), static_cast<int>(shapes[i].cls)));
    scene.shapes.push_back(shapes[i]);
  }
  return scene;
}

namespace {

std::array<double, 3> random_color(SplitMix64& rng) {
  return {rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0)};
}

double color_distance(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) +
                   (a[2] - b[2]) * (a[2] - b[2]));
}

}  // namespace

Scene generate_scene(const SceneConfig& cfg, std::uint64_t seed) {
  if (cfg.height <= 0 || cfg.width <= 0) throw ShapeError("scene size must be positive");
  if (cfg.min_instances < 0 || cfg.max_instances < cfg.min_instances) {
    throw PreconditionError("invalid instance count range");
  }
  if (!(cfg.min_size > 0.0) || cfg.max_size < cfg.min_size) {
    throw PreconditionError("invalid size range");
  }
  SplitMix64 rng(seed);
  const int count = rng.uniform_int(cfg.min_instances, cfg.max_instances);
  std::array<double, 3> background{rng.uniform(0.0, 0.3), rng.uniform(0.0, 0.3),
                                   rng.uniform(0.0, 0.3)};
  std::vector<ShapeSpec> shapes;
  std::vector<std::array<double, 3>> colors;
  for (int i = 0; i < count; ++i) {
    ShapeSpec s;
    s.cls = static_cast<ShapeClass>(rng.uniform_int(0, kNumShapeClasses - 1));
    s.size = rng.uniform(cfg.min_size, cfg.max_size);
    s.angle = rng.uniform(0.0, std::numbers::pi);
    s.aspect = s.cls == ShapeClass::Rectangle ? rng.uniform(cfg.min_aspect, cfg.max_aspect) : 1.0;
    const double r = 0.5 * s.size;
    const double lo = std::min(r, 0.5 * cfg.height);
    s.cy = rng.uniform(lo, std::max(lo, cfg.height - r));
    s.cx = rng.uniform(std::min(r, 0.5 * cfg.width), std::max(std::min(r, 0.5 * cfg.width), cfg.width - r));
    std::array<double, 3> col = random_color(rng);
    for (int attempt = 0; attempt < 16; ++attempt) {
      bool ok = color_distance(col, background) > 0.35;
      for (const auto& c : colors) ok = ok && color_distance(col, c) > 0.25;
      if (ok) break;
      col = random_color(rng);
    }
    shapes.push_back(s);
    colors.push_back(col);
  }
  SplitMix64 noise = rng.fork();
  return render_scene(cfg, shapes, colors, background, noise);
}

namespace {

// Reflection t -> c0 - t of every direction angle. A triangle's edge
// normals sit at angle + pi/3 + 2 pi k / 3, so its angle picks up an
// extra -2 pi / 3 to keep the same parameterization.
ShapeSpec reflect(ShapeSpec s, double c0) {
  s.angle = c0 - s.angle;
  if (s.cls == ShapeClass::Triangle) s.angle -= 2.0 * std::numbers::pi / 3.0;
  return s;
}

template <typename F>
void remap(int h, int w, F&& src_index, const std::vector<double>& in, std::vector<double>& out,
           int channels) {
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out[(static_cast<std::size_t>(c) * h + y) * w + x] = in[c * static_cast<std::size_t>(h) * w + src_index(y, x)];
}

}  // namespace

Scene dihedral(const Scene& scene, int k) {
  if (k < 0 || k > 7) throw PreconditionError("dihedral index must be in [0, 8)");
  const int h = scene.image.height;
  const int w = scene.image.width;
  const bool transpose = k & 4;
  const bool flip_x = k & 1;
  const bool flip_y = k & 2;
  if (transpose && h != w) throw ShapeError("transposing needs a square image");
  // Output pixel (y, x) reads input pixel src(y, x).
  const auto src = [&](int y, int x) {
    if (flip_y) y = h - 1 - y;
    if (flip_x) x = w - 1 - x;
    if (transpose) std::swap(y, x);
    return static_cast<std::size_t>(y) * w + x;
  };
  Scene out;
  out.image = FeatureMap(scene.image.channels, h, w, scene.image.stride);
  remap(h, w, src, scene.image.data, out.image.data, scene.image.channels);
  for (const GroundTruthInstance& g : scene.instances) {
    BinaryMask m(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) m.at(y, x) = g.mask.data[src(y, x)];
    out.instances.push_back(GroundTruthInstance::from_mask(std::move(m), g.category));
  }
  for (ShapeSpec s : scene.shapes) {
    if (transpose) {
      std::swap(s.cy, s.cx);
      s = reflect(s, 0.5 * std::numbers::pi);
    }
    if (flip_x) {
      s.cx = w - s.cx;
      s = reflect(s, std::numbers::pi);
    }
    if (flip_y) {
      s.cy = h - s.cy;
      s = reflect(s, 0.0);
    }
    out.shapes.push_back(s);
  }
  return out;
}

std::vector<Scene> generate_dataset(const SceneConfig& cfg, std::uint64_t seed, int count) {
  SplitMix64 rng(seed);
  std::vector<Scene> out;
  out.reserve(count > 0 ? count : 0);
  for (int i = 0; i < count; ++i) out.push_back(generate_scene(cfg, rng.next()));
  return out;
}

}  // namespace tmask
