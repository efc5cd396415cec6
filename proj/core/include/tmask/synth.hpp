#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tmask/assignment.hpp"
#include "tmask/random.hpp"
#include "tmask/tensor.hpp"

namespace tmask {

enum class ShapeClass { Disk = 0, Rectangle = 1, Triangle = 2 };

inline constexpr int kNumShapeClasses = 3;

const char* to_string(ShapeClass c);

/// One shape in image coordinates. `size` is the diameter for disks, the
/// long side for rectangles and the circumscribed diameter for triangles.
struct ShapeSpec {
  ShapeClass cls = ShapeClass::Disk;
  double cy = 0.0;
  double cx = 0.0;
  double size = 10.0;
  /// Short side / long side (rectangles only).
  double aspect = 1.0;
  double angle = 0.0;

  bool inside(double y, double x) const;
};

/// Fractional coverage of each pixel from a supersample x supersample grid.
std::vector<double> rasterize_coverage(const ShapeSpec& s, int height, int width,
                                       int supersample = 4);

struct SceneConfig {
  int height = 64;
  int width = 64;
  int min_instances = 1;
  int max_instances = 4;
  double min_size = 12.0;
  double max_size = 40.0;
  /// Short/long ratio range for rectangles.
  double min_aspect = 0.25;
  double max_aspect = 1.0;
  double noise_std = 0.05;
  int supersample = 4;
  /// Instances whose visible mask has fewer pixels are dropped.
  int min_visible_pixels = 1;
};

struct Scene {
  /// RGB image, values roughly in [0, 1].
  FeatureMap image;
  /// Visible-region masks, back to front.
  std::vector<GroundTruthInstance> instances;
  std::vector<ShapeSpec> shapes;
};

/// Paints `shapes` back to front (later ones occlude earlier ones).
Scene render_scene(const SceneConfig& cfg, const std::vector<ShapeSpec>& shapes,
                   const std::vector<std::array<double, 3>>& colors,
                   const std::array<double, 3>& background, SplitMix64& noise);

/// Pure in (cfg, seed).
Scene generate_scene(const SceneConfig& cfg, std::uint64_t seed);

/// One of the eight symmetries of the pixel grid, applied to the image,
/// masks and shapes. Bit 2 transposes (square images only), then bit 0
/// mirrors x and bit 1 mirrors y. k = 0 is the identity.
Scene dihedral(const Scene& scene, int k);

std::vector<Scene> generate_dataset(const SceneConfig& cfg, std::uint64_t seed, int count);

}  // namespace tmask
