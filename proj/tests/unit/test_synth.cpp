#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include <tmask/rle.hpp>
#include <tmask/synth.hpp>

using namespace tmask;

namespace {

SceneConfig quiet(int size = 64) {
  SceneConfig c;
  c.height = c.width = size;
  c.noise_std = 0.0;
  return c;
}

const std::array<double, 3> kBlack{0, 0, 0};

}  // namespace

TEST(Shapes, InsidePredicates) {
  const ShapeSpec disk{ShapeClass::Disk, 10, 10, 8};
  EXPECT_TRUE(disk.inside(10, 13.9));
  EXPECT_FALSE(disk.inside(10, 14.1));
  const ShapeSpec rect{ShapeClass::Rectangle, 10, 10, 20, 0.5, 0.0};
  EXPECT_TRUE(rect.inside(14.9, 19.9));
  EXPECT_FALSE(rect.inside(15.1, 10));
  const ShapeSpec turned{ShapeClass::Rectangle, 10, 10, 20, 0.5, std::numbers::pi / 2};
  EXPECT_TRUE(turned.inside(19.9, 10));
  EXPECT_FALSE(turned.inside(10, 19.9));
  const ShapeSpec tri{ShapeClass::Triangle, 20, 20, 20};
  EXPECT_TRUE(tri.inside(20, 20));
  EXPECT_FALSE(tri.inside(20 - 9.9, 20 - 9.9));
}

TEST(Rasterize, DiskAreaMatchesAnalytic) {
  const ShapeSpec disk{ShapeClass::Disk, 32, 32, 20};
  const auto cov = rasterize_coverage(disk, 64, 64, 8);
  const double area = std::accumulate(cov.begin(), cov.end(), 0.0);
  EXPECT_NEAR(area, std::numbers::pi * 100, 0.01 * std::numbers::pi * 100);
  SplitMix64 noise(1);
  const Scene s = render_scene(quiet(), {disk}, {{1, 1, 1}}, kBlack, noise);
  ASSERT_EQ(s.instances.size(), 1u);
  EXPECT_NEAR(static_cast<double>(s.instances[0].mask.count()), std::numbers::pi * 100,
              0.05 * std::numbers::pi * 100);
}

TEST(Rasterize, RectangleAndTriangleAreas) {
  const ShapeSpec rect{ShapeClass::Rectangle, 32, 32, 30, 0.4, 0.3};
  const auto rc = rasterize_coverage(rect, 64, 64, 8);
  EXPECT_NEAR(std::accumulate(rc.begin(), rc.end(), 0.0), 30 * 12, 0.02 * 360);
  // Equilateral triangle with circumradius r has area (3 sqrt 3 / 4) r^2.
  const ShapeSpec tri{ShapeClass::Triangle, 32, 32, 30, 1.0, 1.1};
  const auto tc = rasterize_coverage(tri, 64, 64, 8);
  const double want = 3 * std::sqrt(3.0) / 4 * 15 * 15;
  EXPECT_NEAR(std::accumulate(tc.begin(), tc.end(), 0.0), want, 0.02 * want);
}

TEST(Rasterize, CoverageInUnitIntervalAndClippedAtBorder) {
  const ShapeSpec disk{ShapeClass::Disk, 0, 0, 20};
  const auto cov = rasterize_coverage(disk, 16, 16, 4);
  for (double c : cov) {
    EXPECT_GE(c, 0.0);
    EXPECT_LE(c, 1.0);
  }
  EXPECT_NEAR(std::accumulate(cov.begin(), cov.end(), 0.0), std::numbers::pi * 25, 0.05 * std::numbers::pi * 25);
}

TEST(RenderScene, LaterShapesOcclude) {
  SplitMix64 noise(1);
  const ShapeSpec back{ShapeClass::Rectangle, 20, 20, 20, 1.0, 0.0};
  const ShapeSpec front{ShapeClass::Disk, 30, 30, 16};
  const Scene s = render_scene(quiet(), {back, front}, {{1, 0, 0}, {0, 0, 1}}, kBlack, noise);
  ASSERT_EQ(s.instances.size(), 2u);
  const auto& m_back = s.instances[0].mask;
  const auto& m_front = s.instances[1].mask;
  EXPECT_EQ(s.instances[0].category, static_cast<int>(ShapeClass::Rectangle));
  for (std::size_t p = 0; p < m_back.data.size(); ++p) EXPECT_FALSE(m_back.data[p] && m_front.data[p]);
  EXPECT_EQ(m_back.at(29, 29), 0);  // covered by the disk
  EXPECT_EQ(m_back.at(11, 11), 1);
  EXPECT_EQ(s.image.at(0, 11, 11), 1.0);
  EXPECT_EQ(s.image.at(2, 30, 30), 1.0);
  EXPECT_EQ(s.image.at(0, 30, 30), 0.0);
}

TEST(RenderScene, FullyHiddenInstanceDropped) {
  SplitMix64 noise(1);
  const ShapeSpec small{ShapeClass::Disk, 32, 32, 6};
  const ShapeSpec big{ShapeClass::Rectangle, 32, 32, 30, 1.0, 0.0};
  const Scene s = render_scene(quiet(), {small, big}, {{1, 0, 0}, {0, 1, 0}}, kBlack, noise);
  ASSERT_EQ(s.instances.size(), 1u);
  EXPECT_EQ(s.shapes.size(), 1u);
  EXPECT_EQ(s.instances[0].category, static_cast<int>(ShapeClass::Rectangle));
}

TEST(GenerateScene, DeterministicAndSeedSensitive) {
  SceneConfig cfg;
  const Scene a = generate_scene(cfg, 42);
  const Scene b = generate_scene(cfg, 42);
  const Scene c = generate_scene(cfg, 43);
  EXPECT_EQ(a.image.data, b.image.data);
  ASSERT_EQ(a.instances.size(), b.instances.size());
  for (std::size_t i = 0; i < a.instances.size(); ++i) EXPECT_EQ(a.instances[i].mask, b.instances[i].mask);
  EXPECT_NE(a.image.data, c.image.data);
}

TEST(GenerateScene, RespectsConfig) {
  SceneConfig cfg;
  cfg.height = 32;
  cfg.width = 48;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Scene s = generate_scene(cfg, seed);
    EXPECT_EQ(s.image.channels, 3);
    EXPECT_EQ(s.image.height, 32);
    EXPECT_EQ(s.image.width, 48);
    EXPECT_LE(static_cast<int>(s.instances.size()), cfg.max_instances);
    EXPECT_EQ(s.instances.size(), s.shapes.size());
    for (std::size_t i = 0; i < s.instances.size(); ++i) {
      const auto& sh = s.shapes[i];
      EXPECT_GE(sh.size, cfg.min_size);
      EXPECT_LE(sh.size, cfg.max_size);
      EXPECT_EQ(s.instances[i].category, static_cast<int>(sh.cls));
      EXPECT_FALSE(s.instances[i].mask.empty());
      if (sh.cls == ShapeClass::Rectangle) {
        EXPECT_GE(sh.aspect, cfg.min_aspect);
        EXPECT_LE(sh.aspect, cfg.max_aspect);
      }
    }
  }
}

TEST(GenerateScene, AllClassesAppear) {
  SceneConfig cfg;
  int counts[kNumShapeClasses] = {};
  for (const auto& s : generate_dataset(cfg, 5, 60))
    for (const auto& g : s.instances) ++counts[g.category];
  for (int c : counts) EXPECT_GT(c, 20);
}

TEST(GenerateDataset, ScenesAreIndependentOfCount) {
  SceneConfig cfg;
  const auto a = generate_dataset(cfg, 9, 3);
  const auto b = generate_dataset(cfg, 9, 5);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(a[i].image.data, b[i].image.data);
}

TEST(Rle, RoundTripOnSceneMasks) {
  for (const auto& s : generate_dataset(SceneConfig{}, 11, 10))
    for (const auto& g : s.instances) EXPECT_EQ(rle_decode(rle_encode(g.mask)), g.mask);
}

TEST(Rle, ColumnMajorRunsStartWithBackground) {
  BinaryMask m(2, 3);
  m.at(0, 0) = 1;
  m.at(1, 0) = 1;
  m.at(1, 2) = 1;
  const Rle r = rle_encode(m);
  // Column-major: 1 1 | 0 0 | 0 1
  EXPECT_EQ(r.counts, (std::vector<std::uint32_t>{0, 2, 3, 1}));
  EXPECT_EQ(rle_decode(r), m);
  EXPECT_EQ(rle_encode(BinaryMask(2, 2)).counts, (std::vector<std::uint32_t>{4}));
}

TEST(Rle, BadCoverageThrows) {
  EXPECT_THROW(rle_decode(Rle{2, 2, {1, 2}}), std::invalid_argument);
  EXPECT_THROW(rle_decode(Rle{2, 2, {3, 2}}), std::invalid_argument);
}

namespace {

// Source pixel for destination (y, x) under symmetry k of an n x n grid.
std::pair<int, int> dihedral_source(int k, int y, int x, int h, int w) {
  if (k & 2) y = h - 1 - y;
  if (k & 1) x = w - 1 - x;
  if (k & 4) std::swap(y, x);
  return {y, x};
}

}  // namespace

TEST(Dihedral, RemapsPixelsMasksAndShapes) {
  const SceneConfig cfg = quiet(48);
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const Scene s = generate_scene(cfg, seed);
    for (int k = 0; k < 8; ++k) {
      const Scene d = dihedral(s, k);
      ASSERT_EQ(d.instances.size(), s.instances.size());
      ASSERT_EQ(d.shapes.size(), s.shapes.size());
      for (int y = 0; y < 48; ++y) {
        for (int x = 0; x < 48; ++x) {
          const auto [sy, sx] = dihedral_source(k, y, x, 48, 48);
          for (int c = 0; c < 3; ++c) ASSERT_EQ(d.image.at(c, y, x), s.image.at(c, sy, sx));
          for (std::size_t i = 0; i < s.instances.size(); ++i)
            ASSERT_EQ(d.instances[i].mask.at(y, x), s.instances[i].mask.at(sy, sx));
        }
      }
      for (std::size_t i = 0; i < s.instances.size(); ++i) {
        EXPECT_EQ(d.instances[i].category, s.instances[i].category);
        const Box b = tight_box(d.instances[i].mask);
        EXPECT_EQ(d.instances[i].bbox.y0, b.y0);
        EXPECT_EQ(d.instances[i].bbox.x1, b.x1);
      }
      for (std::size_t i = 0; i < s.shapes.size(); ++i) {
        const auto a = rasterize_coverage(s.shapes[i], 48, 48);
        const auto b = rasterize_coverage(d.shapes[i], 48, 48);
        int mismatched = 0;
        for (int y = 0; y < 48; ++y) {
          for (int x = 0; x < 48; ++x) {
            const auto [sy, sx] = dihedral_source(k, y, x, 48, 48);
            if (std::abs(b[y * 48 + x] - a[sy * 48 + sx]) > 1e-9) ++mismatched;
          }
        }
        EXPECT_EQ(mismatched, 0) << "seed " << seed << " k " << k << " shape " << i;
      }
    }
  }
}

TEST(Dihedral, TransposeNeedsSquareImage) {
  SceneConfig cfg = quiet();
  cfg.width = 40;
  const Scene s = generate_scene(cfg, 3);
  EXPECT_NO_THROW(dihedral(s, 3));
  EXPECT_THROW(dihedral(s, 4), std::invalid_argument);
  EXPECT_THROW(dihedral(s, 8), std::invalid_argument);
}
