#include <gtest/gtest.h>

#include <cmath>

#include <oracle.hpp>
#include <tmask/losses.hpp>
#include <tmask/nn.hpp>

using namespace tmask;

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

// Hand formulas written with plain logs and probabilities.
double bce_by_hand(const std::vector<double>& p, const std::vector<double>& t, double w) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += -(w * t[i] * std::log(p[i]) + (1 - t[i]) * std::log(1 - p[i]));
  return s / p.size();
}

double focal_by_hand(double p, bool positive, double gamma, double alpha) {
  const double pt = positive ? p : 1 - p;
  const double at = positive ? alpha : 1 - alpha;
  return -at * std::pow(1 - pt, gamma) * std::log(pt);
}

// Random positives and negatives over a two-level, two-size layout.
struct Problem {
  std::vector<Assignment> asg;
  std::vector<StructuredTensor> masks;
  std::vector<FeatureMap> cls, box;
};

Problem random_problem(SplitMix64& rng, int num_classes) {
  const std::vector<LevelGrid> grids{{0, 4, 4, Units(1, 1), 0.5, {3, 2}}, {1, 2, 2, Units(2, 2), 1.0, {3, 2}}};
  Problem p;
  for (const auto& w : enumerate_windows(grids)) {
    Assignment a;
    a.window = w;
    if (rng.uniform() < 0.3) {
      a.positive = true;
      a.category = rng.uniform_int(0, num_classes - 1);
      for (int i = 0; i < w.v * w.u; ++i) a.target_mask.push_back(rng.uniform() < 0.5 ? rng.uniform() : 1.0);
      for (double& d : a.target_box) d = rng.uniform(-1, 1);
    }
    p.asg.push_back(a);
  }
  for (const auto& g : grids) {
    for (int v : g.window_sizes)
      p.masks.push_back(oracle::random_tensor(rng, {v, v, g.height, g.width}, Repr::Natural, g.units, -3, 3));
    p.cls.push_back(oracle::random_map(rng, 2 * num_classes, g.height, g.width, g.units.sigma_hw(), -3, 3));
    p.box.push_back(oracle::random_map(rng, 8, g.height, g.width, g.units.sigma_hw()));
  }
  return p;
}

template <typename Maps>
std::vector<double> flatten(const Maps& maps) {
  std::vector<double> out;
  for (const auto& m : maps) {
    if constexpr (std::is_same_v<std::decay_t<decltype(m)>, FeatureMap>) {
      out.insert(out.end(), m.data.begin(), m.data.end());
    } else {
      out.insert(out.end(), m.data().begin(), m.data().end());
    }
  }
  return out;
}

void unflatten(std::span<const double> x, std::vector<FeatureMap>& maps) {
  std::size_t o = 0;
  for (auto& m : maps) {
    std::copy(x.begin() + o, x.begin() + o + m.data.size(), m.data.begin());
    o += m.data.size();
  }
}

void unflatten(std::span<const double> x, std::vector<StructuredTensor>& ts) {
  std::size_t o = 0;
  for (auto& t : ts) {
    std::copy(x.begin() + o, x.begin() + o + t.data().size(), t.data().begin());
    o += t.data().size();
  }
}

}  // namespace

TEST(Softplus, StableAndAccurate) {
  EXPECT_DOUBLE_EQ(softplus(0.0), std::log(2.0));
  EXPECT_EQ(softplus(1000.0), 1000.0);
  EXPECT_NEAR(softplus(-1000.0), 0.0, 1e-300);
  EXPECT_NEAR(softplus(3.0) - softplus(-3.0), 3.0, 1e-15);
}

TEST(MaskBce, SpotValue) {
  const std::vector<double> p{0.9, 0.1, 0.1, 0.1};
  const std::vector<double> t{1, 0, 0, 0};
  std::vector<double> z;
  for (double q : p) z.push_back(logit(q));
  const double loss = mask_bce_window(z, t, 1.5);
  const double hand = (1.5 * -std::log(0.9) + 3 * -std::log(0.9)) / 4;
  EXPECT_NEAR(hand, 0.11853, 1e-5);
  EXPECT_NEAR(loss, hand, 1e-12);
  EXPECT_NEAR(loss, bce_by_hand(p, t, 1.5), 1e-12);
  EXPECT_NEAR(loss, 0.11853, 1e-6);
}

TEST(MaskBce, SoftTargetsMatchHandFormula) {
  SplitMix64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> p, t, z;
    for (int i = 0; i < 9; ++i) {
      p.push_back(rng.uniform(0.01, 0.99));
      t.push_back(rng.uniform());
      z.push_back(logit(p.back()));
    }
    EXPECT_NEAR(mask_bce_window(z, t, 1.5), bce_by_hand(p, t, 1.5), 1e-12);
  }
}

TEST(MaskBce, SaturatedCorrectPredictionIsNearZero) {
  const std::vector<double> z{100, -100, 100, -100};
  const std::vector<double> t{1, 0, 1, 0};
  std::vector<double> g(4, 0.0);
  const double loss = mask_bce_window(z, t, 1.5, g);
  EXPECT_LT(loss, 1e-12);
  EXPECT_GE(loss, 0.0);
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(MaskBce, SizeMismatchThrows) {
  const std::vector<double> z{0, 0}, t{1};
  EXPECT_THROW(mask_bce_window(z, t, 1.5), ShapeError);
}

TEST(MaskLoss, AllNegativeIsZeroWithZeroGradient) {
  SplitMix64 rng(2);
  auto p = random_problem(rng, 3);
  for (auto& a : p.asg) a.positive = false;
  const auto r = mask_loss(p.masks, p.asg);
  EXPECT_EQ(r.loss, 0.0);
  for (const auto& g : r.grad)
    for (double v : g.data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(box_l1_loss(p.box, p.asg).loss, 0.0);
}

TEST(MaskLoss, MeanOverPositiveWindows) {
  SplitMix64 rng(3);
  const auto p = random_problem(rng, 3);
  double sum = 0;
  int n = 0;
  for (const auto& a : p.asg) {
    if (!a.positive) continue;
    const auto& t = p.masks[a.window.slot];
    std::vector<double> z;
    for (int v : centered_coords(a.window.v))
      for (int u : centered_coords(a.window.u)) z.push_back(t.at(v, u, a.window.y, a.window.x));
    sum += mask_bce_window(z, a.target_mask, 1.5);
    ++n;
  }
  ASSERT_GT(n, 0);
  EXPECT_NEAR(mask_loss(p.masks, p.asg).loss, sum / n, 1e-12);
  EXPECT_NEAR(mask_loss(p.masks, p.asg, {}, 2.0 * n).loss, sum / (2.0 * n), 1e-12);
}

TEST(Focal, SpotValue) {
  const double loss = focal_term(0.0, true, {3.0, 0.3});
  EXPECT_NEAR(loss, 0.3 * 0.125 * std::log(2.0), 1e-15);
  // 0.0259930; the five-decimal rounding 0.02599 is 3e-6 away.
  EXPECT_NEAR(loss, 0.025993, 1e-6);
  EXPECT_NEAR(loss, 0.02599, 5e-6);
  EXPECT_NEAR(loss, focal_by_hand(0.5, true, 3, 0.3), 1e-15);
}

TEST(Focal, MatchesHandFormula) {
  SplitMix64 rng(4);
  for (int i = 0; i < 50; ++i) {
    const double p = rng.uniform(0.01, 0.99);
    const bool pos = rng.uniform() < 0.5;
    EXPECT_NEAR(focal_term(logit(p), pos, {3.0, 0.3}), focal_by_hand(p, pos, 3, 0.3), 1e-12);
  }
}

TEST(Focal, GammaZeroAlphaOneIsCrossEntropy) {
  for (double p : {0.1, 0.5, 0.93}) EXPECT_NEAR(focal_term(logit(p), true, {0.0, 1.0}), -std::log(p), 1e-12);
  // alpha = 1 gives negatives no weight; alpha = 0.5 halves plain CE.
  EXPECT_EQ(focal_term(0.3, false, {0.0, 1.0}), 0.0);
  EXPECT_NEAR(focal_term(logit(0.2), false, {0.0, 0.5}), -0.5 * std::log(0.8), 1e-12);
}

TEST(Focal, VanishesAsProbabilityApproachesTarget) {
  double prev = HUGE_VAL;
  for (double x : {0.0, 2.0, 4.0, 8.0, 16.0}) {
    const double l = focal_term(x, true, {});
    EXPECT_LT(l, prev);
    prev = l;
  }
  EXPECT_LT(focal_term(30.0, true, {}), 1e-40);
  EXPECT_LT(focal_term(-30.0, false, {}), 1e-40);
}

TEST(Focal, StarVariantFormula) {
  const FocalOptions star{2.0, 0.25, FocalVariant::Star, 1.0};
  const double x = 0.7;
  EXPECT_NEAR(focal_term(x, true, star), 0.25 * softplus(-(2.0 * x + 1.0)) / 2.0, 1e-15);
  EXPECT_NEAR(focal_term(x, false, star), 0.75 * softplus(-(-2.0 * x + 1.0)) / 2.0, 1e-15);
}

TEST(Focal, TermGradientMatchesFiniteDifferences) {
  SplitMix64 rng(5);
  for (const auto variant : {FocalVariant::Standard, FocalVariant::Star}) {
    const FocalOptions opt{3.0, 0.3, variant, 1.0};
    for (int i = 0; i < 40; ++i) {
      const double x = rng.uniform(-6, 6);
      const bool pos = i % 2;
      double g = 0;
      focal_term(x, pos, opt, &g);
      const double h = 1e-5;
      const double num = (focal_term(x + h, pos, opt) - focal_term(x - h, pos, opt)) / (2 * h);
      EXPECT_NEAR(g, num, 1e-4 * std::max(1.0, std::abs(num)));
    }
  }
}

TEST(FocalClsLoss, NormalizedByPositiveCountOrOne) {
  SplitMix64 rng(6);
  auto p = random_problem(rng, 2);
  double sum = 0;
  std::size_t pos = 0;
  for (const auto& a : p.asg) {
    pos += a.positive;
    for (int c = 0; c < 2; ++c)
      sum += focal_term(p.cls[a.window.level].at(a.window.size_index * 2 + c, a.window.y, a.window.x),
                        a.positive && a.category == c, {});
  }
  EXPECT_NEAR(focal_cls_loss(p.cls, p.asg, 2).loss, sum / std::max<std::size_t>(1, pos), 1e-12);
  for (auto& a : p.asg) a.positive = false;
  EXPECT_NEAR(focal_cls_loss(p.cls, p.asg, 2).loss, [&] {
    double s = 0;
    for (const auto& a : p.asg)
      for (int c = 0; c < 2; ++c)
        s += focal_term(p.cls[a.window.level].at(a.window.size_index * 2 + c, a.window.y, a.window.x), false, {});
    return s;
  }(), 1e-12);
}

TEST(BoxL1, SpotValueAndExact) {
  Assignment a;
  a.positive = true;
  a.window.v = a.window.u = 3;
  a.target_box = {0.1, 0.2, 0.3, 0.4};
  FeatureMap m(4, 1, 1, 1.0);
  m.data = {0.6, 0.2, 0.3, 0.4};
  const std::vector<Assignment> asg{a};
  const std::vector<FeatureMap> maps{m};
  EXPECT_DOUBLE_EQ(box_l1_loss(maps, asg).loss, 0.125);
  const std::vector<FeatureMap> exact{FeatureMap(4, 1, 1, 1.0)};
  auto e = exact;
  e[0].data = {0.1, 0.2, 0.3, 0.4};
  EXPECT_EQ(box_l1_loss(e, asg).loss, 0.0);
}

TEST(TotalLoss, Weighting) {
  EXPECT_EQ(total_loss(1, 2, 3, {}), 6.0);
  EXPECT_EQ(total_loss(1, 2, 3, {1, 1, 0}), 3.0);
  EXPECT_EQ(total_loss(1, 2, 3, {0, 0, 0}), 0.0);
}

class LossGradient : public ::testing::TestWithParam<int> {};

TEST_P(LossGradient, MaskLoss) {
  SplitMix64 rng(100 + GetParam());
  const auto p = random_problem(rng, 3);
  const auto r = mask_loss(p.masks, p.asg);
  const auto loss = [&](std::span<const double> x) {
    auto m = p.masks;
    unflatten(x, m);
    return mask_loss(m, p.asg).loss;
  };
  EXPECT_LT(oracle::gradcheck(loss, flatten(p.masks), flatten(r.grad)), 1e-4);
}

TEST_P(LossGradient, FocalClsLoss) {
  SplitMix64 rng(200 + GetParam());
  const auto p = random_problem(rng, 3);
  for (const auto variant : {FocalVariant::Standard, FocalVariant::Star}) {
    const FocalOptions opt{3.0, 0.3, variant, 1.0};
    const auto r = focal_cls_loss(p.cls, p.asg, 3, opt);
    const auto loss = [&](std::span<const double> x) {
      auto m = p.cls;
      unflatten(x, m);
      return focal_cls_loss(m, p.asg, 3, opt).loss;
    };
    EXPECT_LT(oracle::gradcheck(loss, flatten(p.cls), flatten(r.grad)), 1e-4);
  }
}

TEST_P(LossGradient, BoxL1Loss) {
  SplitMix64 rng(300 + GetParam());
  const auto p = random_problem(rng, 3);
  const auto r = box_l1_loss(p.box, p.asg);
  const auto loss = [&](std::span<const double> x) {
    auto m = p.box;
    unflatten(x, m);
    return box_l1_loss(m, p.asg).loss;
  };
  EXPECT_LT(oracle::gradcheck(loss, flatten(p.box), flatten(r.grad)), 1e-4);
}

INSTANTIATE_TEST_SUITE_P(RandomDraws, LossGradient, ::testing::Range(0, 20));
