#pragma once

// Reference implementations written straight from the index formulas, with
// no shared kernels. They favor obviousness over speed.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <tmask/assignment.hpp>
#include <tmask/inference.hpp>
#include <tmask/random.hpp>
#include <tmask/tensor.hpp>
#include <tmask/transforms.hpp>

namespace tmask::oracle {

/// Tensor with i.i.d. uniform values in [lo, hi).
StructuredTensor random_tensor(SplitMix64& rng, Shape4 shape, Repr repr, Units units,
                               double lo = -1.0, double hi = 1.0);

FeatureMap random_map(SplitMix64& rng, int channels, int height, int width,
                      double stride = 1.0, double lo = -1.0, double hi = 1.0);

/// Tensor whose value encodes its coordinate: 1000v + 100u + 10y + x.
StructuredTensor code_tensor(Shape4 shape, Repr repr, Units units);

StructuredTensor align2nat(const StructuredTensor& t, double fill = 0.0);
StructuredTensor nat2align(const StructuredTensor& t, double fill = 0.0);
StructuredTensor align2nat_general(const StructuredTensor& t, const Units& target,
                                   double fill = 0.0);

/// Per-element VU upsampling evaluated at v / lambda with edge clamping.
StructuredTensor up_bilinear_vu(const StructuredTensor& t, int lambda,
                                Interpolation interp = Interpolation::Bilinear);
StructuredTensor subsample_hw(const StructuredTensor& t, int factor);

/// subsample_hw(align2nat(up_bilinear_vu(t))), built from the oracle ops.
StructuredTensor naive_swap(const StructuredTensor& t, const TransformConfig& cfg);

/// F(v,u,y,x) = G(round(K/V v), round(K/U u), y + v, x + u).
StructuredTensor instancefcn_direct(const StructuredTensor& g, int v, int u,
                                    double fill = 0.0);

/// round(k * c / n), halves up, computed in floating point.
int round_bin(int c, int k, int n);

/// Max over i of |a_i - n_i| / max(1, |a_i|, |n_i|), where n is the
/// central difference of `f` at x with step h.
double gradcheck(const std::function<double(std::span<const double>)>& f,
                 std::vector<double> x, std::span<const double> analytic, double h = 1e-5);

/// Same, restricted to `probes` coordinates drawn from rng.
double gradcheck_sampled(const std::function<double(std::span<const double>)>& f,
                         std::vector<double> x, std::span<const double> analytic,
                         SplitMix64& rng, int probes, double h = 1e-5);

double dot(std::span<const double> a, std::span<const double> b);

/// Expected label of window `w` by pixel enumeration: the matching
/// instance index, or -1 for a negative.
int brute_force_label(const WindowSpec& w, std::span<const WindowSpec> all_windows,
                      std::span<const GroundTruthInstance> instances,
                      const AssignmentRule& rule);

/// Keep flags by definition: a detection survives iff no higher-ranked
/// surviving detection of its category overlaps it above the threshold.
std::vector<bool> exhaustive_nms_keep(std::span<const Detection> dets, double iou_thresh,
                                      NmsMode mode = NmsMode::RegressedBox);

double box_iou(const Box& a, const Box& b);

}  // namespace tmask::oracle
