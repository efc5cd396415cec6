#pragma once

#include <optional>
#include <span>
#include <vector>

#include "tmask/assignment.hpp"
#include "tmask/tensor.hpp"

namespace tmask {

/// log(1 + exp(z)) without overflow.
double softplus(double z);

inline constexpr double kLogitClamp = 30.0;

struct MaskLossOptions {
  double foreground_weight = 1.5;
};

/// Weighted BCE of one window: sum over cells of
///   -[w * t * log p + (1 - t) * log(1 - p)],  p = sigmoid(clamp(z)),
/// divided by the cell count. Adds scale * dLoss/dz into `grad` when it
/// is non-empty.
double mask_bce_window(std::span<const double> logits, std::span<const double> target,
                       double foreground_weight, std::span<double> grad = {},
                       double scale = 1.0);

struct MaskLossResult {
  double loss = 0.0;
  /// One gradient tensor per prediction slot, shaped like the predictions.
  std::vector<StructuredTensor> grad;
};

/// Mean of mask_bce_window over positive windows. `preds[slot]` is the
/// natural-representation logit tensor for window slot `slot`. When
/// `normalizer` is set it replaces the positive count (used to share one
/// count across a batch).
MaskLossResult mask_loss(std::span<const StructuredTensor> preds,
                         std::span<const Assignment> assignments,
                         const MaskLossOptions& opt = {},
                         std::optional<double> normalizer = std::nullopt);

enum class FocalVariant {
  /// -alpha_t (1 - p_t)^gamma log p_t
  Standard,
  /// alpha_t * softplus(-(gamma * x_t + beta)) / gamma
  Star,
};

struct FocalOptions {
  double gamma = 3.0;
  double alpha = 0.3;
  FocalVariant variant = FocalVariant::Standard;
  double beta = 1.0;
};

/// Loss and dLoss/dx of one binary logit with label `positive`.
double focal_term(double x, bool positive, const FocalOptions& opt, double* grad = nullptr);

struct MapLossResult {
  double loss = 0.0;
  /// One gradient map per level, shaped like the inputs.
  std::vector<FeatureMap> grad;
};

/// Focal loss over every window and every class, divided by
/// max(1, positives). `logits[level]` has channel size_index * num_classes
/// + class.
MapLossResult focal_cls_loss(std::span<const FeatureMap> logits,
                             std::span<const Assignment> assignments, int num_classes,
                             const FocalOptions& opt = {},
                             std::optional<double> normalizer = std::nullopt);

/// Mean absolute delta error over positive windows and the four
/// components. `deltas[level]` has channel size_index * 4 + component.
MapLossResult box_l1_loss(std::span<const FeatureMap> deltas,
                          std::span<const Assignment> assignments,
                          std::optional<double> normalizer = std::nullopt);

struct LossWeights {
  double mask = 1.0;
  double cls = 1.0;
  double box = 1.0;
};

double total_loss(double mask, double cls, double box, const LossWeights& w);

}  // namespace tmask
