#pragma once

#include <map>
#include <span>
#include <vector>

#include "tmask/assignment.hpp"
#include "tmask/geometry.hpp"
#include "tmask/tensor.hpp"

namespace tmask {

struct Detection {
  double score = 0.0;
  /// Score after calibration; negative until calibrated.
  double calibrated = -1.0;
  int category = 0;
  WindowSpec window;
  /// Row-major V x U foreground probabilities.
  std::vector<double> soft_mask;
  /// Regressed box, or the pasted mask's box in mask-only mode.
  Box box;
  BinaryMask binary_mask;
};

struct DecodeOptions {
  double score_thresh = 0.05;
  int topk = 200;
};

/// Strict weak order: higher score first, then (category, y, x, size, level).
bool detection_before(const Detection& a, const Detection& b);

/// One candidate per window with its best class. `cls[level]` has channel
/// size_index * num_classes + class, `masks[slot]` holds natural mask
/// logits and `boxes[level]` the box deltas. With no box maps the box is
/// left empty.
std::vector<Detection> decode(std::span<const WindowSpec> windows,
                              std::span<const FeatureMap> cls,
                              std::span<const StructuredTensor> masks,
                              std::span<const FeatureMap> boxes, int num_classes,
                              const DecodeOptions& opt = {});

/// Binary image mask: pixels whose centers fall inside the window
/// footprint, bilinearly sampling the soft mask, kept when >= thresh.
BinaryMask paste_mask(const Detection& d, int height, int width, double thresh = 0.5);

enum class NmsMode { RegressedBox, MaskBB };

/// Greedy per-category suppression in detection_before order; a detection
/// is dropped when its IoU with a kept one exceeds iou_thresh. MaskBB uses
/// the tight box of each binary mask.
std::vector<Detection> nms(std::vector<Detection> dets, double iou_thresh,
                           NmsMode mode = NmsMode::RegressedBox);

/// Box used for NMS under `mode`.
Box nms_box(const Detection& d, NmsMode mode);

/// Per-category monotone map from raw score to validation precision.
class Calibration {
 public:
  struct Curve {
    /// Validation scores in descending order and the precision envelope
    /// (max precision at this rank or lower) at each.
    std::vector<double> scores;
    std::vector<double> precision;
  };

  static constexpr double kDisplayThreshold = 0.6;

  double apply(int category, double score) const;
  void apply(std::vector<Detection>& dets) const;

  std::map<int, Curve>& curves() { return curves_; }
  const std::map<int, Curve>& curves() const { return curves_; }

 private:
  std::map<int, Curve> curves_;
};

/// Per-image greedy matching by score at mask IoU >= iou_thresh. Returns,
/// for each detection, whether it matched a ground truth of its category.
std::vector<bool> match_detections(std::span<const Detection> dets,
                                   std::span<const GroundTruthInstance> gts,
                                   double iou_thresh);

/// Envelope of a pooled precision curve from TP flags in score order.
std::vector<double> precision_envelope(const std::vector<bool>& tp_in_order);

Calibration calibrate(std::span<const std::vector<Detection>> dets,
                      std::span<const std::vector<GroundTruthInstance>> gts,
                      double iou_thresh = 0.5);

struct ApResult {
  std::vector<double> thresholds;
  /// Mean over categories with ground truth, one per threshold.
  std::vector<double> ap;
  /// ap_per_category[c][t]
  std::map<int, std::vector<double>> per_category;
};

/// 101-point interpolated AP from pooled TP flags (in score order) and the
/// number of ground-truth instances.
double interpolated_ap(const std::vector<bool>& tp_in_order, std::size_t num_gt);

ApResult eval_ap(std::span<const std::vector<Detection>> dets,
                 std::span<const std::vector<GroundTruthInstance>> gts,
                 std::span<const double> iou_thresholds);

}  // namespace tmask
