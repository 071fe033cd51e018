#pragma once

#include <span>
#include <vector>

#include "pseco/types.hpp"

namespace pseco {

inline constexpr double kDefaultScoreThreshold = 0.5;
inline constexpr double kDefaultNmsIou = 0.5;

/// Category-wise NMS followed by score thresholding (score >= tau).
/// Result is sorted by descending score; sigma is left unset.
std::vector<PseudoLabel> generate_pseudo_labels(std::span<const Detection> dets, double tau = kDefaultScoreThreshold,
                                                double nms_iou = kDefaultNmsIou);

struct PrecisionPoint {
  double threshold = 0.0;
  double precision = 0.0;
};

struct PrecisionCurve {
  std::vector<PrecisionPoint> points;
  // Set when there were no pseudo labels; every precision is then 0.
  bool empty_input = false;
};

/// Fraction of pseudo labels matched one-to-one to a same-category ground truth
/// with IoU >= threshold, using greedy matching in descending IoU order.
/// Thresholds must be strictly increasing.
PrecisionCurve pseudo_precision_curve(std::span<const PseudoLabel> pseudo, std::span<const GroundTruth> gts,
                                      std::span<const double> iou_thresholds);

}  // namespace pseco
