#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "pseco/assignment.hpp"
#include "pseco/types.hpp"

namespace pseco {

/// 0.50, 0.55, ..., 0.95.
std::vector<double> coco_iou_thresholds();

struct ImageEval {
  std::vector<Detection> dets;
  std::vector<GroundTruth> gts;
};

struct APResult {
  std::vector<double> thresholds;
  std::vector<double> ap_per_threshold;  // mean over categories with ground truths
  std::map<int, double> ap_per_category;  // mean over thresholds
  double map = 0.0;
};

/// COCO-style AP: per category and IoU threshold, detections are ranked by
/// score (ties keep input order) and each is matched to the unmatched
/// same-image ground truth of highest IoU (ties: lower index) if that IoU
/// reaches the threshold. AP is the 101-point interpolated area under the
/// precision envelope. Categories without ground truths are left out; a
/// dataset with no ground truths at all is an error.
APResult average_precision(std::span<const ImageEval> images, std::span<const double> iou_thresholds);
APResult average_precision(std::span<const ImageEval> images);

/// Interpolated AP for one ranked list, given per-detection TP flags in rank order.
double interpolated_ap(const std::vector<bool>& tp_in_rank_order, std::size_t num_gts);

double pearson(std::span<const double> xs, std::span<const double> ys);

struct AssignmentQuality {
  double false_positive_rate = 0.0;
  double false_negative_rate = 0.0;
  std::size_t positives = 0;
  std::size_t false_positives = 0;
  std::size_t true_foreground = 0;
  std::size_t missed_foreground = 0;
};

/// Scores an assignment against latent ground truth. A positive is false when
/// its IoU with every true box of the assigned category is below 0.5; a
/// proposal with IoU >= 0.5 against some true box that was labeled negative
/// counts as a miss. Rates are 0 when their denominator is 0.
AssignmentQuality assignment_quality(const AssignmentResult& assignment, std::span<const BBox> proposals,
                                     std::span<const int> assigned_categories, std::span<const GroundTruth> true_gts,
                                     double true_iou = 0.5);

}  // namespace pseco
