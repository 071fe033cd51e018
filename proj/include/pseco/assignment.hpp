#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pseco/types.hpp"

namespace pseco {

enum class LabelKind { negative, positive, ignored };

struct ProposalLabel {
  LabelKind kind = LabelKind::negative;
  int gt_index = -1;  // valid only for positives

  static ProposalLabel negative() { return {}; }
  static ProposalLabel positive(int gt) { return {LabelKind::positive, gt}; }

  bool is_positive() const { return kind == LabelKind::positive; }
  bool operator==(const ProposalLabel&) const = default;
};

/// One label per proposal plus the number of positives each ground truth received.
struct AssignmentResult {
  std::vector<ProposalLabel> labels;
  std::vector<int> positives_per_gt;

  std::size_t num_positives() const;
  std::vector<std::size_t> positives_of(int gt_index) const;

  bool operator==(const AssignmentResult&) const = default;
};

/// Baseline assigner: positive for the argmax-IoU ground truth (ties go to the
/// lower index) when that IoU >= pos_threshold, negative otherwise.
AssignmentResult iou_assign(std::span<const BBox> proposals, std::span<const BBox> gts, double pos_threshold = 0.5);

/// Indices of proposals with IoU >= t against gt, ascending.
std::vector<std::size_t> candidate_bag(std::span<const BBox> proposals, const BBox& gt, double t = 0.4);

/// q = s^alpha * u^(1 - alpha), with 0^0 taken as 1.
double proposal_quality(double s, double u, double alpha);

/// Number of positives for a bag: clamp(floor(sum of IoUs), 1, |bag|).
int dynamic_k(std::span<const double> bag_ious);

enum class DynamicKMode {
  whole_bag,  // sum the IoUs of every candidate
  top_q,      // sum only the top_q largest IoUs, as in OTA
  all,        // every candidate is positive (used to relate PLA back to IoU assignment)
};

struct PlaOptions {
  double t = 0.4;
  double alpha = 0.5;
  DynamicKMode k_mode = DynamicKMode::whole_bag;
  std::size_t top_q = 10;
};

/// Prediction-guided label assignment. Candidates of each pseudo box are ranked
/// by the teacher's quality q (category score of the pseudo label's class, and
/// IoU of the teacher-regressed box against the pseudo box); the top dynamic-k
/// become positives. A proposal selected for several pseudo boxes goes to the
/// one where its q is highest (ties: lower gt index). All others are negative.
AssignmentResult pla_assign(std::span<const BBox> proposals, std::span<const Prediction> teacher_preds,
                            std::span<const PseudoLabel> pseudo_gts, const PlaOptions& options = {});

}  // namespace pseco
