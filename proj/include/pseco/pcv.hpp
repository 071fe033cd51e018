#pragma once

#include <span>
#include <vector>

#include "pseco/assignment.hpp"
#include "pseco/types.hpp"

namespace pseco {

struct ConsistencyScore {
  int gt_index = -1;
  double sigma = 0.0;
  int n_positives = 0;
};

/// Mean IoU between the positives' regressed boxes and the pseudo box they vote for.
double consistency_vote(std::span<const BBox> pred_boxes, const BBox& pseudo_box);

/// Per pseudo box with at least one positive: the voting score over the
/// teacher-regressed boxes of its positives.
std::vector<ConsistencyScore> consistency_scores(std::span<const PseudoLabel> pseudo_gts,
                                                 const AssignmentResult& assignment,
                                                 std::span<const Prediction> teacher_preds);

/// Copies pseudo_gts and fills sigma for every pseudo box that has positives.
/// Boxes without positives keep sigma unset and take no part in regression.
std::vector<PseudoLabel> attach_sigma(std::span<const PseudoLabel> pseudo_gts, const AssignmentResult& assignment,
                                      std::span<const Prediction> teacher_preds);

}  // namespace pseco
