#include "pseco/pcv.hpp"

#include <string>

#include "pseco/error.hpp"

namespace pseco {

double consistency_vote(std::span<const BBox> pred_boxes, const BBox& pseudo_box) {
  if (pred_boxes.empty()) {
    throw InvalidInput("consistency_vote: no positive proposals");
  }
  double sum = 0.0;
  for (const BBox& b : pred_boxes) {
    sum += iou(b, pseudo_box);
  }
  return sum / static_cast<double>(pred_boxes.size());
}

std::vector<ConsistencyScore> consistency_scores(std::span<const PseudoLabel> pseudo_gts,
                                                 const AssignmentResult& assignment,
                                                 std::span<const Prediction> teacher_preds) {
  if (assignment.labels.size() != teacher_preds.size()) {
    throw InvalidInput("attach_sigma: assignment covers " + std::to_string(assignment.labels.size()) +
                       " proposals but there are " + std::to_string(teacher_preds.size()) + " predictions");
  }
  std::vector<std::vector<BBox>> votes(pseudo_gts.size());
  for (std::size_t i = 0; i < assignment.labels.size(); ++i) {
    const ProposalLabel& label = assignment.labels[i];
    if (!label.is_positive()) {
      continue;
    }
    if (label.gt_index < 0 || static_cast<std::size_t>(label.gt_index) >= pseudo_gts.size()) {
      throw InvalidInput("attach_sigma: proposal " + std::to_string(i) + " references pseudo box " +
                         std::to_string(label.gt_index) + " of " + std::to_string(pseudo_gts.size()));
    }
    votes[static_cast<std::size_t>(label.gt_index)].push_back(teacher_preds[i].regressed_box);
  }

  std::vector<ConsistencyScore> scores;
  for (std::size_t j = 0; j < pseudo_gts.size(); ++j) {
    if (votes[j].empty()) {
      continue;
    }
    scores.push_back({static_cast<int>(j), consistency_vote(votes[j], pseudo_gts[j].box),
                      static_cast<int>(votes[j].size())});
  }
  return scores;
}

std::vector<PseudoLabel> attach_sigma(std::span<const PseudoLabel> pseudo_gts, const AssignmentResult& assignment,
                                      std::span<const Prediction> teacher_preds) {
  std::vector<PseudoLabel> out(pseudo_gts.begin(), pseudo_gts.end());
  for (PseudoLabel& p : out) {
    p.sigma.reset();
  }
  for (const ConsistencyScore& s : consistency_scores(pseudo_gts, assignment, teacher_preds)) {
    out[static_cast<std::size_t>(s.gt_index)].sigma = s.sigma;
  }
  return out;
}

}  // namespace pseco
