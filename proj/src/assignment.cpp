#include "pseco/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "pseco/error.hpp"

namespace pseco {

std::size_t AssignmentResult::num_positives() const {
  return static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(), [](const ProposalLabel& l) { return l.is_positive(); }));
}

std::vector<std::size_t> AssignmentResult::positives_of(int gt_index) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].is_positive() && labels[i].gt_index == gt_index) {
      out.push_back(i);
    }
  }
  return out;
}

AssignmentResult iou_assign(std::span<const BBox> proposals, std::span<const BBox> gts, double pos_threshold) {
  if (!(pos_threshold > 0.0 && pos_threshold < 1.0)) {
    throw InvalidInput("iou_assign: pos_threshold must lie in (0, 1)");
  }
  AssignmentResult result;
  result.labels.assign(proposals.size(), ProposalLabel::negative());
  result.positives_per_gt.assign(gts.size(), 0);
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    double best = -1.0;
    int best_gt = -1;
    for (std::size_t j = 0; j < gts.size(); ++j) {
      const double v = iou(proposals[i], gts[j]);
      if (v > best) {
        best = v;
        best_gt = static_cast<int>(j);
      }
    }
    if (best_gt >= 0 && best >= pos_threshold) {
      result.labels[i] = ProposalLabel::positive(best_gt);
      ++result.positives_per_gt[static_cast<std::size_t>(best_gt)];
    }
  }
  return result;
}

std::vector<std::size_t> candidate_bag(std::span<const BBox> proposals, const BBox& gt, double t) {
  std::vector<std::size_t> bag;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    if (iou(proposals[i], gt) >= t) {
      bag.push_back(i);
    }
  }
  return bag;
}

double proposal_quality(double s, double u, double alpha) {
  if (!(s >= 0.0 && s <= 1.0) || !(u >= 0.0 && u <= 1.0) || !(alpha >= 0.0 && alpha <= 1.0)) {
    throw InvalidInput("proposal_quality: s, u and alpha must lie in [0, 1]");
  }
  // std::pow(0, 0) is already 1; the explicit branches keep alpha in {0, 1} exact.
  if (alpha == 1.0) return s;
  if (alpha == 0.0) return u;
  return std::pow(s, alpha) * std::pow(u, 1.0 - alpha);
}

int dynamic_k(std::span<const double> bag_ious) {
  if (bag_ious.empty()) {
    throw InvalidInput("dynamic_k: empty candidate bag");
  }
  const double sum = std::accumulate(bag_ious.begin(), bag_ious.end(), 0.0);
  const auto k = static_cast<long long>(std::floor(sum));
  return static_cast<int>(std::clamp<long long>(k, 1, static_cast<long long>(bag_ious.size())));
}

namespace {

int bag_k(std::vector<double> ious, const PlaOptions& options) {
  switch (options.k_mode) {
    case DynamicKMode::all:
      return static_cast<int>(ious.size());
    case DynamicKMode::top_q:
      if (ious.size() > options.top_q) {
        std::partial_sort(ious.begin(), ious.begin() + static_cast<std::ptrdiff_t>(options.top_q), ious.end(),
                          std::greater<>());
        const int k = dynamic_k(std::span<const double>(ious.data(), options.top_q));
        return k;
      }
      return dynamic_k(ious);
    case DynamicKMode::whole_bag:
      break;
  }
  return dynamic_k(ious);
}

}  // namespace

AssignmentResult pla_assign(std::span<const BBox> proposals, std::span<const Prediction> teacher_preds,
                            std::span<const PseudoLabel> pseudo_gts, const PlaOptions& options) {
  if (proposals.size() != teacher_preds.size()) {
    throw InvalidInput("pla_assign: " + std::to_string(proposals.size()) + " proposals but " +
                       std::to_string(teacher_preds.size()) + " teacher predictions");
  }
  if (!(options.t > 0.0 && options.t < 1.0)) {
    throw InvalidInput("pla_assign: bag threshold t must lie in (0, 1)");
  }

  const std::size_t n = proposals.size();
  // Best (highest q) pseudo box that selected each proposal so far.
  std::vector<int> winner(n, -1);
  std::vector<double> winner_q(n, -1.0);

  for (std::size_t j = 0; j < pseudo_gts.size(); ++j) {
    const PseudoLabel& gt = pseudo_gts[j];
    const std::vector<std::size_t> bag = candidate_bag(proposals, gt.box, options.t);
    if (bag.empty()) {
      continue;
    }
    std::vector<double> bag_ious;
    std::vector<double> quality;
    bag_ious.reserve(bag.size());
    quality.reserve(bag.size());
    for (std::size_t i : bag) {
      const Prediction& pred = teacher_preds[i];
      if (gt.category_id < 0 || static_cast<std::size_t>(gt.category_id) >= pred.category_probs.size()) {
        throw InvalidInput("pla_assign: pseudo label category " + std::to_string(gt.category_id) +
                           " outside the teacher's category range");
      }
      bag_ious.push_back(iou(proposals[i], gt.box));
      quality.push_back(proposal_quality(pred.category_probs[static_cast<std::size_t>(gt.category_id)],
                                         iou(pred.regressed_box, gt.box), options.alpha));
    }

    std::vector<std::size_t> order(bag.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t l, std::size_t r) { return quality[l] > quality[r]; });
    const auto k = static_cast<std::size_t>(bag_k(bag_ious, options));
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t i = bag[order[r]];
      const double q = quality[order[r]];
      if (q > winner_q[i]) {
        winner_q[i] = q;
        winner[i] = static_cast<int>(j);
      }
    }
  }

  AssignmentResult result;
  result.labels.assign(n, ProposalLabel::negative());
  result.positives_per_gt.assign(pseudo_gts.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (winner[i] >= 0) {
      result.labels[i] = ProposalLabel::positive(winner[i]);
      ++result.positives_per_gt[static_cast<std::size_t>(winner[i])];
    }
  }
  return result;
}

}  // namespace pseco
