#include "pseco/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "pseco/error.hpp"

namespace pseco {

std::vector<double> coco_iou_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) {
    t.push_back(0.5 + 0.05 * i);
  }
  return t;
}

double interpolated_ap(const std::vector<bool>& tp_in_rank_order, std::size_t num_gts) {
  if (num_gts == 0) {
    throw InvalidInput("interpolated_ap: no ground truths");
  }
  const std::size_t n = tp_in_rank_order.size();
  std::vector<double> precision(n);
  std::vector<double> recall(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (tp_in_rank_order[i]) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(num_gts);
  }
  for (std::size_t i = n; i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double sum = 0.0;
  for (int r = 0; r <= 100; ++r) {
    const double level = static_cast<double>(r) / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), level);
    if (it != recall.end()) {
      sum += precision[static_cast<std::size_t>(it - recall.begin())];
    }
  }
  return sum / 101.0;
}

namespace {

struct RankedDet {
  double score;
  std::size_t image;
  std::size_t index;
};

}  // namespace

APResult average_precision(std::span<const ImageEval> images, std::span<const double> iou_thresholds) {
  std::set<int> categories;
  for (const ImageEval& im : images) {
    for (const GroundTruth& g : im.gts) categories.insert(g.category_id);
  }
  if (categories.empty()) {
    throw InvalidInput("average_precision: no ground truths, AP is undefined");
  }

  APResult result;
  result.thresholds.assign(iou_thresholds.begin(), iou_thresholds.end());
  result.ap_per_threshold.assign(iou_thresholds.size(), 0.0);
  for (int c : categories) result.ap_per_category[c] = 0.0;

  for (int category : categories) {
    std::vector<RankedDet> ranked;
    std::size_t num_gts = 0;
    for (std::size_t m = 0; m < images.size(); ++m) {
      for (std::size_t i = 0; i < images[m].dets.size(); ++i) {
        if (images[m].dets[i].category_id == category) ranked.push_back({images[m].dets[i].score, m, i});
      }
      for (const GroundTruth& g : images[m].gts) {
        if (g.category_id == category) ++num_gts;
      }
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const RankedDet& l, const RankedDet& r) { return l.score > r.score; });

    for (std::size_t t = 0; t < iou_thresholds.size(); ++t) {
      const double threshold = iou_thresholds[t];
      std::vector<std::vector<bool>> matched(images.size());
      for (std::size_t m = 0; m < images.size(); ++m) matched[m].assign(images[m].gts.size(), false);
      std::vector<bool> tp(ranked.size(), false);
      for (std::size_t r = 0; r < ranked.size(); ++r) {
        const ImageEval& im = images[ranked[r].image];
        const BBox& box = im.dets[ranked[r].index].box;
        double best = threshold;
        int best_gt = -1;
        for (std::size_t g = 0; g < im.gts.size(); ++g) {
          if (im.gts[g].category_id != category || matched[ranked[r].image][g]) continue;
          const double v = iou(box, im.gts[g].box);
          if (v >= best && (best_gt < 0 || v > best)) {
            best = v;
            best_gt = static_cast<int>(g);
          }
        }
        if (best_gt >= 0) {
          matched[ranked[r].image][static_cast<std::size_t>(best_gt)] = true;
          tp[r] = true;
        }
      }
      const double ap = interpolated_ap(tp, num_gts);
      result.ap_per_threshold[t] += ap;
      result.ap_per_category[category] += ap;
    }
  }

  const auto n_cat = static_cast<double>(categories.size());
  for (double& v : result.ap_per_threshold) v /= n_cat;
  for (auto& [c, v] : result.ap_per_category) {
    v = iou_thresholds.empty() ? 0.0 : v / static_cast<double>(iou_thresholds.size());
  }
  result.map = iou_thresholds.empty()
                   ? 0.0
                   : std::accumulate(result.ap_per_threshold.begin(), result.ap_per_threshold.end(), 0.0) /
                         static_cast<double>(iou_thresholds.size());
  return result;
}

APResult average_precision(std::span<const ImageEval> images) {
  const std::vector<double> t = coco_iou_thresholds();
  return average_precision(images, t);
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw InvalidInput("pearson: need two equal-length samples of size >= 2");
  }
  const auto n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw InvalidInput("pearson: constant input, correlation undefined");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

AssignmentQuality assignment_quality(const AssignmentResult& assignment, std::span<const BBox> proposals,
                                     std::span<const int> assigned_categories, std::span<const GroundTruth> true_gts,
                                     double true_iou) {
  if (assignment.labels.size() != proposals.size()) {
    throw InvalidInput("assignment_quality: assignment and proposal counts differ");
  }
  AssignmentQuality q;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    const ProposalLabel& label = assignment.labels[i];
    double best_any = 0.0;
    for (const GroundTruth& g : true_gts) best_any = std::max(best_any, iou(proposals[i], g.box));
    const bool truly_foreground = best_any >= true_iou;
    if (truly_foreground) ++q.true_foreground;

    if (!label.is_positive()) {
      if (truly_foreground) ++q.missed_foreground;
      continue;
    }
    if (label.gt_index < 0 || static_cast<std::size_t>(label.gt_index) >= assigned_categories.size()) {
      throw InvalidInput("assignment_quality: positive references unknown box " + std::to_string(label.gt_index));
    }
    const int category = assigned_categories[static_cast<std::size_t>(label.gt_index)];
    ++q.positives;
    bool hit = false;
    for (const GroundTruth& g : true_gts) {
      if (g.category_id == category && iou(proposals[i], g.box) >= true_iou) {
        hit = true;
        break;
      }
    }
    if (!hit) ++q.false_positives;
  }
  q.false_positive_rate = q.positives ? static_cast<double>(q.false_positives) / static_cast<double>(q.positives) : 0.0;
  q.false_negative_rate =
      q.true_foreground ? static_cast<double>(q.missed_foreground) / static_cast<double>(q.true_foreground) : 0.0;
  return q;
}

}  // namespace pseco
