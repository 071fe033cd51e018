#include "pseco/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "pseco/assignment.hpp"
#include "pseco/pcv.hpp"
#include "pseco/rng.hpp"

namespace pseco {

std::vector<double> default_precision_thresholds() {
  std::vector<double> t;
  for (int i = 0; i <= 13; ++i) t.push_back(0.30 + 0.05 * i);
  return t;
}

namespace {

void pool(AssignmentQuality& total, const AssignmentQuality& q) {
  total.positives += q.positives;
  total.false_positives += q.false_positives;
  total.true_foreground += q.true_foreground;
  total.missed_foreground += q.missed_foreground;
}

void finish(AssignmentQuality& q) {
  q.false_positive_rate =
      q.positives ? static_cast<double>(q.false_positives) / static_cast<double>(q.positives) : 0.0;
  q.false_negative_rate =
      q.true_foreground ? static_cast<double>(q.missed_foreground) / static_cast<double>(q.true_foreground) : 0.0;
}

double best_same_category_iou(const BBox& box, int category, std::span<const GroundTruth> gts) {
  double best = 0.0;
  for (const GroundTruth& g : gts) {
    if (g.category_id == category) best = std::max(best, iou(box, g.box));
  }
  return best;
}

}  // namespace

PseudoAnalysis analyze_pseudo_labels(const DetectorParams& teacher, std::span<const Scene* const> scenes,
                                     const TrainConfig& cfg, const NoiseConfig& noise,
                                     std::span<const double> iou_thresholds) {
  const FeatureLayout layout{teacher.num_categories(), teacher.feature_dim()};
  PseudoAnalysis out;
  std::vector<double> matched(iou_thresholds.size(), 0.0);
  std::size_t coarse = 0;

  for (const Scene* scene : scenes) {
    auto rng = make_stream(cfg.seed, "analysis-proposals", static_cast<std::uint64_t>(scene->id));
    const std::vector<Proposal> props = gen_proposals(*scene, layout, noise, rng);
    const std::vector<Prediction> preds = detector_forward(teacher, props);
    const std::vector<Detection> dets = detections_from_predictions(preds, cfg.tau);
    const std::vector<PseudoLabel> pseudo = generate_pseudo_labels(dets, cfg.tau, cfg.nms_iou);

    const PrecisionCurve curve = pseudo_precision_curve(pseudo, scene->gts, iou_thresholds);
    for (std::size_t t = 0; t < iou_thresholds.size(); ++t) {
      matched[t] += std::round(curve.points[t].precision * static_cast<double>(pseudo.size()));
    }
    out.n_pseudo += pseudo.size();

    std::vector<BBox> boxes;
    for (const Proposal& p : props) boxes.push_back(p.box);
    std::vector<BBox> pseudo_boxes;
    std::vector<int> categories;
    for (const PseudoLabel& p : pseudo) {
      pseudo_boxes.push_back(p.box);
      categories.push_back(p.category_id);
      const double true_iou = best_same_category_iou(p.box, p.category_id, scene->gts);
      if (true_iou >= 0.3 && true_iou <= 0.9) ++coarse;
    }

    const AssignmentResult pla =
        pla_assign(boxes, preds, pseudo, {cfg.t_bag, cfg.alpha, cfg.dynamic_k, 10});
    const AssignmentResult by_iou = iou_assign(boxes, pseudo_boxes, cfg.pos_threshold);
    pool(out.pla_quality, assignment_quality(pla, boxes, categories, scene->gts));
    pool(out.iou_quality, assignment_quality(by_iou, boxes, categories, scene->gts));

    for (const ConsistencyScore& s : consistency_scores(pseudo, pla, preds)) {
      const PseudoLabel& p = pseudo[static_cast<std::size_t>(s.gt_index)];
      out.sigma_samples.push_back(
          {scene->id, s.sigma, best_same_category_iou(p.box, p.category_id, scene->gts), s.n_positives});
    }
  }

  for (std::size_t t = 0; t < iou_thresholds.size(); ++t) {
    const double precision = out.n_pseudo ? matched[t] / static_cast<double>(out.n_pseudo) : 0.0;
    out.precision.push_back({iou_thresholds[t], precision});
  }
  out.coarse_fraction = out.n_pseudo ? static_cast<double>(coarse) / static_cast<double>(out.n_pseudo) : 0.0;
  finish(out.pla_quality);
  finish(out.iou_quality);
  return out;
}

}  // namespace pseco
