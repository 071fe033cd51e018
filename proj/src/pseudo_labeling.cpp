#include "pseco/pseudo_labeling.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "pseco/error.hpp"

namespace pseco {

std::vector<PseudoLabel> generate_pseudo_labels(std::span<const Detection> dets, double tau, double nms_iou) {
  std::map<int, std::vector<std::size_t>> by_category;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    validate(dets[i].box);
    by_category[dets[i].category_id].push_back(i);
  }

  std::vector<std::size_t> survivors;
  std::vector<BBox> boxes;
  std::vector<double> scores;
  for (const auto& [category, members] : by_category) {
    boxes.clear();
    scores.clear();
    for (std::size_t i : members) {
      boxes.push_back(dets[i].box);
      scores.push_back(dets[i].score);
    }
    for (std::size_t k : nms(boxes, scores, nms_iou)) {
      if (dets[members[k]].score >= tau) {
        survivors.push_back(members[k]);
      }
    }
  }

  std::stable_sort(survivors.begin(), survivors.end(), [&](std::size_t l, std::size_t r) {
    return std::tie(dets[r].score, l) < std::tie(dets[l].score, r);
  });

  std::vector<PseudoLabel> out;
  out.reserve(survivors.size());
  for (std::size_t i : survivors) {
    out.push_back(PseudoLabel{dets[i].box, dets[i].category_id, dets[i].score, std::nullopt});
  }
  return out;
}

namespace {

struct Pair {
  double iou;
  std::size_t pseudo;
  std::size_t gt;
};

}  // namespace

PrecisionCurve pseudo_precision_curve(std::span<const PseudoLabel> pseudo, std::span<const GroundTruth> gts,
                                      std::span<const double> iou_thresholds) {
  for (std::size_t i = 1; i < iou_thresholds.size(); ++i) {
    if (!(iou_thresholds[i] > iou_thresholds[i - 1])) {
      throw InvalidInput("pseudo_precision_curve: thresholds must be strictly increasing");
    }
  }

  PrecisionCurve curve;
  curve.empty_input = pseudo.empty();

  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < pseudo.size(); ++i) {
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (pseudo[i].category_id != gts[j].category_id) {
        continue;
      }
      const double v = iou(pseudo[i].box, gts[j].box);
      if (v > 0.0) {
        pairs.push_back({v, i, j});
      }
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& l, const Pair& r) {
    if (l.iou != r.iou) return l.iou > r.iou;
    if (l.pseudo != r.pseudo) return l.pseudo < r.pseudo;
    return l.gt < r.gt;
  });

  for (double threshold : iou_thresholds) {
    std::vector<bool> pseudo_used(pseudo.size(), false);
    std::vector<bool> gt_used(gts.size(), false);
    std::size_t matched = 0;
    for (const Pair& p : pairs) {
      if (p.iou < threshold) {
        break;
      }
      if (pseudo_used[p.pseudo] || gt_used[p.gt]) {
        continue;
      }
      pseudo_used[p.pseudo] = true;
      gt_used[p.gt] = true;
      ++matched;
    }
    const double precision =
        pseudo.empty() ? 0.0 : static_cast<double>(matched) / static_cast<double>(pseudo.size());
    curve.points.push_back({threshold, precision});
  }
  return curve;
}

}  // namespace pseco
