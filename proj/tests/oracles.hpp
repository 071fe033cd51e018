#pragma once

// Brute-force reference implementations used by the unit and acceptance tests.
// They work on integer-coordinate boxes so every area is an exact integer.

#include <algorithm>
#include <cstddef>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "pseco/assignment.hpp"
#include "pseco/eval_metrics.hpp"
#include "pseco/types.hpp"

namespace oracle {

using pseco::BBox;

inline BBox random_grid_box(std::mt19937_64& rng, int extent = 20) {
  std::uniform_int_distribution<int> pos(0, extent - 1);
  const int x1 = pos(rng);
  const int y1 = pos(rng);
  std::uniform_int_distribution<int> wx(1, extent - x1);
  std::uniform_int_distribution<int> wy(1, extent - y1);
  return {double(x1), double(y1), double(x1 + wx(rng)), double(y1 + wy(rng))};
}

inline std::vector<BBox> random_grid_boxes(std::mt19937_64& rng, std::size_t n, int extent = 20) {
  std::vector<BBox> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_grid_box(rng, extent));
  return out;
}

// Counts unit cells covered by both boxes.
inline double cell_iou(const BBox& a, const BBox& b) {
  long inter = 0;
  for (int x = int(std::min(a.x1, b.x1)); x < int(std::max(a.x2, b.x2)); ++x) {
    for (int y = int(std::min(a.y1, b.y1)); y < int(std::max(a.y2, b.y2)); ++y) {
      const bool in_a = x >= a.x1 && x + 1 <= a.x2 && y >= a.y1 && y + 1 <= a.y2;
      const bool in_b = x >= b.x1 && x + 1 <= b.x2 && y >= b.y1 && y + 1 <= b.y2;
      inter += in_a && in_b;
    }
  }
  if (inter == 0) return 0.0;
  const double area_a = (a.x2 - a.x1) * (a.y2 - a.y1);
  const double area_b = (b.x2 - b.x1) * (b.y2 - b.y1);
  return double(inter) / (area_a + area_b - double(inter));
}

// True when box l is visited before box r by a score-descending, index-stable scan.
inline bool precedes(const std::vector<double>& scores, std::size_t l, std::size_t r) {
  return scores[l] > scores[r] || (scores[l] == scores[r] && l < r);
}

// The kept set K of greedy NMS is the unique subset where a box belongs to K
// exactly when no earlier member of K overlaps it at >= threshold. Every subset
// is tried and the one with this property is returned in visiting order.
inline std::vector<std::size_t> nms(const std::vector<BBox>& boxes, const std::vector<double>& scores,
                                    double threshold) {
  const std::size_t n = boxes.size();
  std::vector<std::vector<double>> overlap(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) overlap[i][j] = cell_iou(boxes[i], boxes[j]);
  }
  std::vector<std::size_t> found;
  int solutions = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      bool blocked = false;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i && (mask >> j & 1u) && precedes(scores, j, i) && overlap[i][j] >= threshold) {
          blocked = true;
        }
      }
      ok = bool(mask >> i & 1u) == !blocked;
    }
    if (!ok) continue;
    ++solutions;
    found.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1u) found.push_back(i);
    }
  }
  if (solutions != 1) return {n + 1};  // cannot happen for a valid greedy order
  std::sort(found.begin(), found.end(), [&](std::size_t l, std::size_t r) { return precedes(scores, l, r); });
  return found;
}

// 101-point interpolated AP: precision at recall level r is the best precision
// reached at any rank whose recall is at least r.
inline double ap_from_flags(const std::vector<bool>& tp, std::size_t num_gts) {
  double sum = 0.0;
  for (int r = 0; r <= 100; ++r) {
    const double level = double(r) / 100.0;
    double best = 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < tp.size(); ++i) {
      hits += tp[i];
      const double recall = double(hits) / double(num_gts);
      const double precision = double(hits) / double(i + 1);
      if (recall >= level) best = std::max(best, precision);
    }
    sum += best;
  }
  return sum / 101.0;
}

inline double mean_ap(const std::vector<pseco::ImageEval>& images, const std::vector<double>& thresholds) {
  std::set<int> categories;
  for (const auto& im : images) {
    for (const auto& g : im.gts) categories.insert(g.category_id);
  }
  std::vector<double> per_threshold(thresholds.size(), 0.0);
  for (int c : categories) {
    struct Ranked {
      double score;
      std::size_t image;
      std::size_t det;
    };
    std::vector<Ranked> ranked;
    std::size_t num_gts = 0;
    for (std::size_t m = 0; m < images.size(); ++m) {
      for (std::size_t i = 0; i < images[m].dets.size(); ++i) {
        if (images[m].dets[i].category_id == c) ranked.push_back({images[m].dets[i].score, m, i});
      }
      for (const auto& g : images[m].gts) num_gts += g.category_id == c;
    }
    // Insertion sort keeps equal scores in input order.
    for (std::size_t i = 1; i < ranked.size(); ++i) {
      for (std::size_t j = i; j > 0 && ranked[j - 1].score < ranked[j].score; --j) std::swap(ranked[j - 1], ranked[j]);
    }
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      std::map<std::pair<std::size_t, std::size_t>, bool> taken;
      std::vector<bool> tp;
      for (const Ranked& r : ranked) {
        const auto& im = images[r.image];
        int best = -1;
        double best_iou = -1.0;
        for (std::size_t g = 0; g < im.gts.size(); ++g) {
          if (im.gts[g].category_id != c || taken[{r.image, g}]) continue;
          const double v = cell_iou(im.dets[r.det].box, im.gts[g].box);
          if (v >= thresholds[t] && v > best_iou) {
            best_iou = v;
            best = int(g);
          }
        }
        if (best >= 0) taken[{r.image, std::size_t(best)}] = true;
        tp.push_back(best >= 0);
      }
      per_threshold[t] += ap_from_flags(tp, num_gts);
    }
  }
  double total = 0.0;
  for (double& v : per_threshold) {
    v /= double(categories.size());
    total += v;
  }
  return total / double(thresholds.size());
}

// Exhaustive PLA reference: a candidate is selected by a pseudo box when fewer
// than k bag members outrank it, and a proposal selected several times goes to
// the selector with the highest quality, the lower index on ties.
inline pseco::AssignmentResult pla(const std::vector<BBox>& proposals, const std::vector<pseco::Prediction>& preds,
                                   const std::vector<pseco::PseudoLabel>& pseudo, double t, double alpha) {
  const std::size_t n = proposals.size();
  std::vector<int> owner(n, -1);
  std::vector<double> owner_q(n, -1.0);
  for (std::size_t j = 0; j < pseudo.size(); ++j) {
    std::vector<std::size_t> bag;
    double iou_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = cell_iou(proposals[i], pseudo[j].box);
      if (v >= t) {
        bag.push_back(i);
        iou_sum += v;
      }
    }
    if (bag.empty()) continue;
    const long k = std::clamp<long>(long(iou_sum), 1, long(bag.size()));
    std::vector<double> q;
    for (std::size_t i : bag) {
      const double s = preds[i].category_probs[std::size_t(pseudo[j].category_id)];
      const double u = cell_iou(preds[i].regressed_box, pseudo[j].box);
      q.push_back(pseco::proposal_quality(s, u, alpha));
    }
    for (std::size_t a = 0; a < bag.size(); ++a) {
      long ahead = 0;
      for (std::size_t b = 0; b < bag.size(); ++b) {
        ahead += q[b] > q[a] || (q[b] == q[a] && b < a);
      }
      if (ahead < k && q[a] > owner_q[bag[a]]) {
        owner_q[bag[a]] = q[a];
        owner[bag[a]] = int(j);
      }
    }
  }
  pseco::AssignmentResult r;
  r.labels.assign(n, pseco::ProposalLabel::negative());
  r.positives_per_gt.assign(pseudo.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (owner[i] >= 0) {
      r.labels[i] = pseco::ProposalLabel::positive(owner[i]);
      ++r.positives_per_gt[std::size_t(owner[i])];
    }
  }
  return r;
}

}  // namespace oracle
