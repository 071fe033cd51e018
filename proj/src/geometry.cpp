#include "pseco/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pseco/error.hpp"

namespace pseco {

bool is_valid(const BBox& b) {
  return std::isfinite(b.x1) && std::isfinite(b.y1) && std::isfinite(b.x2) && std::isfinite(b.y2) &&
         b.x2 > b.x1 && b.y2 > b.y1;
}

void validate(const BBox& b) {
  if (!is_valid(b)) {
    throw InvalidInput("degenerate box [" + std::to_string(b.x1) + ", " + std::to_string(b.y1) + ", " +
                       std::to_string(b.x2) + ", " + std::to_string(b.y2) + "]");
  }
}

double iou(const BBox& a, const BBox& b) {
  validate(a);
  validate(b);
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) {
    return 0.0;
  }
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

IouMatrix iou_matrix(std::span<const BBox> a, std::span<const BBox> b) {
  IouMatrix m(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      m(i, j) = iou(a[i], b[j]);
    }
  }
  return m;
}

std::vector<std::size_t> nms(std::span<const BBox> boxes, std::span<const double> scores, double iou_threshold) {
  if (boxes.size() != scores.size()) {
    throw InvalidInput("nms: " + std::to_string(boxes.size()) + " boxes but " + std::to_string(scores.size()) +
                       " scores");
  }
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return scores[l] > scores[r]; });

  std::vector<std::size_t> kept;
  std::vector<bool> suppressed(boxes.size(), false);
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (suppressed[i]) {
      continue;
    }
    kept.push_back(i);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (!suppressed[j] && iou(boxes[i], boxes[j]) >= iou_threshold) {
        suppressed[j] = true;
      }
    }
  }
  return kept;
}

BBox transform_box(const BBox& b, double scale, bool hflip, double image_width) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InvalidInput("transform_box: scale must be positive, got " + std::to_string(scale));
  }
  BBox out = b;
  if (hflip) {
    out.x1 = image_width - b.x2;
    out.x2 = image_width - b.x1;
  }
  out.x1 *= scale;
  out.y1 *= scale;
  out.x2 *= scale;
  out.y2 *= scale;
  validate(out);
  return out;
}

}  // namespace pseco
