#pragma once

#include <optional>
#include <vector>

#include "pseco/geometry.hpp"

namespace pseco {

struct GroundTruth {
  BBox box;
  int category_id = 0;

  bool operator==(const GroundTruth&) const = default;
};

// A scored detector output before thresholding.
struct Detection {
  BBox box;
  int category_id = 0;
  double score = 0.0;
};

struct PseudoLabel {
  BBox box;
  int category_id = 0;
  double score = 0.0;
  // Localization quality from positive-proposal voting; absent until attached,
  // and left absent for pseudo boxes that received no positives.
  std::optional<double> sigma;
};

// Per-proposal head output: independent per-category probabilities and the
// box refined by the regression branch.
struct Prediction {
  std::vector<double> category_probs;
  BBox regressed_box;
};

struct Proposal {
  BBox box;
  std::vector<double> feature;
};

}  // namespace pseco
