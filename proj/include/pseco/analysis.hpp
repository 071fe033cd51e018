#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pseco/config.hpp"
#include "pseco/detector.hpp"
#include "pseco/eval_metrics.hpp"
#include "pseco/pseudo_labeling.hpp"
#include "pseco/simulator.hpp"

namespace pseco {

struct SigmaSample {
  int scene_id = 0;
  double sigma = 0.0;
  double true_iou = 0.0;  // best IoU of the pseudo box with a latent box of its category
  int n_positives = 0;
};

/// Pseudo-label diagnostics for one teacher over a set of scenes.
struct PseudoAnalysis {
  std::vector<PrecisionPoint> precision;  // pooled over scenes
  std::size_t n_pseudo = 0;
  double coarse_fraction = 0.0;  // share of pseudo boxes with true IoU in [0.3, 0.9]
  std::vector<SigmaSample> sigma_samples;
  AssignmentQuality pla_quality;  // pooled counts, rates over the pooled counts
  AssignmentQuality iou_quality;
};

/// Runs the teacher on proposals drawn from noise for every scene, builds
/// pseudo labels with cfg.tau and cfg.nms_iou, and scores precision, PCV and
/// both assigners against the latent boxes.
PseudoAnalysis analyze_pseudo_labels(const DetectorParams& teacher, std::span<const Scene* const> scenes,
                                     const TrainConfig& cfg, const NoiseConfig& noise,
                                     std::span<const double> iou_thresholds);

/// 0.30, 0.35, ..., 0.95.
std::vector<double> default_precision_thresholds();

}  // namespace pseco
