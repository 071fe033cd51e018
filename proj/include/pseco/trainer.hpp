#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "pseco/config.hpp"
#include "pseco/detector.hpp"
#include "pseco/eval_metrics.hpp"
#include "pseco/io.hpp"
#include "pseco/simulator.hpp"

namespace pseco {

using MetricsSink = std::function<void(const MetricsRow&)>;

struct TrainResult {
  DetectorParams student;
  DetectorParams teacher;
  std::vector<MetricsRow> metrics;
  std::optional<double> final_map;         // teacher mAP on the test split after the last step
  std::size_t proposal_sharing_violations = 0;  // student boxes that do not map back onto the teacher's
  std::uint64_t proposal_checksum = 0;     // over every proposal box the teacher consumed
};

/// Synthetic dataset described by the config's dataset fields.
Dataset dataset_from_config(const TrainConfig& cfg);

FeatureLayout layout_for(const TrainConfig& cfg, const Dataset& ds);

/// Labeled scenes only, supervised loss, EMA teacher. Throws InvalidInput when the
/// dataset has no labeled scene, ConfigError when cfg is invalid.
TrainResult train_supervised(const TrainConfig& cfg, const Dataset& ds, const MetricsSink& sink = {});

/// Teacher-student training on labeled and unlabeled scenes. The first
/// burn_in_steps are supervised only; afterwards each step adds the
/// unlabeled loss weighted by beta.
TrainResult train_pseco(const TrainConfig& cfg, const Dataset& ds, const MetricsSink& sink = {});

/// mAP of params on the test split with proposals drawn from cfg.noise_preset.
APResult evaluate_params(const DetectorParams& params, const Dataset& ds, const TrainConfig& cfg);

}  // namespace pseco
