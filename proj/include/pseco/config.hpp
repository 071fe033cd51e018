#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "pseco/assignment.hpp"

namespace pseco {

enum class UnsupReg { off, pcv };
enum class AssignerKind { pla, iou };
enum class ViewMode { v1, v1v2 };
enum class LrSchedule { constant, cosine };

std::string to_string(UnsupReg v);
std::string to_string(AssignerKind v);
std::string to_string(ViewMode v);
std::string to_string(LrSchedule v);
std::string to_string(DynamicKMode v);

inline constexpr int kConfigVersion = 1;

/// Every knob of a training run. Defaults are the published settings where
/// those exist (tau, beta, alpha, t_bag, pos_threshold, unlabeled ratio,
/// resize range, downsample factor) and desk-scale choices otherwise.
struct TrainConfig {
  double tau = 0.5;
  double beta = 4.0;
  double alpha = 0.5;
  double t_bag = 0.4;
  double pos_threshold = 0.5;
  double ema_momentum = 0.999;
  int burn_in_steps = 500;
  int unlabeled_ratio = 4;
  double resize_min = 0.8;
  double resize_max = 1.3;
  int downsample_factor = 2;
  UnsupReg unsup_reg = UnsupReg::pcv;
  double feat_consistency_weight = 0.0;
  double lr = 0.005;
  LrSchedule lr_schedule = LrSchedule::cosine;
  int steps = 12000;
  std::uint64_t seed = 0;
  std::string noise_preset = "default";

  AssignerKind assigner = AssignerKind::pla;
  ViewMode views = ViewMode::v1v2;
  DynamicKMode dynamic_k = DynamicKMode::whole_bag;
  double nms_iou = 0.5;
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
  double flip_prob = 0.5;
  double aug_noise_sigma = 0.1;
  int eval_every = 500;
  double eval_min_score = 0.05;
  int max_dets = 100;

  // Synthetic dataset used when a command is not given --data.
  int scenes = 300;
  int categories = 4;
  double labeled_frac = 0.1;
  int test_scenes = 200;
  int feature_dim = 64;

  bool operator==(const TrainConfig&) const = default;
};

/// Learning rate at a step under cfg.lr_schedule.
double learning_rate(const TrainConfig& cfg, int step);

/// Throws ConfigError describing the first out-of-range field.
void validate(const TrainConfig& cfg);

/// Flat TOML: one `key = value` per field, `resize_range = [lo, hi]`, optional
/// `version`. Unknown keys, wrong types and out-of-range values are rejected.
TrainConfig parse_config(std::string_view toml_text);
TrainConfig load_config(const std::filesystem::path& path);

std::string config_to_toml(const TrainConfig& cfg);
void save_config(const TrainConfig& cfg, const std::filesystem::path& path);

}  // namespace pseco
