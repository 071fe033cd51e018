#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pseco/detector.hpp"
#include "pseco/msl.hpp"
#include "pseco/types.hpp"

namespace pseco {

enum class Split { labeled, unlabeled, test };

std::string to_string(Split s);
std::optional<Split> parse_split(std::string_view s);

struct Scene {
  int id = 0;
  ImageDims dims;
  std::vector<GroundTruth> gts;
  Split split = Split::unlabeled;

  bool operator==(const Scene&) const = default;
};

/// Object side lengths are log-uniform in [min_side, max_side]; aspect ratios
/// log-uniform in [1/max_aspect, max_aspect].
struct ScaleDist {
  double min_side = 24.0;
  double max_side = 400.0;
  double max_aspect = 2.0;
};

struct DatasetSpec {
  std::uint64_t seed = 0;
  int n_scenes = 300;
  int n_categories = 4;
  double labeled_fraction = 0.1;
  ScaleDist scale_dist;
  int n_test_scenes = 0;
  ImageDims image_dims{640.0, 640.0};
  int max_objects = 6;
};

struct Dataset {
  int n_categories = 0;
  std::vector<Scene> scenes;
  std::string noise_preset;

  std::vector<const Scene*> with_split(Split s) const;
  bool operator==(const Dataset&) const = default;
};

/// Deterministic in spec.seed. Exactly round(labeled_fraction * n_scenes)
/// training scenes are labeled; test scenes follow the training scenes.
Dataset gen_dataset(const DatasetSpec& spec);

/// Proposal and feature noise. Jitter is relative to the object's side length.
struct NoiseConfig {
  double box_jitter_sigma = 0.0;     // corner std as a fraction of object width/height
  double score_noise_sigma = 0.0;    // logit units (after the oracle head's gain)
  int background_rate = 0;           // random background proposals per scene
  double feature_noise_sigma = 0.0;  // std on the box-offset features (normalized delta units)
  int copies_per_object = 8;         // jittered proposals per object
  double context_sigma = 0.0;        // scale of the per-scene context dimensions
  double prototype_scale = 0.0;      // length of each category's appearance prototype
  double appearance_sigma = 0.0;     // per-object deviation from the prototype
  double evidence_confusion = 0.0;   // per-object noise on the category evidence (IoU units)
};

NoiseConfig noise_preset(std::string_view name);
std::vector<std::string> noise_preset_names();

inline constexpr int kDefaultFeatureDim = 64;
inline constexpr double kScoreGain = 12.0;
// Category evidence is stored as kSignalScale * IoU, so the oracle weight is kScoreGain / kSignalScale.
inline constexpr double kSignalScale = 4.0;

/// Feature layout: [0,4) box offsets to the overlapping object, [4, 4+K) category
/// evidence (scaled IoU with that object on its category), [4+K, D) per-scene
/// context plus the object's appearance scaled by IoU.
struct FeatureLayout {
  int num_categories = 4;
  int dim = kDefaultFeatureDim;

  int signal_offset() const { return 4; }
  int context_offset() const { return 4 + num_categories; }
  int context_dims() const { return dim - context_offset(); }
};

/// Context vector of a scene (unit normal, scaled by noise.context_sigma when encoded).
std::vector<double> scene_context(int scene_id, int dims);

/// Fixed latent traits of one object: appearance (context dims) and category
/// evidence (K dims, one-hot plus confusion). Deterministic in scene id and
/// object index.
struct ObjectLatent {
  std::vector<double> appearance;
  std::vector<double> evidence;
};

std::vector<ObjectLatent> object_latents(int scene_id, std::span<const GroundTruth> gts, const FeatureLayout& layout,
                                         const NoiseConfig& noise);

/// Noise-free encoding plus Gaussian noise drawn from rng. latents[j] belongs to gts[j].
std::vector<double> encode_feature(const BBox& proposal, std::span<const GroundTruth> gts,
                                   std::span<const ObjectLatent> latents, std::span<const double> context,
                                   const FeatureLayout& layout, const NoiseConfig& noise, std::mt19937_64& rng);

std::vector<BBox> sample_proposal_boxes(const Scene& scene, const NoiseConfig& noise, std::mt19937_64& rng);

/// Features for given boxes in a frame whose ground truths are gts, listed in
/// the scene's original order so that object latents line up.
std::vector<Proposal> encode_proposals(std::span<const BBox> boxes, std::span<const GroundTruth> gts, int scene_id,
                                       const FeatureLayout& layout, const NoiseConfig& noise, std::mt19937_64& rng);

std::vector<Proposal> gen_proposals(const Scene& scene, const FeatureLayout& layout, const NoiseConfig& noise,
                                    std::mt19937_64& rng);

/// Weights that invert the feature encoding exactly (offsets pass through,
/// category evidence maps IoU 0.5 to logit 0).
DetectorParams oracle_params(const FeatureLayout& layout);

/// Bias set to the focal-loss prior so initial scores are ~0.01.
DetectorParams initial_params(const FeatureLayout& layout);

/// Every (proposal, category) pair with probability >= min_score as a detection.
std::vector<Detection> detections_from_predictions(std::span<const Prediction> preds, double min_score);

/// Category-wise NMS and top-k truncation of raw detections.
std::vector<Detection> postprocess(std::span<const Detection> dets, double nms_iou, std::size_t max_dets);

/// A scene viewed under weak augmentation: mirrored and/or resized.
struct FramedScene {
  ImageDims dims;
  std::vector<GroundTruth> gts;
};

FramedScene frame_scene(const Scene& scene, double scale, bool hflip);

}  // namespace pseco
