#include "pseco/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pseco/error.hpp"
#include "pseco/pseudo_labeling.hpp"
#include "pseco/rng.hpp"

namespace pseco {

std::string to_string(Split s) {
  switch (s) {
    case Split::labeled:
      return "labeled";
    case Split::unlabeled:
      return "unlabeled";
    case Split::test:
      return "test";
  }
  return "unlabeled";
}

std::optional<Split> parse_split(std::string_view s) {
  if (s == "labeled") return Split::labeled;
  if (s == "unlabeled") return Split::unlabeled;
  if (s == "test") return Split::test;
  return std::nullopt;
}

std::vector<const Scene*> Dataset::with_split(Split s) const {
  std::vector<const Scene*> out;
  for (const Scene& scene : scenes) {
    if (scene.split == s) out.push_back(&scene);
  }
  return out;
}

namespace {

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

Scene make_scene(int id, const DatasetSpec& spec, std::mt19937_64& rng) {
  Scene scene;
  scene.id = id;
  scene.dims = spec.image_dims;
  std::uniform_int_distribution<int> count(1, spec.max_objects);
  std::uniform_int_distribution<int> category(0, spec.n_categories - 1);
  const int n = count(rng);
  const double max_w = 0.9 * spec.image_dims.width;
  const double max_h = 0.9 * spec.image_dims.height;
  for (int attempt = 0; attempt < 50 * n && static_cast<int>(scene.gts.size()) < n; ++attempt) {
    const double side = log_uniform(rng, spec.scale_dist.min_side, spec.scale_dist.max_side);
    const double aspect = log_uniform(rng, 1.0 / spec.scale_dist.max_aspect, spec.scale_dist.max_aspect);
    const double w = std::min(side * std::sqrt(aspect), max_w);
    const double h = std::min(side / std::sqrt(aspect), max_h);
    std::uniform_real_distribution<double> ux(0.0, spec.image_dims.width - w);
    std::uniform_real_distribution<double> uy(0.0, spec.image_dims.height - h);
    const double x = ux(rng);
    const double y = uy(rng);
    const BBox box{x, y, x + w, y + h};
    const int c = category(rng);
    const bool crowded = std::any_of(scene.gts.begin(), scene.gts.end(),
                                     [&](const GroundTruth& g) { return iou(g.box, box) > 0.3; });
    if (!crowded) {
      scene.gts.push_back({box, c});
    }
  }
  return scene;
}

}  // namespace

Dataset gen_dataset(const DatasetSpec& spec) {
  if (!(spec.labeled_fraction > 0.0 && spec.labeled_fraction <= 1.0)) {
    throw InvalidInput("gen_dataset: labeled_fraction must lie in (0, 1]");
  }
  if (spec.n_categories < 1 || spec.n_scenes < 0 || spec.n_test_scenes < 0 || spec.max_objects < 1) {
    throw InvalidInput("gen_dataset: bad scene or category counts");
  }
  Dataset ds;
  ds.n_categories = spec.n_categories;
  for (int i = 0; i < spec.n_scenes; ++i) {
    auto rng = make_stream(spec.seed, "scene", static_cast<std::uint64_t>(i));
    ds.scenes.push_back(make_scene(i, spec, rng));
  }

  std::vector<int> order(static_cast<std::size_t>(spec.n_scenes));
  std::iota(order.begin(), order.end(), 0);
  auto split_rng = make_stream(spec.seed, "split");
  std::shuffle(order.begin(), order.end(), split_rng);
  const auto n_labeled = static_cast<std::size_t>(std::llround(spec.labeled_fraction * spec.n_scenes));
  for (std::size_t r = 0; r < order.size(); ++r) {
    ds.scenes[static_cast<std::size_t>(order[r])].split = r < n_labeled ? Split::labeled : Split::unlabeled;
  }

  for (int i = 0; i < spec.n_test_scenes; ++i) {
    auto rng = make_stream(spec.seed, "test-scene", static_cast<std::uint64_t>(i));
    Scene s = make_scene(spec.n_scenes + i, spec, rng);
    s.split = Split::test;
    ds.scenes.push_back(std::move(s));
  }
  return ds;
}

NoiseConfig noise_preset(std::string_view name) {
  if (name == "clean") {
    NoiseConfig n;
    n.copies_per_object = 8;
    return n;
  }
  if (name == "coco-like") {
    NoiseConfig n;
    n.box_jitter_sigma = 0.15;
    n.score_noise_sigma = 0.8;
    n.background_rate = 16;
    n.feature_noise_sigma = 0.25;
    n.copies_per_object = 8;
    n.context_sigma = 1.0;
    return n;
  }
  if (name == "default") {
    NoiseConfig n;
    n.box_jitter_sigma = 0.15;
    n.score_noise_sigma = 0.8;
    n.background_rate = 16;
    n.feature_noise_sigma = 0.05;
    n.copies_per_object = 8;
    n.prototype_scale = 2.0;
    n.appearance_sigma = 0.75;
    n.evidence_confusion = 0.75;
    return n;
  }
  throw InvalidInput("unknown noise preset '" + std::string(name) + "'");
}

std::vector<std::string> noise_preset_names() { return {"clean", "coco-like", "default"}; }

std::vector<double> scene_context(int scene_id, int dims) {
  auto rng = make_stream(0, "scene-context", static_cast<std::uint64_t>(scene_id));
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> out(static_cast<std::size_t>(std::max(dims, 0)));
  for (double& v : out) v = n(rng);
  return out;
}

std::vector<ObjectLatent> object_latents(int scene_id, std::span<const GroundTruth> gts, const FeatureLayout& layout,
                                         const NoiseConfig& noise) {
  const int dims = std::max(layout.context_dims(), 0);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<double>> prototypes;
  for (int k = 0; k < layout.num_categories; ++k) {
    auto rng = make_stream(0, "prototype", static_cast<std::uint64_t>(k));
    std::vector<double> v(static_cast<std::size_t>(dims));
    double norm = 0.0;
    for (double& x : v) {
      x = unit(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : v) x = norm > 0.0 ? noise.prototype_scale * x / norm : 0.0;
    prototypes.push_back(std::move(v));
  }

  std::vector<ObjectLatent> out;
  out.reserve(gts.size());
  for (std::size_t j = 0; j < gts.size(); ++j) {
    auto rng = make_stream(0, "object", static_cast<std::uint64_t>(scene_id), j);
    ObjectLatent latent;
    const int c = gts[j].category_id;
    latent.appearance.resize(static_cast<std::size_t>(dims));
    for (int d = 0; d < dims; ++d) {
      const double proto = c >= 0 && c < layout.num_categories
                               ? prototypes[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)]
                               : 0.0;
      latent.appearance[static_cast<std::size_t>(d)] = proto + noise.appearance_sigma * unit(rng);
    }
    latent.evidence.resize(static_cast<std::size_t>(layout.num_categories));
    for (int k = 0; k < layout.num_categories; ++k) {
      latent.evidence[static_cast<std::size_t>(k)] = (k == c ? 1.0 : 0.0) + noise.evidence_confusion * unit(rng);
    }
    out.push_back(std::move(latent));
  }
  return out;
}

std::vector<double> encode_feature(const BBox& proposal, std::span<const GroundTruth> gts,
                                   std::span<const ObjectLatent> latents, std::span<const double> context,
                                   const FeatureLayout& layout, const NoiseConfig& noise, std::mt19937_64& rng) {
  if (layout.context_dims() < 0) {
    throw InvalidInput("feature dimension too small for the category count");
  }
  if (latents.size() != gts.size()) {
    throw InvalidInput("encode_feature: one latent per ground truth is required");
  }
  std::vector<double> f(static_cast<std::size_t>(layout.dim), 0.0);

  double best = 0.0;
  int source = -1;
  for (std::size_t j = 0; j < gts.size(); ++j) {
    const double v = iou(proposal, gts[j].box);
    if (v > best) {
      best = v;
      source = static_cast<int>(j);
    }
  }
  if (source >= 0) {
    const GroundTruth& g = gts[static_cast<std::size_t>(source)];
    const ObjectLatent& latent = latents[static_cast<std::size_t>(source)];
    const BoxDeltas t = encode_deltas(proposal, g.box);
    std::copy(t.begin(), t.end(), f.begin());
    for (int k = 0; k < layout.num_categories; ++k) {
      f[static_cast<std::size_t>(layout.signal_offset() + k)] =
          kSignalScale * best * latent.evidence[static_cast<std::size_t>(k)];
    }
    for (int d = 0; d < layout.context_dims(); ++d) {
      f[static_cast<std::size_t>(layout.context_offset() + d)] = best * latent.appearance[static_cast<std::size_t>(d)];
    }
  }

  std::normal_distribution<double> unit(0.0, 1.0);
  for (int d = 0; d < 4; ++d) {
    f[static_cast<std::size_t>(d)] += noise.feature_noise_sigma * unit(rng);
  }
  for (int k = 0; k < layout.num_categories; ++k) {
    f[static_cast<std::size_t>(layout.signal_offset() + k)] += noise.score_noise_sigma * kSignalScale / kScoreGain * unit(rng);
  }
  for (int d = 0; d < layout.context_dims(); ++d) {
    const double c = d < static_cast<int>(context.size()) ? context[static_cast<std::size_t>(d)] : 0.0;
    f[static_cast<std::size_t>(layout.context_offset() + d)] += noise.context_sigma * c;
  }
  return f;
}

namespace {

BBox clip_to(const BBox& b, ImageDims dims) {
  return {std::clamp(b.x1, 0.0, dims.width), std::clamp(b.y1, 0.0, dims.height), std::clamp(b.x2, 0.0, dims.width),
          std::clamp(b.y2, 0.0, dims.height)};
}

}  // namespace

std::vector<BBox> sample_proposal_boxes(const Scene& scene, const NoiseConfig& noise, std::mt19937_64& rng) {
  std::vector<BBox> boxes;
  std::normal_distribution<double> unit(0.0, 1.0);
  for (const GroundTruth& g : scene.gts) {
    const double w = g.box.width();
    const double h = g.box.height();
    for (int c = 0; c < noise.copies_per_object; ++c) {
      BBox b = g.box;
      for (int attempt = 0; attempt < 20; ++attempt) {
        const BBox cand = clip_to({g.box.x1 + noise.box_jitter_sigma * w * unit(rng),
                                   g.box.y1 + noise.box_jitter_sigma * h * unit(rng),
                                   g.box.x2 + noise.box_jitter_sigma * w * unit(rng),
                                   g.box.y2 + noise.box_jitter_sigma * h * unit(rng)},
                                  scene.dims);
        if (cand.width() > 0.25 * w && cand.height() > 0.25 * h) {
          b = cand;
          break;
        }
      }
      boxes.push_back(b);
    }
  }
  const double lo = 16.0;
  const double hi = std::max(lo * 1.01, 0.5 * std::min(scene.dims.width, scene.dims.height));
  for (int i = 0; i < noise.background_rate; ++i) {
    const double side = log_uniform(rng, lo, hi);
    const double aspect = log_uniform(rng, 0.5, 2.0);
    const double w = std::min(side * std::sqrt(aspect), scene.dims.width);
    const double h = std::min(side / std::sqrt(aspect), scene.dims.height);
    std::uniform_real_distribution<double> ux(0.0, scene.dims.width - w);
    std::uniform_real_distribution<double> uy(0.0, scene.dims.height - h);
    const double x = ux(rng);
    const double y = uy(rng);
    boxes.push_back({x, y, x + w, y + h});
  }
  return boxes;
}

std::vector<Proposal> encode_proposals(std::span<const BBox> boxes, std::span<const GroundTruth> gts, int scene_id,
                                       const FeatureLayout& layout, const NoiseConfig& noise, std::mt19937_64& rng) {
  const std::vector<double> context = scene_context(scene_id, layout.context_dims());
  const std::vector<ObjectLatent> latents = object_latents(scene_id, gts, layout, noise);
  std::vector<Proposal> out;
  out.reserve(boxes.size());
  for (const BBox& b : boxes) {
    out.push_back({b, encode_feature(b, gts, latents, context, layout, noise, rng)});
  }
  return out;
}

std::vector<Proposal> gen_proposals(const Scene& scene, const FeatureLayout& layout, const NoiseConfig& noise,
                                    std::mt19937_64& rng) {
  const std::vector<BBox> boxes = sample_proposal_boxes(scene, noise, rng);
  return encode_proposals(boxes, scene.gts, scene.id, layout, noise, rng);
}

DetectorParams oracle_params(const FeatureLayout& layout) {
  DetectorParams p(layout.num_categories, layout.dim);
  for (int k = 0; k < layout.num_categories; ++k) {
    p.cls_weight(k, layout.signal_offset() + k) = kScoreGain / kSignalScale;
    p.cls_bias(k) = -0.5 * kScoreGain;
  }
  for (int c = 0; c < 4; ++c) {
    p.reg_weight(c, c) = 1.0;
  }
  return p;
}

DetectorParams initial_params(const FeatureLayout& layout) {
  DetectorParams p(layout.num_categories, layout.dim);
  const double prior = 0.01;
  for (int k = 0; k < layout.num_categories; ++k) {
    p.cls_bias(k) = -std::log((1.0 - prior) / prior);
  }
  return p;
}

std::vector<Detection> detections_from_predictions(std::span<const Prediction> preds, double min_score) {
  std::vector<Detection> dets;
  for (const Prediction& p : preds) {
    for (std::size_t k = 0; k < p.category_probs.size(); ++k) {
      if (p.category_probs[k] >= min_score) {
        dets.push_back({p.regressed_box, static_cast<int>(k), p.category_probs[k]});
      }
    }
  }
  return dets;
}

std::vector<Detection> postprocess(std::span<const Detection> dets, double nms_iou, std::size_t max_dets) {
  const std::vector<PseudoLabel> kept = generate_pseudo_labels(dets, 0.0, nms_iou);
  std::vector<Detection> out;
  for (const PseudoLabel& p : kept) {
    if (out.size() >= max_dets) break;
    out.push_back({p.box, p.category_id, p.score});
  }
  return out;
}

FramedScene frame_scene(const Scene& scene, double scale, bool hflip) {
  FramedScene f;
  f.dims = {scene.dims.width * scale, scene.dims.height * scale};
  for (const GroundTruth& g : scene.gts) {
    f.gts.push_back({transform_box(g.box, scale, hflip, scene.dims.width), g.category_id});
  }
  return f;
}

}  // namespace pseco
