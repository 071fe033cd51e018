#include "pseco/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "pseco/assignment.hpp"
#include "pseco/error.hpp"
#include "pseco/losses.hpp"
#include "pseco/msl.hpp"
#include "pseco/pcv.hpp"
#include "pseco/pseudo_labeling.hpp"
#include "pseco/rng.hpp"

namespace pseco {

Dataset dataset_from_config(const TrainConfig& cfg) {
  DatasetSpec spec;
  spec.seed = cfg.seed;
  spec.n_scenes = cfg.scenes;
  spec.n_categories = cfg.categories;
  spec.labeled_fraction = cfg.labeled_frac;
  spec.n_test_scenes = cfg.test_scenes;
  Dataset ds = gen_dataset(spec);
  ds.noise_preset = cfg.noise_preset;
  return ds;
}

FeatureLayout layout_for(const TrainConfig& cfg, const Dataset& ds) {
  FeatureLayout layout{ds.n_categories, cfg.feature_dim};
  if (layout.context_dims() < 0) {
    throw ConfigError("feature_dim " + std::to_string(cfg.feature_dim) + " is too small for " +
                      std::to_string(ds.n_categories) + " categories (need at least " +
                      std::to_string(layout.context_offset()) + ")");
  }
  return layout;
}

namespace {

struct ViewLoss {
  double cls = 0.0;
  double reg = 0.0;
};

struct ViewData {
  std::vector<Proposal> proposals;
  AssignmentResult assignment;
  std::vector<BBox> gt_boxes;
  std::vector<int> gt_categories;
  std::vector<std::optional<double>> sigmas;
};

/// Focal classification loss over every (proposal, category) pair normalized
/// by the positive count, plus the sigma-weighted L1 regression of positives.
/// Gradients, multiplied by scale, are added to grads.
ViewLoss view_loss(const DetectorParams& params, const ViewData& view, bool regress, const FocalParams& focal,
                   double scale, DetectorParams& grads, std::vector<HeadOutput>* heads_out = nullptr) {
  const std::size_t n = view.proposals.size();
  const auto k_count = static_cast<std::size_t>(params.num_categories());
  std::vector<HeadOutput> heads;
  heads.reserve(n);
  for (const Proposal& p : view.proposals) heads.push_back(head_forward(params, p.feature));

  const double norm = std::max<double>(1.0, static_cast<double>(view.assignment.num_positives()));
  ViewLoss out;
  std::vector<std::vector<double>> dlogits(n, std::vector<double>(k_count, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const ProposalLabel& label = view.assignment.labels[i];
    if (label.kind == LabelKind::ignored) continue;
    const int target = label.is_positive() ? view.gt_categories[static_cast<std::size_t>(label.gt_index)] : -1;
    for (std::size_t k = 0; k < k_count; ++k) {
      const FocalResult r = focal_loss(heads[i].probs[k], static_cast<int>(k) == target, focal);
      out.cls += r.loss;
      dlogits[i][k] = scale * r.grad_logit / norm;
    }
  }
  out.cls /= norm;

  std::vector<BoxDeltas> ddeltas(n, BoxDeltas{});
  if (regress) {
    std::vector<RegressionTerm> terms;
    std::vector<std::size_t> owner;
    for (std::size_t i = 0; i < n; ++i) {
      const ProposalLabel& label = view.assignment.labels[i];
      if (!label.is_positive()) continue;
      RegressionTerm t;
      t.pred = heads[i].deltas;
      t.target = encode_deltas(view.proposals[i].box, view.gt_boxes[static_cast<std::size_t>(label.gt_index)]);
      t.gt_index = label.gt_index;
      terms.push_back(t);
      owner.push_back(i);
    }
    if (!terms.empty()) {
      const RegressionLoss r = weighted_l1_reg(terms, view.sigmas);
      out.reg = r.loss;
      for (std::size_t t = 0; t < terms.size(); ++t) {
        for (std::size_t c = 0; c < 4; ++c) ddeltas[owner[t]][c] = scale * r.grad[t][c];
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    accumulate_gradient(grads, view.proposals[i].feature, dlogits[i], ddeltas[i]);
  }
  if (heads_out) *heads_out = std::move(heads);
  return out;
}

void add_feature_noise(std::vector<Proposal>& proposals, double sigma, std::mt19937_64& rng) {
  if (sigma == 0.0) return;
  std::normal_distribution<double> unit(0.0, 1.0);
  for (Proposal& p : proposals) {
    for (double& v : p.feature) v += sigma * unit(rng);
  }
}

Scene as_scene(const Scene& base, const FramedScene& framed) {
  Scene s;
  s.id = base.id;
  s.dims = framed.dims;
  s.gts = framed.gts;
  s.split = base.split;
  return s;
}

FocalParams focal_of(const TrainConfig& cfg) { return {cfg.focal_alpha, cfg.focal_gamma}; }

struct SupervisedStep {
  double cls = 0.0;
  double reg = 0.0;
};

SupervisedStep supervised_gradient(const DetectorParams& student, const std::vector<const Scene*>& labeled,
                                   const TrainConfig& cfg, const FeatureLayout& layout, const NoiseConfig& noise,
                                   int step, DetectorParams& grads) {
  const auto s = static_cast<std::uint64_t>(step);
  auto pick = make_stream(cfg.seed, "labeled-sample", s);
  std::uniform_int_distribution<std::size_t> which(0, labeled.size() - 1);
  const Scene& scene = *labeled[which(pick)];

  auto aug = make_stream(cfg.seed, "labeled-aug", s);
  const bool flip = std::bernoulli_distribution(cfg.flip_prob)(aug);
  const double scale = sample_resize_ratio(aug, cfg.resize_min, cfg.resize_max);
  const FramedScene framed = frame_scene(scene, scale, flip);

  auto prop_rng = make_stream(cfg.seed, "labeled-proposals", s);
  const std::vector<BBox> boxes = sample_proposal_boxes(as_scene(scene, framed), noise, prop_rng);
  ViewData view;
  view.proposals = encode_proposals(boxes, framed.gts, scene.id, layout, noise, prop_rng);
  auto noise_rng = make_stream(cfg.seed, "labeled-aug-noise", s);
  add_feature_noise(view.proposals, cfg.aug_noise_sigma, noise_rng);

  for (const GroundTruth& g : framed.gts) {
    view.gt_boxes.push_back(g.box);
    view.gt_categories.push_back(g.category_id);
    view.sigmas.emplace_back(1.0);
  }
  view.assignment = iou_assign(boxes, view.gt_boxes, cfg.pos_threshold);
  const ViewLoss l = view_loss(student, view, true, focal_of(cfg), 1.0, grads);
  return {l.cls, l.reg};
}

// Explicit pyramid agreement between the student's class probabilities on V1
// and V2. Adds d(weight * loss)/d logits * scale into grads and returns the loss.
double feature_consistency(const DetectorParams& params, const ViewData& v1, const std::vector<HeadOutput>& h1,
                           ImageDims d1, const ViewData& v2, const std::vector<HeadOutput>& h2, ImageDims d2,
                           double scale, DetectorParams& grads) {
  const int channels = params.num_categories();
  auto entries = [&](const ViewData& v, const std::vector<HeadOutput>& h) {
    std::vector<PyramidEntry> e;
    e.reserve(v.proposals.size());
    for (std::size_t i = 0; i < v.proposals.size(); ++i) e.push_back({v.proposals[i].box, h[i].probs});
    return e;
  };
  const std::vector<PyramidEntry> e1 = entries(v1, h1);
  const std::vector<PyramidEntry> e2 = entries(v2, h2);
  const FeaturePyramid p1 = rasterize_pyramid(d1, channels, e1);
  const FeaturePyramid p2 = rasterize_pyramid(d2, channels, e2);
  const std::vector<AlignedLevelPair> pairs = align_pyramids(p1, p2);
  if (pairs.empty()) return 0.0;
  const double loss = feature_consistency_loss(pairs);

  const double n_pairs = static_cast<double>(pairs.size());
  auto backprop = [&](const ViewData& v, const std::vector<HeadOutput>& h, const FeaturePyramid& own, bool first) {
    for (std::size_t i = 0; i < v.proposals.size(); ++i) {
      const BBox& b = v.proposals[i].box;
      const int level = fpn_level_unclamped(b);
      const AlignedLevelPair* pair = nullptr;
      for (const AlignedLevelPair& p : pairs) {
        if ((first ? p.level_v1 : p.level_v2) == level) pair = &p;
      }
      if (pair == nullptr) continue;
      int cy = 0;
      int cx = 0;
      if (!own.cell_of(level, b.center_x(), b.center_y(), cy, cx)) continue;
      const FeatureGrid& a = *pair->v1;
      const FeatureGrid& c = *pair->v2;
      const double cells = static_cast<double>(a.values.size());
      std::vector<double> dlogits(static_cast<std::size_t>(channels), 0.0);
      for (int k = 0; k < channels; ++k) {
        const double diff = a.at(cy, cx, k) - c.at(cy, cx, k);
        const double dcell = (first ? 2.0 : -2.0) * diff / (cells * n_pairs);
        const double p = h[i].probs[static_cast<std::size_t>(k)];
        dlogits[static_cast<std::size_t>(k)] = scale * dcell * p * (1.0 - p);
      }
      accumulate_gradient(grads, v.proposals[i].feature, dlogits, BoxDeltas{});
    }
  };
  backprop(v1, h1, p1, true);
  backprop(v2, h2, p2, false);
  return loss;
}

struct UnlabeledStats {
  double cls = 0.0;
  double reg = 0.0;
  double feat = 0.0;
  std::size_t positives = 0;
  std::size_t false_positives = 0;
  std::vector<double> sigmas;
  std::vector<double> true_ious;
  std::size_t sharing_violations = 0;
};

bool same_box(const BBox& a, const BBox& b) {
  auto close = [](double x, double y) { return std::abs(x - y) <= 1e-9 * std::max(1.0, std::abs(y)); };
  return close(a.x1, b.x1) && close(a.y1, b.y1) && close(a.x2, b.x2) && close(a.y2, b.y2);
}

double best_same_category_iou(const BBox& box, int category, std::span<const GroundTruth> gts) {
  double best = 0.0;
  for (const GroundTruth& g : gts) {
    if (g.category_id == category) best = std::max(best, iou(box, g.box));
  }
  return best;
}

void unlabeled_gradient(const DetectorParams& student, const DetectorParams& teacher,
                        const std::vector<const Scene*>& unlabeled, const TrainConfig& cfg,
                        const FeatureLayout& layout, const NoiseConfig& noise, int step, int slot,
                        Checksum& checksum, UnlabeledStats& stats, DetectorParams& grads) {
  const auto s = static_cast<std::uint64_t>(step);
  const auto r = static_cast<std::uint64_t>(slot);
  auto pick = make_stream(cfg.seed, "unlabeled-sample", s, r);
  std::uniform_int_distribution<std::size_t> which(0, unlabeled.size() - 1);
  const Scene& scene = *unlabeled[which(pick)];

  // V0: weakly augmented input seen by the teacher.
  auto aug = make_stream(cfg.seed, "weak-aug", s, r);
  const bool flip = std::bernoulli_distribution(cfg.flip_prob)(aug);
  const double v0_scale = sample_resize_ratio(aug, cfg.resize_min, cfg.resize_max);
  const FramedScene v0 = frame_scene(scene, v0_scale, flip);

  auto prop_rng = make_stream(cfg.seed, "unlabeled-proposals", s, r);
  const std::vector<BBox> boxes = sample_proposal_boxes(as_scene(scene, v0), noise, prop_rng);
  const std::vector<Proposal> teacher_props = encode_proposals(boxes, v0.gts, scene.id, layout, noise, prop_rng);
  for (const BBox& b : boxes) {
    checksum.add(b.x1);
    checksum.add(b.y1);
    checksum.add(b.x2);
    checksum.add(b.y2);
  }
  const std::vector<Prediction> teacher_preds = detector_forward(teacher, teacher_props);
  const std::vector<Detection> dets = detections_from_predictions(teacher_preds, cfg.tau);
  std::vector<PseudoLabel> pseudo = generate_pseudo_labels(dets, cfg.tau, cfg.nms_iou);

  std::vector<BBox> pseudo_boxes;
  std::vector<int> pseudo_categories;
  for (const PseudoLabel& p : pseudo) {
    pseudo_boxes.push_back(p.box);
    pseudo_categories.push_back(p.category_id);
  }
  AssignmentResult assignment;
  if (cfg.assigner == AssignerKind::pla) {
    assignment = pla_assign(boxes, teacher_preds, pseudo, {cfg.t_bag, cfg.alpha, cfg.dynamic_k, 10});
  } else {
    assignment = iou_assign(boxes, pseudo_boxes, cfg.pos_threshold);
  }
  pseudo = attach_sigma(pseudo, assignment, teacher_preds);

  const AssignmentQuality q = assignment_quality(assignment, boxes, pseudo_categories, v0.gts);
  stats.positives += q.positives;
  stats.false_positives += q.false_positives;
  for (const PseudoLabel& p : pseudo) {
    if (!p.sigma) continue;
    stats.sigmas.push_back(*p.sigma);
    stats.true_ious.push_back(best_same_category_iou(p.box, p.category_id, v0.gts));
  }

  // Student views V1 (resized) and V2 (V1 downsampled) share the teacher's proposals.
  auto view_rng = make_stream(cfg.seed, "views", s, r);
  ViewSpec spec;
  spec.resize_ratio = sample_resize_ratio(view_rng, cfg.resize_min, cfg.resize_max);
  spec.downsample_factor = cfg.downsample_factor;
  spec.hflip = false;
  const ViewPair pseudo_views = make_views(v0.dims, pseudo_boxes, spec);


  const int n_views = cfg.views == ViewMode::v1v2 ? 2 : 1;
  const double scale = 1.0 / (cfg.unlabeled_ratio * n_views);
  const bool regress = cfg.unsup_reg == UnsupReg::pcv;

  ViewData views[2];
  ImageDims dims[2];
  std::vector<HeadOutput> heads[2];
  for (int v = 0; v < n_views; ++v) {
    const View& pv = v == 0 ? pseudo_views.v1 : pseudo_views.v2;
    dims[v] = pv.dims;

    std::vector<BBox> view_boxes;
    view_boxes.reserve(boxes.size());
    for (const BBox& b : boxes) {
      const BBox b1 = to_view1(b, v0.dims, spec);
      view_boxes.push_back(v == 0 ? b1 : to_view2(b1, spec));
    }
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      const double back = v == 0 ? 1.0 / spec.resize_ratio : spec.downsample_factor / spec.resize_ratio;
      if (!same_box(transform_box(view_boxes[i], back, false, pv.dims.width), boxes[i])) {
        ++stats.sharing_violations;
      }
    }

    std::vector<GroundTruth> latent;
    for (const GroundTruth& g : v0.gts) {
      const BBox b1 = to_view1(g.box, v0.dims, spec);
      latent.push_back({v == 0 ? b1 : to_view2(b1, spec), g.category_id});
    }

    ViewData& view = views[v];
    auto feat_rng = make_stream(cfg.seed, "student-features", s, r * 2 + static_cast<std::uint64_t>(v));
    view.proposals = encode_proposals(view_boxes, latent, scene.id, layout, noise, feat_rng);
    add_feature_noise(view.proposals, cfg.aug_noise_sigma, feat_rng);

    // Pseudo boxes that vanished in this view leave their positives ignored.
    std::vector<int> remap(pseudo.size(), -1);
    for (std::size_t j = 0; j < pv.boxes.size(); ++j) {
      const std::size_t src = pv.source_index[j];
      remap[src] = static_cast<int>(j);
      view.gt_boxes.push_back(pv.boxes[j]);
      view.gt_categories.push_back(pseudo[src].category_id);
      view.sigmas.push_back(pseudo[src].sigma);
    }
    view.assignment.labels = assignment.labels;
    view.assignment.positives_per_gt.assign(pv.boxes.size(), 0);
    for (ProposalLabel& label : view.assignment.labels) {
      if (!label.is_positive()) continue;
      const int mapped = remap[static_cast<std::size_t>(label.gt_index)];
      if (mapped < 0) {
        label = {LabelKind::ignored, -1};
      } else {
        label.gt_index = mapped;
        ++view.assignment.positives_per_gt[static_cast<std::size_t>(mapped)];
      }
    }

    const ViewLoss l = view_loss(student, view, regress, focal_of(cfg), scale, grads, &heads[v]);
    stats.cls += l.cls * scale;
    stats.reg += l.reg * scale;
  }

  if (cfg.feat_consistency_weight > 0.0 && n_views == 2) {
    const double w = cfg.feat_consistency_weight;
    const double per_slot = 1.0 / cfg.unlabeled_ratio;
    stats.feat += w * per_slot *
                  feature_consistency(student, views[0], heads[0], dims[0], views[1], heads[1], dims[1],
                                      w * per_slot, grads);
  }
}

void check_dataset(const Dataset& ds, bool need_unlabeled) {
  if (ds.with_split(Split::labeled).empty()) {
    throw InvalidInput("dataset has no labeled scenes");
  }
  if (need_unlabeled && ds.with_split(Split::unlabeled).empty()) {
    throw InvalidInput("dataset has no unlabeled scenes");
  }
}

TrainResult run(const TrainConfig& cfg, const Dataset& ds, bool semi, const MetricsSink& sink) {
  validate(cfg);
  check_dataset(ds, semi);
  const FeatureLayout layout = layout_for(cfg, ds);
  const NoiseConfig noise = noise_preset(cfg.noise_preset);
  const std::vector<const Scene*> labeled = ds.with_split(Split::labeled);
  const std::vector<const Scene*> unlabeled = ds.with_split(Split::unlabeled);
  const bool has_test = !ds.with_split(Split::test).empty();

  TrainResult result;
  result.student = initial_params(layout);
  result.teacher = result.student;
  Checksum checksum;

  std::size_t window_pos = 0;
  std::size_t window_fp = 0;
  std::vector<double> window_sigma;
  std::vector<double> window_iou;

  for (int step = 0; step < cfg.steps; ++step) {
    DetectorParams sup_grads(layout.num_categories, layout.dim);
    const SupervisedStep sup = supervised_gradient(result.student, labeled, cfg, layout, noise, step, sup_grads);

    UnlabeledStats un;
    DetectorParams grads = sup_grads;
    if (semi && step >= cfg.burn_in_steps) {
      DetectorParams unsup_grads(layout.num_categories, layout.dim);
      for (int slot = 0; slot < cfg.unlabeled_ratio; ++slot) {
        unlabeled_gradient(result.student, result.teacher, unlabeled, cfg, layout, noise, step, slot, checksum, un,
                           unsup_grads);
      }
      grads = axpy(sup_grads, unsup_grads, cfg.beta);
      result.proposal_sharing_violations += un.sharing_violations;
      window_pos += un.positives;
      window_fp += un.false_positives;
      window_sigma.insert(window_sigma.end(), un.sigmas.begin(), un.sigmas.end());
      window_iou.insert(window_iou.end(), un.true_ious.begin(), un.true_ious.end());
    }

    result.student = sgd_step(result.student, grads, learning_rate(cfg, step));
    result.teacher = step < cfg.burn_in_steps ? result.student
                                              : ema_update(result.teacher, result.student, cfg.ema_momentum);

    MetricsRow row;
    row.step = step + 1;
    row.loss = LossReport::make(sup.cls, sup.reg, un.cls, un.reg, un.feat, semi ? cfg.beta : 0.0);
    const bool eval_now = (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0) || step + 1 == cfg.steps;
    if (eval_now) {
      if (has_test) {
        row.map = evaluate_params(result.teacher, ds, cfg).map;
        if (step + 1 == cfg.steps) result.final_map = row.map;
      }
      if (semi && step >= cfg.burn_in_steps) {
        row.fp_rate = window_pos ? static_cast<double>(window_fp) / static_cast<double>(window_pos) : 0.0;
        if (window_sigma.size() >= 2) {
          try {
            row.sigma_pearson = pearson(window_sigma, window_iou);
          } catch (const InvalidInput&) {
            row.sigma_pearson.reset();
          }
        }
      }
      window_pos = 0;
      window_fp = 0;
      window_sigma.clear();
      window_iou.clear();
    }
    if (sink) sink(row);
    result.metrics.push_back(row);
  }
  result.proposal_checksum = checksum.value();
  return result;
}

}  // namespace

TrainResult train_supervised(const TrainConfig& cfg, const Dataset& ds, const MetricsSink& sink) {
  return run(cfg, ds, false, sink);
}

TrainResult train_pseco(const TrainConfig& cfg, const Dataset& ds, const MetricsSink& sink) {
  return run(cfg, ds, true, sink);
}

APResult evaluate_params(const DetectorParams& params, const Dataset& ds, const TrainConfig& cfg) {
  const std::vector<const Scene*> test = ds.with_split(Split::test);
  if (test.empty()) {
    throw InvalidInput("dataset has no test scenes to evaluate on");
  }
  const FeatureLayout layout = layout_for(cfg, ds);
  if (params.num_categories() != layout.num_categories || params.feature_dim() != layout.dim) {
    throw InvalidInput("params shape (" + std::to_string(params.num_categories()) + " categories, " +
                       std::to_string(params.feature_dim()) + " dims) does not match the dataset and config");
  }
  const NoiseConfig noise = noise_preset(cfg.noise_preset);
  std::vector<ImageEval> images;
  images.reserve(test.size());
  for (const Scene* scene : test) {
    auto rng = make_stream(cfg.seed, "eval-proposals", static_cast<std::uint64_t>(scene->id));
    const std::vector<Proposal> props = gen_proposals(*scene, layout, noise, rng);
    const std::vector<Prediction> preds = detector_forward(params, props);
    const std::vector<Detection> raw = detections_from_predictions(preds, cfg.eval_min_score);
    images.push_back({postprocess(raw, cfg.nms_iou, static_cast<std::size_t>(cfg.max_dets)), scene->gts});
  }
  return average_precision(images);
}

}  // namespace pseco
