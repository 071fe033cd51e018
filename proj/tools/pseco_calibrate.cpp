#include <chrono>
#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "pseco/analysis.hpp"
#include "pseco/config.hpp"
#include "pseco/simulator.hpp"
#include "pseco/trainer.hpp"

using namespace pseco;

namespace {

void report_pseudo(const NoiseConfig& noise, const TrainConfig& cfg, int scenes) {
  DatasetSpec spec;
  spec.seed = cfg.seed;
  spec.n_scenes = scenes;
  spec.n_categories = cfg.categories;
  spec.labeled_fraction = 1.0;
  const Dataset ds = gen_dataset(spec);
  std::vector<const Scene*> all;
  for (const Scene& s : ds.scenes) all.push_back(&s);
  const FeatureLayout layout{cfg.categories, cfg.feature_dim};
  const std::vector<double> thresholds = default_precision_thresholds();
  const PseudoAnalysis a = analyze_pseudo_labels(oracle_params(layout), all, cfg, noise, thresholds);
  std::vector<double> xs;
  std::vector<double> ys;
  for (const SigmaSample& s : a.sigma_samples) {
    xs.push_back(s.sigma);
    ys.push_back(s.true_iou);
  }
  std::printf("pseudo=%zu coarse=%.3f prec@0.3=%.3f prec@0.9=%.3f fp_pla=%.4f fp_iou=%.4f pearson=%.3f (n=%zu)\n",
              a.n_pseudo, a.coarse_fraction, a.precision.front().precision, a.precision[12].precision,
              a.pla_quality.false_positive_rate, a.iou_quality.false_positive_rate,
              xs.size() >= 2 ? pearson(xs, ys) : 0.0, xs.size());
}

void report_training(const TrainConfig& cfg) {
  const Dataset ds = dataset_from_config(cfg);
  auto t0 = std::chrono::steady_clock::now();
  const TrainResult sup = train_supervised(cfg, ds);
  auto t1 = std::chrono::steady_clock::now();
  const TrainResult semi = train_pseco(cfg, ds);
  auto t2 = std::chrono::steady_clock::now();
  TrainConfig off = cfg;
  off.unsup_reg = UnsupReg::off;
  const TrainResult no_reg = train_pseco(off, ds);
  auto t3 = std::chrono::steady_clock::now();
  auto secs = [](auto a, auto b) { return std::chrono::duration<double>(b - a).count(); };
  auto series = [](const TrainResult& r) {
    std::string s;
    for (const MetricsRow& row : r.metrics) {
      if (row.map) s += " " + std::to_string(*row.map).substr(0, 6);
    }
    return s;
  };
  std::printf("supervised map=%.4f (%.1fs):%s\n", sup.final_map.value_or(-1), secs(t0, t1), series(sup).c_str());
  std::printf("pseco      map=%.4f (%.1fs):%s\n", semi.final_map.value_or(-1), secs(t1, t2), series(semi).c_str());
  std::printf("pseco off  map=%.4f (%.1fs):%s\n", no_reg.final_map.value_or(-1), secs(t2, t3),
              series(no_reg).c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calibrate the synthetic noise preset and training schedule"};
  std::string preset = "coco-like";
  std::string config_path;
  int scenes = 500;
  bool train = false;
  double jitter = -1;
  double score = -1;
  double feature = -1;
  int background = -1;
  double context = -1;
  app.add_option("--preset", preset);
  app.add_option("--config", config_path);
  app.add_option("--scenes", scenes);
  app.add_flag("--train", train);
  app.add_option("--jitter", jitter);
  app.add_option("--score-noise", score);
  app.add_option("--feature-noise", feature);
  app.add_option("--background", background);
  app.add_option("--context", context);
  CLI11_PARSE(app, argc, argv);

  TrainConfig cfg = config_path.empty() ? TrainConfig{} : load_config(config_path);
  NoiseConfig noise = noise_preset(preset);
  if (jitter >= 0) noise.box_jitter_sigma = jitter;
  if (score >= 0) noise.score_noise_sigma = score;
  if (feature >= 0) noise.feature_noise_sigma = feature;
  if (background >= 0) noise.background_rate = background;
  if (context >= 0) noise.context_sigma = context;
  report_pseudo(noise, cfg, scenes);
  if (train) report_training(cfg);
  return 0;
}
