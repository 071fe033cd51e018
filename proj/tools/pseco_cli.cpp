#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pseco/analysis.hpp"
#include "pseco/config.hpp"
#include "pseco/error.hpp"
#include "pseco/io.hpp"
#include "pseco/trainer.hpp"

using namespace pseco;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

TrainConfig resolve_config(const std::string& path, std::optional<std::uint64_t> seed) {
  TrainConfig cfg = path.empty() ? TrainConfig{} : load_config(path);
  if (seed) cfg.seed = *seed;
  validate(cfg);
  return cfg;
}

// A dataset generated under a named preset keeps drawing proposals from it.
Dataset resolve_dataset(const std::string& path, TrainConfig& cfg) {
  if (path.empty()) return dataset_from_config(cfg);
  Dataset ds = load_dataset(path);
  if (!ds.noise_preset.empty()) cfg.noise_preset = ds.noise_preset;
  validate(cfg);
  return ds;
}

std::vector<const Scene*> analysis_scenes(const Dataset& ds) {
  std::vector<const Scene*> out;
  for (const Scene& s : ds.scenes) {
    if (s.split != Split::test) out.push_back(&s);
  }
  if (out.empty()) throw DataError("dataset has no training scenes to analyze");
  return out;
}

void check_categories(const DetectorParams& params, const Dataset& ds) {
  if (params.num_categories() != ds.n_categories) {
    throw DataError("params have " + std::to_string(params.num_categories()) + " categories, dataset has " +
                    std::to_string(ds.n_categories));
  }
}

struct GenDataArgs {
  std::uint64_t seed = 0;
  int scenes = 300;
  int categories = 4;
  double labeled_frac = 0.1;
  int test_scenes = 200;
  std::string noise_preset = "default";
  std::string out;
};

int run_gen_data(const GenDataArgs& a) {
  if (a.scenes < 1) throw ConfigError("--scenes must be positive");
  if (a.categories < 1) throw ConfigError("--categories must be positive");
  if (a.labeled_frac < 0.0 || a.labeled_frac > 1.0) throw ConfigError("--labeled-frac must lie in [0, 1]");
  if (a.test_scenes < 0) throw ConfigError("--test-scenes must be non-negative");
  const std::vector<std::string> presets = noise_preset_names();
  if (std::find(presets.begin(), presets.end(), a.noise_preset) == presets.end()) {
    throw ConfigError("unknown noise preset '" + a.noise_preset + "'");
  }
  DatasetSpec spec;
  spec.seed = a.seed;
  spec.n_scenes = a.scenes;
  spec.n_categories = a.categories;
  spec.labeled_fraction = a.labeled_frac;
  spec.n_test_scenes = a.test_scenes;
  Dataset ds = gen_dataset(spec);
  ds.noise_preset = a.noise_preset;
  save_dataset(ds, a.out);
  std::printf("wrote %zu scenes to %s\n", ds.scenes.size(), a.out.c_str());
  return kExitOk;
}

struct TrainArgs {
  std::string config;
  std::string data;
  std::string mode = "pseco";
  std::string metrics;
  std::string params_out;
  std::optional<std::uint64_t> seed;
};

int run_train(const TrainArgs& a) {
  TrainConfig cfg = resolve_config(a.config, a.seed);
  const Dataset ds = resolve_dataset(a.data, cfg);
  std::optional<MetricsWriter> writer;
  if (!a.metrics.empty()) {
    std::filesystem::remove(a.metrics);
    writer.emplace(a.metrics);
  }
  MetricsSink sink;
  if (writer) sink = [&writer](const MetricsRow& row) { writer->write(row); };
  const TrainResult r = a.mode == "supervised" ? train_supervised(cfg, ds, sink) : train_pseco(cfg, ds, sink);
  if (!a.params_out.empty()) save_params(r.teacher, a.params_out);
  if (r.final_map) {
    std::printf("mode=%s steps=%d final_map=%s\n", a.mode.c_str(), cfg.steps, format_number(*r.final_map).c_str());
  } else {
    std::printf("mode=%s steps=%d (no test split)\n", a.mode.c_str(), cfg.steps);
  }
  return kExitOk;
}

struct EvalArgs {
  std::string config;
  std::string params;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int run_eval(const EvalArgs& a) {
  TrainConfig cfg = resolve_config(a.config, a.seed);
  const Dataset ds = resolve_dataset(a.data, cfg);
  const DetectorParams params = load_params(a.params);
  check_categories(params, ds);
  if (ds.with_split(Split::test).empty()) throw DataError("dataset has no test scenes");
  const APResult r = evaluate_params(params, ds, cfg);
  open_output(a.out) << ap_result_to_json(r) << "\n";
  std::printf("map=%s\n", format_number(r.map).c_str());
  return kExitOk;
}

struct AnalyzeArgs {
  std::string config;
  std::string params;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
};

PseudoAnalysis analyze(const AnalyzeArgs& a) {
  TrainConfig cfg = resolve_config(a.config, a.seed);
  const Dataset ds = resolve_dataset(a.data, cfg);
  const DetectorParams params = load_params(a.params);
  check_categories(params, ds);
  const std::vector<const Scene*> scenes = analysis_scenes(ds);
  const std::vector<double> thresholds = default_precision_thresholds();
  return analyze_pseudo_labels(params, scenes, cfg, noise_preset(cfg.noise_preset), thresholds);
}

int run_analyze_pseudo(const AnalyzeArgs& a) {
  const PseudoAnalysis r = analyze(a);
  std::ofstream out = open_output(a.out);
  out << "iou_threshold,precision\n";
  for (const PrecisionPoint& p : r.precision) {
    out << format_number(p.threshold) << "," << format_number(p.precision) << "\n";
  }
  std::printf("pseudo_boxes=%zu coarse_fraction=%s fp_rate_pla=%s fp_rate_iou=%s\n", r.n_pseudo,
              format_number(r.coarse_fraction).c_str(), format_number(r.pla_quality.false_positive_rate).c_str(),
              format_number(r.iou_quality.false_positive_rate).c_str());
  return kExitOk;
}

int run_analyze_pcv(const AnalyzeArgs& a) {
  const PseudoAnalysis r = analyze(a);
  std::ofstream out = open_output(a.out);
  out << "scene_id,sigma,true_iou,n_positives\n";
  std::vector<double> sigmas;
  std::vector<double> ious;
  for (const SigmaSample& s : r.sigma_samples) {
    out << s.scene_id << "," << format_number(s.sigma) << "," << format_number(s.true_iou) << "," << s.n_positives
        << "\n";
    sigmas.push_back(s.sigma);
    ious.push_back(s.true_iou);
  }
  if (sigmas.size() >= 2) {
    std::printf("samples=%zu pearson=%s\n", sigmas.size(), format_number(pearson(sigmas, ious)).c_str());
  } else {
    std::printf("samples=%zu pearson=undefined\n", sigmas.size());
  }
  return kExitOk;
}

struct AblateArgs {
  std::string config;
  std::string data;
  std::string axis;
  std::string out;
  std::optional<std::uint64_t> seed;
};

struct AblationRow {
  std::string value;
  TrainConfig cfg;
};

std::vector<AblationRow> ablation_rows(const TrainConfig& base, const std::string& axis) {
  std::vector<AblationRow> rows;
  auto add = [&](std::string value, auto&& edit) {
    TrainConfig c = base;
    edit(c);
    rows.push_back({std::move(value), c});
  };
  if (axis == "alpha") {
    for (double v : {0.0, 0.5, 1.0}) add(format_number(v), [v](TrainConfig& c) { c.alpha = v; });
  } else if (axis == "t_bag") {
    for (double v : {0.3, 0.4, 0.5}) add(format_number(v), [v](TrainConfig& c) { c.t_bag = v; });
  } else if (axis == "unsup_reg") {
    add("off", [](TrainConfig& c) { c.unsup_reg = UnsupReg::off; });
    add("pcv", [](TrainConfig& c) { c.unsup_reg = UnsupReg::pcv; });
  } else if (axis == "msl") {
    add("single_scale", [](TrainConfig& c) {
      c.views = ViewMode::v1;
      c.resize_min = 1.0;
      c.resize_max = 1.0;
      c.feat_consistency_weight = 0.0;
    });
    add("label_consistency", [](TrainConfig& c) {
      c.views = ViewMode::v1;
      c.feat_consistency_weight = 0.0;
    });
    add("multi_view", [](TrainConfig& c) {
      c.views = ViewMode::v1v2;
      c.feat_consistency_weight = 0.0;
    });
    add("feature_consistency", [](TrainConfig& c) {
      c.views = ViewMode::v1v2;
      if (c.feat_consistency_weight == 0.0) c.feat_consistency_weight = 1.0;
    });
  } else {
    throw ConfigError("unknown ablation axis '" + axis + "'");
  }
  return rows;
}

int run_ablate(const AblateArgs& a) {
  TrainConfig cfg = resolve_config(a.config, a.seed);
  const Dataset ds = resolve_dataset(a.data, cfg);
  const std::vector<AblationRow> rows = ablation_rows(cfg, a.axis);
  std::ofstream out = open_output(a.out);
  out << "axis,value,map\n";
  for (const AblationRow& row : rows) {
    validate(row.cfg);
    const TrainResult r = train_pseco(row.cfg, ds);
    const std::string map = r.final_map ? format_number(*r.final_map) : "";
    out << a.axis << "," << row.value << "," << map << "\n";
    out.flush();
    std::printf("%s=%s map=%s\n", a.axis.c_str(), row.value.c_str(), map.c_str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PseCo semi-supervised detection toolkit on synthetic scenes"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("--scenes", gen.scenes, "training scenes");
  gen_cmd->add_option("--categories", gen.categories);
  gen_cmd->add_option("--labeled-frac", gen.labeled_frac);
  gen_cmd->add_option("--test-scenes", gen.test_scenes);
  gen_cmd->add_option("--noise-preset", gen.noise_preset);
  gen_cmd->add_option("--out", gen.out)->required();

  TrainArgs train;
  std::uint64_t train_seed = 0;
  auto* train_cmd = app.add_subcommand("train", "Train a detector and log metrics");
  train_cmd->add_option("--config", train.config);
  train_cmd->add_option("--data", train.data, "dataset JSON; generated from the config when omitted");
  train_cmd->add_option("--mode", train.mode)->check(CLI::IsMember({"supervised", "pseco"}));
  train_cmd->add_option("--metrics", train.metrics, "metrics CSV");
  train_cmd->add_option("--params-out", train.params_out, "teacher parameters JSON");
  auto* train_seed_opt = train_cmd->add_option("--seed", train_seed);

  EvalArgs eval;
  std::uint64_t eval_seed = 0;
  auto* eval_cmd = app.add_subcommand("eval", "COCO-style mAP of parameters on the test split");
  eval_cmd->add_option("--config", eval.config);
  eval_cmd->add_option("--params", eval.params)->required();
  eval_cmd->add_option("--data", eval.data)->required();
  eval_cmd->add_option("--out", eval.out)->required();
  auto* eval_seed_opt = eval_cmd->add_option("--seed", eval_seed);

  AnalyzeArgs pseudo;
  std::uint64_t pseudo_seed = 0;
  auto* pseudo_cmd = app.add_subcommand("analyze-pseudo", "Pseudo-box precision against IoU threshold");
  pseudo_cmd->add_option("--config", pseudo.config);
  pseudo_cmd->add_option("--params", pseudo.params)->required();
  pseudo_cmd->add_option("--data", pseudo.data)->required();
  pseudo_cmd->add_option("--out", pseudo.out)->required();
  auto* pseudo_seed_opt = pseudo_cmd->add_option("--seed", pseudo_seed);

  AnalyzeArgs pcv;
  std::uint64_t pcv_seed = 0;
  auto* pcv_cmd = app.add_subcommand("analyze-pcv", "Consistency score against true IoU per pseudo box");
  pcv_cmd->add_option("--config", pcv.config);
  pcv_cmd->add_option("--params", pcv.params)->required();
  pcv_cmd->add_option("--data", pcv.data)->required();
  pcv_cmd->add_option("--out", pcv.out)->required();
  auto* pcv_seed_opt = pcv_cmd->add_option("--seed", pcv_seed);

  AblateArgs ablate;
  std::uint64_t ablate_seed = 0;
  auto* ablate_cmd = app.add_subcommand("ablate", "Final mAP across one ablation axis");
  ablate_cmd->add_option("--config", ablate.config);
  ablate_cmd->add_option("--data", ablate.data);
  ablate_cmd->add_option("--axis", ablate.axis)->required()->check(
      CLI::IsMember({"alpha", "t_bag", "unsup_reg", "msl"}));
  ablate_cmd->add_option("--out", ablate.out)->required();
  auto* ablate_seed_opt = ablate_cmd->add_option("--seed", ablate_seed);

  std::string oracle_out;
  int oracle_categories = 4;
  int oracle_dim = kDefaultFeatureDim;
  auto* oracle_cmd = app.add_subcommand("oracle-params", "Write the simulator's exact inverse head");
  oracle_cmd->add_option("--categories", oracle_categories);
  oracle_cmd->add_option("--feature-dim", oracle_dim);
  oracle_cmd->add_option("--out", oracle_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  auto seed_of = [](const CLI::Option* opt, std::uint64_t v) {
    return opt->count() > 0 ? std::optional<std::uint64_t>(v) : std::nullopt;
  };

  try {
    if (*gen_cmd) return run_gen_data(gen);
    if (*train_cmd) {
      train.seed = seed_of(train_seed_opt, train_seed);
      return run_train(train);
    }
    if (*eval_cmd) {
      eval.seed = seed_of(eval_seed_opt, eval_seed);
      return run_eval(eval);
    }
    if (*pseudo_cmd) {
      pseudo.seed = seed_of(pseudo_seed_opt, pseudo_seed);
      return run_analyze_pseudo(pseudo);
    }
    if (*pcv_cmd) {
      pcv.seed = seed_of(pcv_seed_opt, pcv_seed);
      return run_analyze_pcv(pcv);
    }
    if (*ablate_cmd) {
      ablate.seed = seed_of(ablate_seed_opt, ablate_seed);
      return run_ablate(ablate);
    }
    if (*oracle_cmd) {
      const FeatureLayout layout{oracle_categories, oracle_dim};
      if (oracle_categories < 1 || layout.context_dims() < 0) {
        throw ConfigError("--feature-dim must be at least 4 + categories");
      }
      save_params(oracle_params(layout), oracle_out);
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const InvalidInput& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitOther;
}
