#include "pseco/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include "toml.hpp"

#include "pseco/error.hpp"
#include "pseco/simulator.hpp"

namespace pseco {

std::string to_string(UnsupReg v) { return v == UnsupReg::off ? "off" : "pcv"; }
std::string to_string(AssignerKind v) { return v == AssignerKind::pla ? "pla" : "iou"; }
std::string to_string(ViewMode v) { return v == ViewMode::v1 ? "v1" : "v1v2"; }
std::string to_string(LrSchedule v) { return v == LrSchedule::constant ? "constant" : "cosine"; }
std::string to_string(DynamicKMode v) {
  switch (v) {
    case DynamicKMode::whole_bag:
      return "bag";
    case DynamicKMode::top_q:
      return "top_q";
    case DynamicKMode::all:
      return "all";
  }
  return "bag";
}

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

bool unit(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

double learning_rate(const TrainConfig& cfg, int step) {
  if (cfg.lr_schedule == LrSchedule::constant || cfg.steps <= 0) return cfg.lr;
  const double progress = static_cast<double>(step) / static_cast<double>(cfg.steps);
  return 0.5 * cfg.lr * (1.0 + std::cos(M_PI * progress));
}

void validate(const TrainConfig& c) {
  require(unit(c.tau), "tau must lie in [0, 1]");
  require(c.beta >= 0.0 && std::isfinite(c.beta), "beta must be non-negative");
  require(unit(c.alpha), "alpha must lie in [0, 1]");
  require(c.t_bag > 0.0 && c.t_bag < 1.0, "t_bag must lie in (0, 1)");
  require(c.pos_threshold > 0.0 && c.pos_threshold < 1.0, "pos_threshold must lie in (0, 1)");
  require(unit(c.ema_momentum), "ema_momentum must lie in [0, 1]");
  require(c.burn_in_steps >= 0, "burn_in_steps must be non-negative");
  require(c.unlabeled_ratio >= 1, "unlabeled_ratio must be a positive integer");
  require(c.resize_min > 0.0 && c.resize_min <= c.resize_max && std::isfinite(c.resize_max),
          "resize_range must satisfy 0 < lo <= hi");
  require(c.downsample_factor >= 2 && c.downsample_factor % 2 == 0,
          "downsample_factor must be a positive even integer");
  require(c.feat_consistency_weight >= 0.0, "feat_consistency_weight must be non-negative");
  require(c.lr > 0.0 && std::isfinite(c.lr), "lr must be positive");
  require(c.steps >= 0, "steps must be non-negative");
  const std::vector<std::string> presets = noise_preset_names();
  require(std::find(presets.begin(), presets.end(), c.noise_preset) != presets.end(),
          "noise_preset must name a known preset");
  require(unit(c.nms_iou), "nms_iou must lie in [0, 1]");
  require(unit(c.focal_alpha), "focal_alpha must lie in [0, 1]");
  require(c.focal_gamma >= 0.0, "focal_gamma must be non-negative");
  require(unit(c.flip_prob), "flip_prob must lie in [0, 1]");
  require(c.aug_noise_sigma >= 0.0, "aug_noise_sigma must be non-negative");
  require(c.eval_every >= 1, "eval_every must be positive");
  require(unit(c.eval_min_score), "eval_min_score must lie in [0, 1]");
  require(c.max_dets >= 1, "max_dets must be positive");
  require(c.scenes >= 1, "scenes must be positive");
  require(c.categories >= 1, "categories must be positive");
  require(c.labeled_frac > 0.0 && c.labeled_frac <= 1.0, "labeled_frac must lie in (0, 1]");
  require(c.test_scenes >= 0, "test_scenes must be non-negative");
  require(c.feature_dim >= 4 + c.categories, "feature_dim must be at least 4 + categories");
}

namespace {

double as_double(const toml::node& n, const std::string& key) {
  if (auto v = n.value_exact<double>()) return *v;
  if (auto v = n.value_exact<int64_t>()) return static_cast<double>(*v);
  throw ConfigError("config key '" + key + "' must be a number");
}

int as_int(const toml::node& n, const std::string& key) {
  if (auto v = n.value_exact<int64_t>()) {
    if (*v < INT32_MIN || *v > INT32_MAX) throw ConfigError("config key '" + key + "' out of range");
    return static_cast<int>(*v);
  }
  throw ConfigError("config key '" + key + "' must be an integer");
}

std::string as_string(const toml::node& n, const std::string& key) {
  if (auto v = n.value_exact<std::string>()) return *v;
  throw ConfigError("config key '" + key + "' must be a string");
}

template <typename E>
E as_enum(const toml::node& n, const std::string& key, const std::map<std::string, E>& choices) {
  const std::string s = as_string(n, key);
  auto it = choices.find(s);
  if (it == choices.end()) {
    std::string allowed;
    for (const auto& [name, value] : choices) allowed += (allowed.empty() ? "" : "|") + name;
    throw ConfigError("config key '" + key + "' must be one of " + allowed + ", got '" + s + "'");
  }
  return it->second;
}

using Setter = std::function<void(TrainConfig&, const toml::node&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto dbl = [&t](const char* name, double TrainConfig::*field) {
      t[name] = [field](TrainConfig& c, const toml::node& n, const std::string& k) { c.*field = as_double(n, k); };
    };
    auto integer = [&t](const char* name, int TrainConfig::*field) {
      t[name] = [field](TrainConfig& c, const toml::node& n, const std::string& k) { c.*field = as_int(n, k); };
    };
    dbl("tau", &TrainConfig::tau);
    dbl("beta", &TrainConfig::beta);
    dbl("alpha", &TrainConfig::alpha);
    dbl("t_bag", &TrainConfig::t_bag);
    dbl("pos_threshold", &TrainConfig::pos_threshold);
    dbl("ema_momentum", &TrainConfig::ema_momentum);
    integer("burn_in_steps", &TrainConfig::burn_in_steps);
    integer("unlabeled_ratio", &TrainConfig::unlabeled_ratio);
    integer("downsample_factor", &TrainConfig::downsample_factor);
    dbl("feat_consistency_weight", &TrainConfig::feat_consistency_weight);
    dbl("lr", &TrainConfig::lr);
    integer("steps", &TrainConfig::steps);
    dbl("nms_iou", &TrainConfig::nms_iou);
    dbl("focal_alpha", &TrainConfig::focal_alpha);
    dbl("focal_gamma", &TrainConfig::focal_gamma);
    dbl("flip_prob", &TrainConfig::flip_prob);
    dbl("aug_noise_sigma", &TrainConfig::aug_noise_sigma);
    integer("eval_every", &TrainConfig::eval_every);
    dbl("eval_min_score", &TrainConfig::eval_min_score);
    integer("max_dets", &TrainConfig::max_dets);
    integer("scenes", &TrainConfig::scenes);
    integer("categories", &TrainConfig::categories);
    dbl("labeled_frac", &TrainConfig::labeled_frac);
    integer("test_scenes", &TrainConfig::test_scenes);
    integer("feature_dim", &TrainConfig::feature_dim);

    t["seed"] = [](TrainConfig& c, const toml::node& n, const std::string& k) {
      auto v = n.value_exact<int64_t>();
      if (!v || *v < 0) throw ConfigError("config key '" + k + "' must be a non-negative integer");
      c.seed = static_cast<std::uint64_t>(*v);
    };
    t["noise_preset"] = [](TrainConfig& c, const toml::node& n, const std::string& k) {
      c.noise_preset = as_string(n, k);
    };
    t["resize_range"] = [](TrainConfig& c, const toml::node& n, const std::string& k) {
      const toml::array* arr = n.as_array();
      if (!arr || arr->size() != 2) throw ConfigError("config key '" + k + "' must be a two-element array");
      c.resize_min = as_double(*arr->get(0), k);
      c.resize_max = as_double(*arr->get(1), k);
    };
    t["unsup_reg"] = [](TrainConfig& c, const toml::node& n, const std::string& k) {
      c.unsup_reg = as_enum<UnsupReg>(n, k, {{"off", UnsupReg::off}, {"pcv", UnsupReg::pcv}});
    };
    t["assigner"] = [](TrainConfig& c, const toml::node& n, const std::string& k) {
      c.assigner = as_enum<AssignerKind>(n, k, {{"pla", AssignerKind::pla}, {"iou", AssignerKind::iou}});
    };
    t["views"] = [](TrainConfig& c, const toml::node& n, const std::string& k) {
      c.views = as_enum<ViewMode>(n, k, {{"v1", ViewMode::v1}, {"v1v2", ViewMode::v1v2}});
    };
    t["lr_schedule"] = [](TrainConfig& c, const toml::node& n, const std::string& k) {
      c.lr_schedule = as_enum<LrSchedule>(n, k, {{"constant", LrSchedule::constant}, {"cosine", LrSchedule::cosine}});
    };
    t["dynamic_k"] = [](TrainConfig& c, const toml::node& n, const std::string& k) {
      c.dynamic_k = as_enum<DynamicKMode>(n, k, {{"bag", DynamicKMode::whole_bag}, {"top_q", DynamicKMode::top_q}, {"all", DynamicKMode::all}});
    };
    return t;
  }();
  return table;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

}  // namespace

TrainConfig parse_config(std::string_view toml_text) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config parse error: " << e.description() << " (line " << e.source().begin.line << ")";
    throw ConfigError(msg.str());
  }

  TrainConfig cfg;
  for (const auto& [key_view, node] : root) {
    const std::string key(key_view.str());
    if (key == "version") {
      auto v = node.value_exact<int64_t>();
      if (!v) throw ConfigError("config key 'version' must be an integer");
      if (*v != kConfigVersion) {
        throw ConfigError("config version " + std::to_string(*v) + " is not supported (expected " +
                          std::to_string(kConfigVersion) + "); migrate the file by renaming changed keys");
      }
      continue;
    }
    const auto& table = setters();
    auto it = table.find(key);
    if (it == table.end()) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    it->second(cfg, node, key);
  }
  validate(cfg);
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config file " + path.string());
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string config_to_toml(const TrainConfig& c) {
  std::ostringstream o;
  o << "version = " << kConfigVersion << "\n";
  o << "tau = " << fmt_double(c.tau) << "\n";
  o << "beta = " << fmt_double(c.beta) << "\n";
  o << "alpha = " << fmt_double(c.alpha) << "\n";
  o << "t_bag = " << fmt_double(c.t_bag) << "\n";
  o << "pos_threshold = " << fmt_double(c.pos_threshold) << "\n";
  o << "ema_momentum = " << fmt_double(c.ema_momentum) << "\n";
  o << "burn_in_steps = " << c.burn_in_steps << "\n";
  o << "unlabeled_ratio = " << c.unlabeled_ratio << "\n";
  o << "resize_range = [" << fmt_double(c.resize_min) << ", " << fmt_double(c.resize_max) << "]\n";
  o << "downsample_factor = " << c.downsample_factor << "\n";
  o << "unsup_reg = \"" << to_string(c.unsup_reg) << "\"\n";
  o << "feat_consistency_weight = " << fmt_double(c.feat_consistency_weight) << "\n";
  o << "lr = " << fmt_double(c.lr) << "\n";
  o << "lr_schedule = \"" << to_string(c.lr_schedule) << "\"\n";
  o << "steps = " << c.steps << "\n";
  o << "seed = " << c.seed << "\n";
  o << "noise_preset = \"" << c.noise_preset << "\"\n";
  o << "assigner = \"" << to_string(c.assigner) << "\"\n";
  o << "views = \"" << to_string(c.views) << "\"\n";
  o << "dynamic_k = \"" << to_string(c.dynamic_k) << "\"\n";
  o << "nms_iou = " << fmt_double(c.nms_iou) << "\n";
  o << "focal_alpha = " << fmt_double(c.focal_alpha) << "\n";
  o << "focal_gamma = " << fmt_double(c.focal_gamma) << "\n";
  o << "flip_prob = " << fmt_double(c.flip_prob) << "\n";
  o << "aug_noise_sigma = " << fmt_double(c.aug_noise_sigma) << "\n";
  o << "eval_every = " << c.eval_every << "\n";
  o << "eval_min_score = " << fmt_double(c.eval_min_score) << "\n";
  o << "max_dets = " << c.max_dets << "\n";
  o << "scenes = " << c.scenes << "\n";
  o << "categories = " << c.categories << "\n";
  o << "labeled_frac = " << fmt_double(c.labeled_frac) << "\n";
  o << "test_scenes = " << c.test_scenes << "\n";
  o << "feature_dim = " << c.feature_dim << "\n";
  return o.str();
}

void save_config(const TrainConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw ConfigError("cannot write config file " + path.string());
  }
  out << config_to_toml(cfg);
}

}  // namespace pseco
