#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "pseco/config.hpp"
#include "pseco/error.hpp"
#include "pseco/io.hpp"

using namespace pseco;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "pseco_tests";
  std::filesystem::create_directories(dir);
  const auto p = dir / name;
  std::filesystem::remove(p);
  return p;
}

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("an empty config file gives the published defaults") {
  const TrainConfig c = parse_config("");
  CHECK(c == TrainConfig{});
  CHECK(c.tau == 0.5);
  CHECK(c.beta == 4.0);
  CHECK(c.alpha == 0.5);
  CHECK(c.t_bag == 0.4);
  CHECK(c.pos_threshold == 0.5);
  CHECK(c.unlabeled_ratio == 4);
  CHECK(c.resize_min == 0.8);
  CHECK(c.resize_max == 1.3);
  CHECK(c.downsample_factor == 2);
  CHECK(c.unsup_reg == UnsupReg::pcv);
}

TEST_CASE("config round trip") {
  TrainConfig c;
  c.tau = 0.3;
  c.burn_in_steps = 3000;
  c.seed = 99;
  c.unsup_reg = UnsupReg::off;
  c.assigner = AssignerKind::iou;
  c.views = ViewMode::v1;
  c.dynamic_k = DynamicKMode::top_q;
  c.lr_schedule = LrSchedule::constant;
  c.resize_min = 0.9;
  c.noise_preset = "coco-like";
  c.lr = 0.1 + 0.2;
  CHECK(parse_config(config_to_toml(c)) == c);
  const auto path = temp_file("cfg.toml");
  save_config(c, path);
  CHECK(load_config(path) == c);
}

TEST_CASE("config rejects bad input") {
  CHECK_THROWS_AS(parse_config("bogus = 1"), ConfigError);
  CHECK_THROWS_AS(parse_config("tau = \"high\""), ConfigError);
  CHECK_THROWS_AS(parse_config("tau = 1.5"), ConfigError);
  CHECK_THROWS_AS(parse_config("beta = -1.0"), ConfigError);
  CHECK_THROWS_AS(parse_config("unsup_reg = \"maybe\""), ConfigError);
  CHECK_THROWS_AS(parse_config("version = 2"), ConfigError);
  CHECK_THROWS_AS(parse_config("resize_range = [1.3, 0.8]"), ConfigError);
  CHECK_THROWS_AS(parse_config("noise_preset = \"fog\""), ConfigError);
  CHECK_THROWS_AS(parse_config("tau = "), ConfigError);
  CHECK_THROWS_AS(load_config(temp_file("missing.toml")), ConfigError);
  CHECK(parse_config("version = 1\ntau = 0.3\nsteps = 10").tau == 0.3);
  CHECK(parse_config("beta = 2").beta == 2.0);
}

TEST_CASE("dataset round trip") {
  DatasetSpec spec;
  spec.seed = 4;
  spec.n_scenes = 30;
  spec.n_test_scenes = 5;
  Dataset ds = gen_dataset(spec);
  ds.noise_preset = "coco-like";
  CHECK(dataset_from_json(dataset_to_json(ds)) == ds);
  const auto path = temp_file("ds.json");
  save_dataset(ds, path);
  CHECK(load_dataset(path) == ds);

  Dataset empty;
  empty.n_categories = 2;
  CHECK(dataset_from_json(dataset_to_json(empty)) == empty);

  CHECK_THROWS_AS(dataset_from_json("{not json"), DataError);
  CHECK_THROWS_AS(dataset_from_json("{\"version\": 7}"), DataError);
  CHECK_THROWS_AS(load_dataset(temp_file("absent.json")), DataError);
}

TEST_CASE("params round trip") {
  std::mt19937_64 rng(97);
  std::normal_distribution<double> n(0.0, 1.0);
  DetectorParams p(3, 10);
  for (double& v : p.values()) v = n(rng);
  CHECK(params_from_json(params_to_json(p)) == p);
  const auto path = temp_file("params.json");
  save_params(p, path);
  CHECK(load_params(path) == p);
  CHECK_THROWS_AS(params_from_json("[]"), DataError);
}

TEST_CASE("format_number round trips") {
  std::mt19937_64 rng(101);
  std::normal_distribution<double> n(0.0, 100.0);
  for (int i = 0; i < 1000; ++i) {
    const double v = n(rng);
    CHECK(std::stod(format_number(v)) == v);
  }
  CHECK(format_number(0.5) == "0.5");
}

TEST_CASE("metrics CSV") {
  CHECK(kMetricsHeader ==
        "step,loss_total,loss_cls_sup,loss_reg_sup,loss_cls_unsup,loss_reg_unsup,loss_feat,map,fp_rate,sigma_pearson");
  const auto path = temp_file("metrics.csv");
  MetricsRow row;
  row.step = 3;
  row.loss = LossReport::make(1.0, 0.5, 0.25, 0.125, 0.0, 4.0);
  row.map = 0.5;
  {
    MetricsWriter w(path);
    w.write(row);
  }
  {
    MetricsWriter w(path);
    row.step = 4;
    row.map.reset();
    w.write(row);
  }
  const std::string text = read_all(path);
  std::istringstream lines(text);
  std::string line;
  std::vector<std::string> all;
  while (std::getline(lines, line)) all.push_back(line);
  REQUIRE(all.size() == 3);
  CHECK(all[0] == kMetricsHeader);
  CHECK(all[1].rfind("3,3,1,0.5,0.25,0.125,0,0.5,", 0) == 0);
  CHECK(all[2].rfind("4,", 0) == 0);
  CHECK(all[2].find(",,") != std::string::npos);

  const auto foreign = temp_file("foreign.csv");
  std::ofstream(foreign) << "a,b,c\n";
  CHECK_THROWS_AS(MetricsWriter{foreign}, DataError);
}

TEST_CASE("AP result serializes") {
  APResult r;
  r.thresholds = {0.5};
  r.ap_per_threshold = {0.25};
  r.ap_per_category = {{0, 0.25}};
  r.map = 0.25;
  const std::string json = ap_result_to_json(r);
  CHECK(json.find("\"map\"") != std::string::npos);
  CHECK(json.find("0.25") != std::string::npos);
}
