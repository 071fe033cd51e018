#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pseco/error.hpp"
#include "pseco/io.hpp"

namespace pseco {

using nlohmann::json;

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw DataError(message);
}

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, std::initializer_list<std::string_view> required,
                const std::string& where) {
  require(obj.is_object(), where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    require(known, "unknown field '" + key + "' in " + where);
  }
  for (auto r : required) {
    require(obj.contains(std::string(r)), "missing field '" + std::string(r) + "' in " + where);
  }
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed JSON: ") + e.what());
  }
}

void check_version(const json& root, int expected, const std::string& what) {
  require(root.at("version").is_number_integer(), what + " version must be an integer");
  const int v = root.at("version").get<int>();
  if (v != expected) {
    throw DataError(what + " schema version " + std::to_string(v) + " is not supported (expected " +
                    std::to_string(expected) + "); regenerate or migrate the file");
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

}  // namespace

std::string dataset_to_json(const Dataset& ds) {
  json root;
  root["version"] = kDatasetVersion;
  root["images"] = json::array();
  root["annotations"] = json::array();
  root["categories"] = json::array();
  int ann_id = 1;
  for (const Scene& s : ds.scenes) {
    root["images"].push_back(
        {{"id", s.id}, {"width", s.dims.width}, {"height", s.dims.height}, {"split", to_string(s.split)}});
    for (const GroundTruth& g : s.gts) {
      root["annotations"].push_back({{"id", ann_id++},
                                     {"image_id", s.id},
                                     {"bbox", {g.box.x1, g.box.y1, g.box.x2, g.box.y2}},
                                     {"category_id", g.category_id}});
    }
  }
  for (int c = 0; c < ds.n_categories; ++c) {
    root["categories"].push_back({{"id", c}, {"name", "category_" + std::to_string(c)}});
  }
  if (!ds.noise_preset.empty()) {
    root["noise_preset"] = ds.noise_preset;
  }
  return root.dump(1) + "\n";
}

Dataset dataset_from_json(std::string_view text) {
  const json root = parse_json(text);
  check_keys(root, {"version", "images", "annotations", "categories", "noise_preset"},
             {"version", "images", "annotations", "categories"}, "dataset");
  check_version(root, kDatasetVersion, "dataset");

  Dataset ds;
  try {
    require(root["categories"].is_array(), "categories must be an array");
    std::set<int> category_ids;
    for (const json& c : root["categories"]) {
      check_keys(c, {"id", "name"}, {"id", "name"}, "category");
      const int id = c["id"].get<int>();
      require(id >= 0, "category ids must be non-negative");
      require(category_ids.insert(id).second, "duplicate category id " + std::to_string(id));
    }
    ds.n_categories = static_cast<int>(category_ids.size());
    require(category_ids.empty() || *category_ids.rbegin() == ds.n_categories - 1,
            "category ids must be 0..K-1");

    std::map<int, std::size_t> image_index;
    require(root["images"].is_array(), "images must be an array");
    for (const json& im : root["images"]) {
      check_keys(im, {"id", "width", "height", "split"}, {"id", "width", "height", "split"}, "image");
      Scene s;
      s.id = im["id"].get<int>();
      s.dims = {im["width"].get<double>(), im["height"].get<double>()};
      require(s.dims.width > 0.0 && s.dims.height > 0.0, "image " + std::to_string(s.id) + " has bad dimensions");
      const auto split = parse_split(im["split"].get<std::string>());
      require(split.has_value(), "image " + std::to_string(s.id) + " has unknown split");
      s.split = *split;
      require(image_index.emplace(s.id, ds.scenes.size()).second, "duplicate image id " + std::to_string(s.id));
      ds.scenes.push_back(std::move(s));
    }

    require(root["annotations"].is_array(), "annotations must be an array");
    std::set<int> ann_ids;
    for (const json& a : root["annotations"]) {
      check_keys(a, {"id", "image_id", "bbox", "category_id"}, {"id", "image_id", "bbox", "category_id"},
                 "annotation");
      const int id = a["id"].get<int>();
      require(ann_ids.insert(id).second, "duplicate annotation id " + std::to_string(id));
      auto it = image_index.find(a["image_id"].get<int>());
      require(it != image_index.end(), "annotation " + std::to_string(id) + " references a missing image");
      const json& b = a["bbox"];
      require(b.is_array() && b.size() == 4, "annotation " + std::to_string(id) + " bbox must have 4 numbers");
      GroundTruth g{{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()},
                    a["category_id"].get<int>()};
      require(is_valid(g.box), "annotation " + std::to_string(id) + " has a degenerate box");
      require(category_ids.count(g.category_id) == 1,
              "annotation " + std::to_string(id) + " has unknown category");
      ds.scenes[it->second].gts.push_back(g);
    }
    if (root.contains("noise_preset")) {
      ds.noise_preset = root["noise_preset"].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("dataset field has the wrong type: ") + e.what());
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) { write_file(path, dataset_to_json(ds)); }

Dataset load_dataset(const std::filesystem::path& path) { return dataset_from_json(read_file(path)); }

std::string params_to_json(const DetectorParams& p) {
  json root;
  root["version"] = kParamsVersion;
  root["num_categories"] = p.num_categories();
  root["feature_dim"] = p.feature_dim();
  json cls_w = json::array();
  json cls_b = json::array();
  for (int k = 0; k < p.num_categories(); ++k) {
    json row = json::array();
    for (int d = 0; d < p.feature_dim(); ++d) row.push_back(p.cls_weight(k, d));
    cls_w.push_back(row);
    cls_b.push_back(p.cls_bias(k));
  }
  json reg_w = json::array();
  json reg_b = json::array();
  for (int c = 0; c < 4; ++c) {
    json row = json::array();
    for (int d = 0; d < p.feature_dim(); ++d) row.push_back(p.reg_weight(c, d));
    reg_w.push_back(row);
    reg_b.push_back(p.reg_bias(c));
  }
  root["cls_weight"] = cls_w;
  root["cls_bias"] = cls_b;
  root["reg_weight"] = reg_w;
  root["reg_bias"] = reg_b;
  return root.dump(1) + "\n";
}

DetectorParams params_from_json(std::string_view text) {
  const json root = parse_json(text);
  check_keys(root, {"version", "num_categories", "feature_dim", "cls_weight", "cls_bias", "reg_weight", "reg_bias"},
             {"version", "num_categories", "feature_dim", "cls_weight", "cls_bias", "reg_weight", "reg_bias"},
             "params");
  check_version(root, kParamsVersion, "params");
  try {
    const int k_count = root["num_categories"].get<int>();
    const int dim = root["feature_dim"].get<int>();
    require(k_count >= 1 && dim >= 1, "params dimensions must be positive");
    DetectorParams p(k_count, dim);
    const json& cw = root["cls_weight"];
    const json& cb = root["cls_bias"];
    const json& rw = root["reg_weight"];
    const json& rb = root["reg_bias"];
    require(cw.size() == static_cast<std::size_t>(k_count) && cb.size() == static_cast<std::size_t>(k_count) &&
                rw.size() == 4 && rb.size() == 4,
            "params arrays have the wrong length");
    for (int k = 0; k < k_count; ++k) {
      require(cw[static_cast<std::size_t>(k)].size() == static_cast<std::size_t>(dim), "cls_weight row length");
      for (int d = 0; d < dim; ++d) p.cls_weight(k, d) = cw[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)].get<double>();
      p.cls_bias(k) = cb[static_cast<std::size_t>(k)].get<double>();
    }
    for (int c = 0; c < 4; ++c) {
      require(rw[static_cast<std::size_t>(c)].size() == static_cast<std::size_t>(dim), "reg_weight row length");
      for (int d = 0; d < dim; ++d) p.reg_weight(c, d) = rw[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)].get<double>();
      p.reg_bias(c) = rb[static_cast<std::size_t>(c)].get<double>();
    }
    require(p.all_finite(), "params contain non-finite values");
    return p;
  } catch (const json::exception& e) {
    throw DataError(std::string("params field has the wrong type: ") + e.what());
  }
}

void save_params(const DetectorParams& params, const std::filesystem::path& path) {
  write_file(path, params_to_json(params));
}

DetectorParams load_params(const std::filesystem::path& path) { return params_from_json(read_file(path)); }

std::string ap_result_to_json(const APResult& r) {
  json root;
  root["map"] = r.map;
  root["iou_thresholds"] = r.thresholds;
  root["ap_per_threshold"] = r.ap_per_threshold;
  json per_cat = json::object();
  for (const auto& [c, v] : r.ap_per_category) per_cat[std::to_string(c)] = v;
  root["ap_per_category"] = per_cat;
  return root.dump(1) + "\n";
}

}  // namespace pseco
