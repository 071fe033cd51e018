#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pseco/detector.hpp"
#include "pseco/eval_metrics.hpp"
#include "pseco/losses.hpp"
#include "pseco/simulator.hpp"

namespace pseco {

inline constexpr int kDatasetVersion = 1;
inline constexpr int kParamsVersion = 1;

// Dataset files are COCO-like JSON with corner-form boxes:
// {version, images:[{id,width,height,split}],
//  annotations:[{id,image_id,bbox:[x1,y1,x2,y2],category_id}],
//  categories:[{id,name}], noise_preset (optional)}
std::string dataset_to_json(const Dataset& ds);
Dataset dataset_from_json(std::string_view text);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

std::string params_to_json(const DetectorParams& params);
DetectorParams params_from_json(std::string_view text);
void save_params(const DetectorParams& params, const std::filesystem::path& path);
DetectorParams load_params(const std::filesystem::path& path);

std::string ap_result_to_json(const APResult& r);

// ---------------------------------------------------------------------------
// Metrics CSV

inline constexpr std::string_view kMetricsHeader =
    "step,loss_total,loss_cls_sup,loss_reg_sup,loss_cls_unsup,loss_reg_unsup,loss_feat,map,fp_rate,sigma_pearson";

struct MetricsRow {
  int step = 0;
  LossReport loss;
  std::optional<double> map;
  std::optional<double> fp_rate;
  std::optional<double> sigma_pearson;
};

std::string format_metrics_row(const MetricsRow& row);

/// Appends rows to a metrics CSV, writing the header when the file is new or
/// empty and refusing files whose header differs. Each row is flushed.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path);
  void write(const MetricsRow& row);

 private:
  std::ofstream out_;
};

/// Formats a double for CSV/JSON output (shortest %.*g that round-trips).
std::string format_number(double v);

}  // namespace pseco
