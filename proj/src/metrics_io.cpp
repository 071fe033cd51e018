#include <cmath>
#include <cstdio>
#include <sstream>

#include "pseco/error.hpp"
#include "pseco/io.hpp"

namespace pseco {

std::string format_number(double v) {
  if (!std::isfinite(v)) {
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  }
  char buf[64];
  for (int precision = 6; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

}  // namespace

std::string format_metrics_row(const MetricsRow& row) {
  std::ostringstream o;
  o << row.step << ',' << format_number(row.loss.total) << ',' << format_number(row.loss.cls_sup) << ','
    << format_number(row.loss.reg_sup) << ',' << format_number(row.loss.cls_unsup) << ','
    << format_number(row.loss.reg_unsup) << ',' << format_number(row.loss.feat_consistency) << ',' << opt(row.map)
    << ',' << opt(row.fp_rate) << ',' << opt(row.sigma_pearson);
  return o.str();
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path) {
  bool need_header = true;
  if (std::filesystem::exists(path) && std::filesystem::file_size(path) > 0) {
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    if (first != kMetricsHeader) {
      throw DataError("metrics file " + path.string() + " has a different header; refusing to append");
    }
    need_header = false;
  }
  out_.open(path, std::ios::app);
  if (!out_) {
    throw DataError("cannot open metrics file " + path.string());
  }
  if (need_header) {
    out_ << kMetricsHeader << '\n';
    out_.flush();
  }
}

void MetricsWriter::write(const MetricsRow& row) {
  out_ << format_metrics_row(row) << '\n';
  out_.flush();
}

}  // namespace pseco
