#include "pseco/msl.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pseco/error.hpp"

namespace pseco {

void validate(const ViewSpec& spec, double lo, double hi) {
  if (!(spec.resize_ratio >= lo && spec.resize_ratio <= hi)) {
    throw InvalidInput("view resize ratio " + std::to_string(spec.resize_ratio) + " outside [" +
                       std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  if (spec.downsample_factor < 2 || spec.downsample_factor % 2 != 0) {
    throw InvalidInput("downsample factor must be a positive even integer, got " +
                       std::to_string(spec.downsample_factor));
  }
}

double sample_resize_ratio(std::mt19937_64& rng, double lo, double hi) {
  if (!(lo > 0.0) || lo > hi) {
    throw InvalidInput("sample_resize_ratio: need 0 < lo <= hi, got [" + std::to_string(lo) + ", " +
                       std::to_string(hi) + "]");
  }
  if (lo == hi) {
    return lo;
  }
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(rng);
}

BBox to_view1(const BBox& b, ImageDims v0_dims, const ViewSpec& spec) {
  return transform_box(b, spec.resize_ratio, spec.hflip, v0_dims.width);
}

BBox to_view2(const BBox& v1_box, const ViewSpec& spec) {
  return transform_box(v1_box, 1.0 / static_cast<double>(spec.downsample_factor));
}

namespace {

bool usable(const BBox& b) { return is_valid(b) && b.area() >= kMinViewBoxArea; }

BBox scale_only(const BBox& b, double s) { return {b.x1 * s, b.y1 * s, b.x2 * s, b.y2 * s}; }

BBox flip_scale(const BBox& b, double s, bool hflip, double width) {
  BBox out = b;
  if (hflip) {
    out.x1 = width - b.x2;
    out.x2 = width - b.x1;
  }
  return scale_only(out, s);
}

}  // namespace

ViewPair make_views(ImageDims dims, std::span<const BBox> boxes, const ViewSpec& spec) {
  if (!(spec.resize_ratio > 0.0)) {
    throw InvalidInput("make_views: resize ratio must be positive");
  }
  if (spec.downsample_factor < 2 || spec.downsample_factor % 2 != 0) {
    throw InvalidInput("make_views: downsample factor must be a positive even integer");
  }
  const double down = 1.0 / static_cast<double>(spec.downsample_factor);

  ViewPair out;
  out.v1.dims = {dims.width * spec.resize_ratio, dims.height * spec.resize_ratio};
  out.v2.dims = {out.v1.dims.width * down, out.v1.dims.height * down};
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    validate(boxes[i]);
    const BBox b1 = flip_scale(boxes[i], spec.resize_ratio, spec.hflip, dims.width);
    if (!usable(b1)) {
      ++out.v1.dropped;
      ++out.v2.dropped;
      continue;
    }
    out.v1.boxes.push_back(b1);
    out.v1.source_index.push_back(i);
    const BBox b2 = scale_only(b1, down);
    if (!usable(b2)) {
      ++out.v2.dropped;
      continue;
    }
    out.v2.boxes.push_back(b2);
    out.v2.source_index.push_back(i);
  }
  return out;
}

int fpn_level_unclamped(const BBox& box, int k0, double s0) {
  validate(box);
  const double ratio = std::sqrt(box.area()) / s0;
  int exponent = 0;
  std::frexp(ratio, &exponent);
  // ratio = m * 2^exponent with m in [0.5, 1), so floor(log2(ratio)) = exponent - 1.
  return k0 + exponent - 1;
}

int fpn_level(const BBox& box, const FpnLevelParams& params) {
  const int raw = fpn_level_unclamped(box, params.k0, params.s0);
  return std::clamp(raw, params.level_min, params.level_max);
}

FeaturePyramid::FeaturePyramid(ImageDims dims, int channels, int min_level, int max_level) : channels_(channels) {
  if (channels <= 0 || min_level > max_level || min_level < 0) {
    throw InvalidInput("FeaturePyramid: bad channel count or level range");
  }
  const auto h = static_cast<long long>(std::ceil(dims.height));
  const auto w = static_cast<long long>(std::ceil(dims.width));
  if (h <= 0 || w <= 0) {
    throw InvalidInput("FeaturePyramid: image dimensions must be positive");
  }
  for (int l = min_level; l <= max_level; ++l) {
    const long long stride = 1LL << l;
    levels_.emplace(l, FeatureGrid(static_cast<int>((h + stride - 1) / stride),
                                   static_cast<int>((w + stride - 1) / stride), channels));
  }
}

FeatureGrid& FeaturePyramid::level(int l) {
  auto it = levels_.find(l);
  if (it == levels_.end()) {
    throw InvalidInput("pyramid has no level P" + std::to_string(l));
  }
  return it->second;
}

const FeatureGrid& FeaturePyramid::level(int l) const {
  auto it = levels_.find(l);
  if (it == levels_.end()) {
    throw InvalidInput("pyramid has no level P" + std::to_string(l));
  }
  return it->second;
}

bool FeaturePyramid::cell_of(int l, double x, double y, int& cy, int& cx) const {
  const FeatureGrid& g = level(l);
  const double stride = std::ldexp(1.0, l);
  const double fx = std::floor(x / stride);
  const double fy = std::floor(y / stride);
  if (fx < 0.0 || fy < 0.0 || fx >= g.width || fy >= g.height) {
    return false;
  }
  cx = static_cast<int>(fx);
  cy = static_cast<int>(fy);
  return true;
}

FeaturePyramid rasterize_pyramid(ImageDims dims, int channels, std::span<const PyramidEntry> entries,
                                 const FpnLevelParams& level_params) {
  FeaturePyramid pyramid(dims, channels);
  for (const PyramidEntry& e : entries) {
    if (static_cast<int>(e.value.size()) != channels) {
      throw InvalidInput("rasterize_pyramid: entry has " + std::to_string(e.value.size()) + " channels, expected " +
                         std::to_string(channels));
    }
    const int l = fpn_level_unclamped(e.box, level_params.k0, level_params.s0);
    if (!pyramid.has_level(l)) {
      continue;
    }
    int cy = 0;
    int cx = 0;
    if (!pyramid.cell_of(l, e.box.center_x(), e.box.center_y(), cy, cx)) {
      continue;
    }
    FeatureGrid& g = pyramid.level(l);
    for (int c = 0; c < channels; ++c) {
      g.at(cy, cx, c) += e.value[static_cast<std::size_t>(c)];
    }
  }
  return pyramid;
}

std::vector<AlignedLevelPair> align_pyramids(const FeaturePyramid& p1, const FeaturePyramid& p2) {
  std::vector<AlignedLevelPair> pairs;
  for (const auto& [l2, g2] : p2.levels()) {
    const int l1 = l2 + 1;
    if (!p1.has_level(l1)) {
      continue;
    }
    const FeatureGrid& g1 = p1.level(l1);
    if (!g1.same_shape(g2)) {
      throw InvalidInput("align_pyramids: V1 P" + std::to_string(l1) + " is " + std::to_string(g1.height) + "x" +
                         std::to_string(g1.width) + "x" + std::to_string(g1.channels) + " but V2 P" +
                         std::to_string(l2) + " is " + std::to_string(g2.height) + "x" + std::to_string(g2.width) +
                         "x" + std::to_string(g2.channels));
    }
    pairs.push_back({l1, l2, &g1, &g2});
  }
  return pairs;
}

double feature_consistency_loss(std::span<const AlignedLevelPair> pairs) {
  if (pairs.empty()) {
    return 0.0;
  }
  double total = 0.0;
  for (const AlignedLevelPair& p : pairs) {
    if (!p.v1->same_shape(*p.v2)) {
      throw InvalidInput("feature_consistency_loss: pair P" + std::to_string(p.level_v1) + "/P" +
                         std::to_string(p.level_v2) + " is not aligned");
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < p.v1->values.size(); ++i) {
      const double d = p.v1->values[i] - p.v2->values[i];
      sq += d * d;
    }
    total += p.v1->values.empty() ? 0.0 : sq / static_cast<double>(p.v1->values.size());
  }
  return total / static_cast<double>(pairs.size());
}

}  // namespace pseco
