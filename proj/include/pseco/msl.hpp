#pragma once

#include <cstddef>
#include <map>
#include <random>
#include <span>
#include <vector>

#include "pseco/geometry.hpp"

namespace pseco {

inline constexpr double kDefaultResizeMin = 0.8;
inline constexpr double kDefaultResizeMax = 1.3;

struct ImageDims {
  double width = 0.0;
  double height = 0.0;

  bool operator==(const ImageDims&) const = default;
};

/// Recipe for the two student views: V1 = V0 resized by resize_ratio (and
/// optionally mirrored), V2 = V1 downsampled by downsample_factor.
struct ViewSpec {
  double resize_ratio = 1.0;
  int downsample_factor = 2;
  bool hflip = false;
};

void validate(const ViewSpec& spec, double lo = kDefaultResizeMin, double hi = kDefaultResizeMax);

double sample_resize_ratio(std::mt19937_64& rng, double lo = kDefaultResizeMin, double hi = kDefaultResizeMax);

struct View {
  ImageDims dims;
  std::vector<BBox> boxes;
  std::vector<std::size_t> source_index;  // index of each kept box in the input
  std::size_t dropped = 0;                // boxes whose area fell below kMinViewBoxArea
};

inline constexpr double kMinViewBoxArea = 1e-3;

struct ViewPair {
  View v1;
  View v2;
};

ViewPair make_views(ImageDims dims, std::span<const BBox> boxes, const ViewSpec& spec);

/// Box mapping used by make_views, exposed so proposals follow the same path.
BBox to_view1(const BBox& b, ImageDims v0_dims, const ViewSpec& spec);
BBox to_view2(const BBox& v1_box, const ViewSpec& spec);

struct FpnLevelParams {
  int k0 = 4;
  double s0 = 224.0;
  int level_min = 2;
  int level_max = 6;
};

/// floor(k0 + log2(sqrt(area) / s0)) without clamping. Computed from the binary
/// exponent so that halving a box lowers the level by exactly one.
int fpn_level_unclamped(const BBox& box, int k0 = 4, double s0 = 224.0);

int fpn_level(const BBox& box, const FpnLevelParams& params = {});

/// One pyramid level: H x W cells with C channels, row-major (y, x, c).
struct FeatureGrid {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> values;

  FeatureGrid() = default;
  FeatureGrid(int h, int w, int c)
      : height(h), width(w), channels(c), values(static_cast<std::size_t>(h) * w * c, 0.0) {}

  double& at(int y, int x, int c) { return values[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  double at(int y, int x, int c) const { return values[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  bool same_shape(const FeatureGrid& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

inline constexpr int kPyramidMinLevel = 2;
inline constexpr int kPyramidMaxLevel = 7;

/// Levels P2..P7 of an image; level l has ceil(H / 2^l) x ceil(W / 2^l) cells,
/// where H and W are the image dimensions rounded up to whole pixels.
class FeaturePyramid {
 public:
  FeaturePyramid() = default;
  FeaturePyramid(ImageDims dims, int channels, int min_level = kPyramidMinLevel, int max_level = kPyramidMaxLevel);

  const std::map<int, FeatureGrid>& levels() const { return levels_; }
  FeatureGrid& level(int l);
  const FeatureGrid& level(int l) const;
  bool has_level(int l) const { return levels_.count(l) != 0; }
  int channels() const { return channels_; }

  /// Cell of level l containing the point, or false when the point falls outside.
  bool cell_of(int l, double x, double y, int& cy, int& cx) const;

 private:
  int channels_ = 0;
  std::map<int, FeatureGrid> levels_;
};

struct PyramidEntry {
  BBox box;
  std::vector<double> value;  // one entry per channel
};

/// Synthetic pyramid: each entry adds its value vector at the cell holding the
/// box center, on the level its size maps to. Entries whose unclamped level
/// falls outside the pyramid are skipped.
FeaturePyramid rasterize_pyramid(ImageDims dims, int channels, std::span<const PyramidEntry> entries,
                                 const FpnLevelParams& level_params = {});

struct AlignedLevelPair {
  int level_v1 = 0;
  int level_v2 = 0;
  const FeatureGrid* v1 = nullptr;
  const FeatureGrid* v2 = nullptr;
};

/// Pairs P(l+1) of the V1 pyramid with P(l) of the V2 pyramid for every l where
/// both exist (P3-P7 with P2-P6 by default). Throws InvalidInput naming the
/// level when a pair's shapes disagree.
std::vector<AlignedLevelPair> align_pyramids(const FeaturePyramid& p1, const FeaturePyramid& p2);

/// Mean squared difference per pair, averaged over pairs.
double feature_consistency_loss(std::span<const AlignedLevelPair> pairs);

}  // namespace pseco
