#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "pseco/types.hpp"

namespace pseco {

// Target normalization of the standard (dx, dy, dw, dh) box parameterization.
inline constexpr std::array<double, 4> kDeltaStds{0.1, 0.1, 0.2, 0.2};

using BoxDeltas = std::array<double, 4>;

/// Normalized deltas that move `from` onto `to`: center offsets in units of the
/// source size, log size ratios, each divided by kDeltaStds.
BoxDeltas encode_deltas(const BBox& from, const BBox& to);

/// Inverse of encode_deltas; log-size deltas are clamped so boxes stay finite.
BBox decode_deltas(const BBox& from, const BoxDeltas& deltas);

/// Linear two-branch detector head over proposal features:
/// per-category sigmoid classifier (K x D + K) and box regressor (4 x D + 4).
/// Values are stored flat so optimizer updates are plain elementwise loops.
class DetectorParams {
 public:
  DetectorParams() = default;
  DetectorParams(int num_categories, int feature_dim);

  int num_categories() const { return categories_; }
  int feature_dim() const { return dim_; }

  double& cls_weight(int k, int d) { return values_[index_cls_w(k, d)]; }
  double cls_weight(int k, int d) const { return values_[index_cls_w(k, d)]; }
  double& cls_bias(int k) { return values_[index_cls_b(k)]; }
  double cls_bias(int k) const { return values_[index_cls_b(k)]; }
  double& reg_weight(int c, int d) { return values_[index_reg_w(c, d)]; }
  double reg_weight(int c, int d) const { return values_[index_reg_w(c, d)]; }
  double& reg_bias(int c) { return values_[index_reg_b(c)]; }
  double reg_bias(int c) const { return values_[index_reg_b(c)]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  bool same_shape(const DetectorParams& o) const { return categories_ == o.categories_ && dim_ == o.dim_; }
  bool all_finite() const;

  bool operator==(const DetectorParams&) const = default;

 private:
  std::size_t index_cls_w(int k, int d) const { return static_cast<std::size_t>(k) * dim_ + d; }
  std::size_t index_cls_b(int k) const { return static_cast<std::size_t>(categories_) * dim_ + k; }
  std::size_t index_reg_w(int c, int d) const {
    return static_cast<std::size_t>(categories_) * (dim_ + 1) + static_cast<std::size_t>(c) * dim_ + d;
  }
  std::size_t index_reg_b(int c) const { return static_cast<std::size_t>(categories_) * (dim_ + 1) + 4 * dim_ + c; }

  int categories_ = 0;
  int dim_ = 0;
  std::vector<double> values_;
};

/// Raw head outputs for one proposal.
struct HeadOutput {
  std::vector<double> logits;
  std::vector<double> probs;
  BoxDeltas deltas{};
};

HeadOutput head_forward(const DetectorParams& params, std::span<const double> feature);

/// Predictions for every proposal; throws NumericError naming the first
/// proposal whose output is not finite.
std::vector<Prediction> detector_forward(const DetectorParams& params, std::span<const Proposal> proposals);

/// Adds the parameter gradient implied by d loss / d logits and d loss / d deltas
/// of one proposal into grads.
void accumulate_gradient(DetectorParams& grads, std::span<const double> feature, std::span<const double> dlogits,
                         const BoxDeltas& ddeltas);

/// params - lr * grads.
DetectorParams sgd_step(const DetectorParams& params, const DetectorParams& grads, double lr);

/// momentum * teacher + (1 - momentum) * student.
DetectorParams ema_update(const DetectorParams& teacher, const DetectorParams& student, double momentum);

/// a + scale * b, elementwise.
DetectorParams axpy(const DetectorParams& a, const DetectorParams& b, double scale);

double l2_distance(const DetectorParams& a, const DetectorParams& b);

}  // namespace pseco
