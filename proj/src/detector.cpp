#include "pseco/detector.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pseco/error.hpp"
#include "pseco/losses.hpp"

namespace pseco {

namespace {

// log(1000 / 16), the usual guard against exp overflow in box decoding.
constexpr double kMaxLogSize = 4.135166556742356;

}  // namespace

BoxDeltas encode_deltas(const BBox& from, const BBox& to) {
  validate(from);
  validate(to);
  return {(to.center_x() - from.center_x()) / from.width() / kDeltaStds[0],
          (to.center_y() - from.center_y()) / from.height() / kDeltaStds[1],
          std::log(to.width() / from.width()) / kDeltaStds[2],
          std::log(to.height() / from.height()) / kDeltaStds[3]};
}

BBox decode_deltas(const BBox& from, const BoxDeltas& deltas) {
  const double cx = from.center_x() + deltas[0] * kDeltaStds[0] * from.width();
  const double cy = from.center_y() + deltas[1] * kDeltaStds[1] * from.height();
  const double w = from.width() * std::exp(std::clamp(deltas[2] * kDeltaStds[2], -kMaxLogSize, kMaxLogSize));
  const double h = from.height() * std::exp(std::clamp(deltas[3] * kDeltaStds[3], -kMaxLogSize, kMaxLogSize));
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

DetectorParams::DetectorParams(int num_categories, int feature_dim)
    : categories_(num_categories), dim_(feature_dim) {
  if (num_categories < 1 || feature_dim < 1) {
    throw InvalidInput("DetectorParams: need at least one category and one feature dimension");
  }
  values_.assign(static_cast<std::size_t>(num_categories) * (feature_dim + 1) + 4 * (feature_dim + 1), 0.0);
}

bool DetectorParams::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

HeadOutput head_forward(const DetectorParams& params, std::span<const double> feature) {
  const int dim = params.feature_dim();
  if (static_cast<int>(feature.size()) != dim) {
    throw InvalidInput("head_forward: feature has " + std::to_string(feature.size()) + " dims, params expect " +
                       std::to_string(dim));
  }
  HeadOutput out;
  const int k_count = params.num_categories();
  out.logits.resize(static_cast<std::size_t>(k_count));
  out.probs.resize(static_cast<std::size_t>(k_count));
  for (int k = 0; k < k_count; ++k) {
    double z = params.cls_bias(k);
    for (int d = 0; d < dim; ++d) {
      z += params.cls_weight(k, d) * feature[static_cast<std::size_t>(d)];
    }
    out.logits[static_cast<std::size_t>(k)] = z;
    out.probs[static_cast<std::size_t>(k)] = sigmoid(z);
  }
  for (int c = 0; c < 4; ++c) {
    double t = params.reg_bias(c);
    for (int d = 0; d < dim; ++d) {
      t += params.reg_weight(c, d) * feature[static_cast<std::size_t>(d)];
    }
    out.deltas[static_cast<std::size_t>(c)] = t;
  }
  return out;
}

std::vector<Prediction> detector_forward(const DetectorParams& params, std::span<const Proposal> proposals) {
  std::vector<Prediction> preds;
  preds.reserve(proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    HeadOutput h = head_forward(params, proposals[i].feature);
    Prediction p{std::move(h.probs), decode_deltas(proposals[i].box, h.deltas)};
    const bool finite = std::all_of(p.category_probs.begin(), p.category_probs.end(),
                                    [](double v) { return std::isfinite(v); }) &&
                        is_valid(p.regressed_box);
    if (!finite) {
      throw NumericError("detector_forward: non-finite output for proposal " + std::to_string(i));
    }
    preds.push_back(std::move(p));
  }
  return preds;
}

void accumulate_gradient(DetectorParams& grads, std::span<const double> feature, std::span<const double> dlogits,
                         const BoxDeltas& ddeltas) {
  const int dim = grads.feature_dim();
  for (int k = 0; k < grads.num_categories(); ++k) {
    const double g = dlogits[static_cast<std::size_t>(k)];
    if (g == 0.0) continue;
    for (int d = 0; d < dim; ++d) {
      grads.cls_weight(k, d) += g * feature[static_cast<std::size_t>(d)];
    }
    grads.cls_bias(k) += g;
  }
  for (int c = 0; c < 4; ++c) {
    const double g = ddeltas[static_cast<std::size_t>(c)];
    if (g == 0.0) continue;
    for (int d = 0; d < dim; ++d) {
      grads.reg_weight(c, d) += g * feature[static_cast<std::size_t>(d)];
    }
    grads.reg_bias(c) += g;
  }
}

DetectorParams sgd_step(const DetectorParams& params, const DetectorParams& grads, double lr) {
  if (!params.same_shape(grads)) {
    throw InvalidInput("sgd_step: parameter and gradient shapes differ");
  }
  if (!(lr >= 0.0)) {
    throw InvalidInput("sgd_step: learning rate must be non-negative");
  }
  if (!grads.all_finite()) {
    throw NumericError("sgd_step: non-finite gradient");
  }
  DetectorParams out = params;
  auto dst = out.values();
  auto g = grads.values();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] -= lr * g[i];
  }
  return out;
}

DetectorParams ema_update(const DetectorParams& teacher, const DetectorParams& student, double momentum) {
  if (!teacher.same_shape(student)) {
    throw InvalidInput("ema_update: teacher and student shapes differ");
  }
  if (!(momentum >= 0.0 && momentum <= 1.0)) {
    throw InvalidInput("ema_update: momentum must lie in [0, 1]");
  }
  DetectorParams out = teacher;
  auto dst = out.values();
  auto s = student.values();
  if (momentum == 0.0) {
    std::copy(s.begin(), s.end(), dst.begin());
    return out;
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = momentum * dst[i] + (1.0 - momentum) * s[i];
  }
  return out;
}

DetectorParams axpy(const DetectorParams& a, const DetectorParams& b, double scale) {
  if (!a.same_shape(b)) {
    throw InvalidInput("axpy: shapes differ");
  }
  DetectorParams out = a;
  auto dst = out.values();
  auto src = b.values();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] += scale * src[i];
  }
  return out;
}

double l2_distance(const DetectorParams& a, const DetectorParams& b) {
  if (!a.same_shape(b)) {
    throw InvalidInput("l2_distance: shapes differ");
  }
  double s = 0.0;
  auto x = a.values();
  auto y = b.values();
  for (std::size_t i = 0; i < x.size(); ++i) {
    s += (x[i] - y[i]) * (x[i] - y[i]);
  }
  return std::sqrt(s);
}

}  // namespace pseco
