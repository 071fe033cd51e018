#include "pseco/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "pseco/error.hpp"

namespace pseco {

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

FocalResult focal_loss(double p, bool positive, const FocalParams& params) {
  FocalResult r;
  if (!std::isfinite(p)) {
    throw NumericError("focal_loss: non-finite probability");
  }
  if (p < kProbEpsilon || p > 1.0 - kProbEpsilon) {
    p = std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
    r.clamped = true;
  }
  const double g = params.gamma;
  if (positive) {
    // L = -a (1-p)^g log p ;  dL/dx = a (1-p)^g (g p log p - (1 - p))
    const double mod = std::pow(1.0 - p, g);
    const double logp = std::log(p);
    r.loss = -params.alpha * mod * logp;
    r.grad_logit = params.alpha * mod * (g * p * logp - (1.0 - p));
  } else {
    // L = -(1-a) p^g log(1-p) ;  dL/dx = (1-a) p^g (p - g (1-p) log(1-p))
    const double mod = std::pow(p, g);
    const double log1mp = std::log1p(-p);
    r.loss = -(1.0 - params.alpha) * mod * log1mp;
    r.grad_logit = (1.0 - params.alpha) * mod * (p - g * (1.0 - p) * log1mp);
  }
  return r;
}

RegressionLoss weighted_l1_reg(std::span<const RegressionTerm> terms, std::span<const std::optional<double>> sigmas) {
  RegressionLoss out;
  out.grad.assign(terms.size(), {0.0, 0.0, 0.0, 0.0});
  if (terms.empty()) {
    return out;
  }

  std::map<int, std::size_t> positives;
  for (const RegressionTerm& t : terms) {
    if (t.gt_index < 0 || static_cast<std::size_t>(t.gt_index) >= sigmas.size()) {
      throw InvalidInput("weighted_l1_reg: positive references unknown pseudo box " + std::to_string(t.gt_index));
    }
    const auto& sigma = sigmas[static_cast<std::size_t>(t.gt_index)];
    if (!sigma) {
      throw InvalidInput("weighted_l1_reg: pseudo box " + std::to_string(t.gt_index) + " has no sigma");
    }
    ++positives[t.gt_index];
  }
  const double m = static_cast<double>(positives.size());

  // Accumulate per box first so each box's contribution is sigma_j * S_j / (M N_j).
  std::map<int, double> residual_sum;
  for (const RegressionTerm& t : terms) {
    double s = 0.0;
    for (std::size_t c = 0; c < 4; ++c) {
      s += std::abs(t.pred[c] - t.target[c]);
    }
    residual_sum[t.gt_index] += s;
  }
  for (const auto& [gt, sum] : residual_sum) {
    const double sigma = *sigmas[static_cast<std::size_t>(gt)];
    out.loss += sigma * sum / (m * static_cast<double>(positives[gt]));
  }

  for (std::size_t i = 0; i < terms.size(); ++i) {
    const RegressionTerm& t = terms[i];
    const double w = *sigmas[static_cast<std::size_t>(t.gt_index)] / (m * static_cast<double>(positives[t.gt_index]));
    for (std::size_t c = 0; c < 4; ++c) {
      const double d = t.pred[c] - t.target[c];
      out.grad[i][c] = d > 0.0 ? w : (d < 0.0 ? -w : 0.0);
    }
  }
  return out;
}

double supervised_loss(double cls, double reg) { return cls + reg; }

double total_loss(double sup, double unsup, double beta) {
  if (!(beta >= 0.0)) {
    throw InvalidInput("total_loss: beta must be non-negative");
  }
  return sup + beta * unsup;
}

LossReport LossReport::make(double cls_sup, double reg_sup, double cls_unsup, double reg_unsup, double feat,
                            double beta) {
  LossReport r{cls_sup, reg_sup, cls_unsup, reg_unsup, feat, beta, 0.0};
  r.total = total_loss(r.supervised(), r.unsupervised(), beta);
  return r;
}

}  // namespace pseco
