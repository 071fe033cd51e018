#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace pseco {

struct FocalParams {
  double alpha = 0.25;  // weight of positives; negatives get 1 - alpha
  double gamma = 2.0;
};

struct FocalResult {
  double loss = 0.0;
  double grad_logit = 0.0;  // d loss / d logit, where p = sigmoid(logit)
  bool clamped = false;     // p was pushed into [eps, 1 - eps]
};

inline constexpr double kProbEpsilon = 1e-7;

double sigmoid(double x);

/// Binary focal loss -alpha_t (1 - p_t)^gamma log(p_t) for a sigmoid output p.
FocalResult focal_loss(double p, bool positive, const FocalParams& params = {});

/// One positive's regression output and target (4 box-delta coordinates) and
/// the pseudo box it regresses to.
struct RegressionTerm {
  std::array<double, 4> pred{};
  std::array<double, 4> target{};
  int gt_index = -1;
};

struct RegressionLoss {
  double loss = 0.0;
  std::vector<std::array<double, 4>> grad;  // d loss / d pred, one entry per term
};

/// Consistency-weighted L1:
///   (1/M) sum_j sigma_j (1/N_j) sum_{i in j} sum_c |pred - target|
/// where M counts pseudo boxes that have positives and N_j is the number of
/// positives of box j. The subgradient of |x| at 0 is taken as 0.
RegressionLoss weighted_l1_reg(std::span<const RegressionTerm> terms, std::span<const std::optional<double>> sigmas);

double supervised_loss(double cls, double reg);

double total_loss(double sup, double unsup, double beta);

struct LossReport {
  double cls_sup = 0.0;
  double reg_sup = 0.0;
  double cls_unsup = 0.0;
  double reg_unsup = 0.0;
  double feat_consistency = 0.0;
  double beta = 0.0;
  double total = 0.0;

  static LossReport make(double cls_sup, double reg_sup, double cls_unsup, double reg_unsup, double feat,
                         double beta);
  double supervised() const { return supervised_loss(cls_sup, reg_sup); }
  double unsupervised() const { return cls_unsup + reg_unsup + feat_consistency; }
};

}  // namespace pseco
