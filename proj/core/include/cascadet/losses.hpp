#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>

#include "cascadet/tensor.hpp"

namespace cascadet {

inline constexpr double kFocalGamma = 2.0;
inline constexpr double kFocalBalance = 0.25;
inline constexpr double kMarginAlpha = 15.0;

// -balance_t * (1 - p_t)^gamma * log(p_t), p = sigmoid(logit). An empty
// `balance` disables the class weighting (balance_t = 1).
double sigmoid_focal_loss(double logit, int label, double gamma = kFocalGamma,
                          std::optional<double> balance = kFocalBalance);
// d(sigmoid_focal_loss)/d(logit).
double sigmoid_focal_loss_grad(double logit, int label, double gamma = kFocalGamma,
                               std::optional<double> balance = kFocalBalance);

// Sum over coordinates of 0.5 d^2 (|d| < 1) or |d| - 0.5.
double smooth_l1(const std::array<double, 4>& pred, const std::array<double, 4>& target);
double smooth_l1(double diff);

// m = alpha / sqrt(w h). Throws unless w > 0, h > 0 and alpha >= 0.
double scale_margin(double w, double h, double alpha = kMarginAlpha);

// Focal loss on the logit shifted away from the decision boundary:
// x - m for positives, x + m for negatives.
double margined_focal_loss(double logit, int label, double box_w, double box_h, double alpha = kMarginAlpha,
                           double gamma = kFocalGamma, std::optional<double> balance = kFocalBalance);

// Label codes used by the tensor-level losses.
inline constexpr std::int8_t kIgnore = -1;
inline constexpr std::int8_t kNegative = 0;
inline constexpr std::int8_t kPositive = 1;

// Sum of focal losses over every element of `logits` whose label is not
// kIgnore. `margins`, when non-empty, holds one non-negative margin per
// element applied as in margined_focal_loss.
template <typename T>
Tensor<T> focal_loss_sum(const Tensor<T>& logits, std::span<const std::int8_t> labels,
                         std::span<const double> margins = {}, double gamma = kFocalGamma,
                         std::optional<double> balance = kFocalBalance);

// Sum of smooth-L1 terms over rows of `pred` (viewed as [rows, 4]) whose
// mask byte is set; `targets` holds 4 values per row.
template <typename T>
Tensor<T> smooth_l1_sum(const Tensor<T>& pred, std::span<const double> targets, std::span<const std::uint8_t> mask);

// Components of the hybrid detector loss.
struct LossReport {
  double str_loss = 0;
  double stc_loss = 0;
  double fsm_loss = 0;
  double total = 0;
  std::int64_t n_s1 = 0;  // step-1 regression positives
  std::int64_t n_s2 = 0;  // step-2 regression positives
  std::int64_t n_s3 = 0;  // step-1 classification positives
  std::int64_t n_s4 = 0;  // step-2 classification positives
};

}  // namespace cascadet
