#include "cascadet/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace cascadet {

namespace {

// log(1 + exp(v)) without overflow.
double softplus(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }

double stable_sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double class_weight(int label, const std::optional<double>& balance) {
  if (!balance) return 1.0;
  return label == 1 ? *balance : 1.0 - *balance;
}

}  // namespace

double sigmoid_focal_loss(double logit, int label, double gamma, std::optional<double> balance) {
  const double z = label == 1 ? logit : -logit;
  const double log_pt = -softplus(-z);
  const double one_minus_pt = stable_sigmoid(-z);
  return -class_weight(label, balance) * std::pow(one_minus_pt, gamma) * log_pt;
}

double sigmoid_focal_loss_grad(double logit, int label, double gamma, std::optional<double> balance) {
  const double z = label == 1 ? logit : -logit;
  const double p = stable_sigmoid(z);
  const double q = stable_sigmoid(-z);
  const double log_p = -softplus(-z);
  // d/dz of -w q^g log p, with dp/dz = pq and dq/dz = -pq.
  const double dz = class_weight(label, balance) * std::pow(q, gamma) * (gamma * p * log_p - q);
  return label == 1 ? dz : -dz;
}

double smooth_l1(double diff) {
  const double a = std::abs(diff);
  return a < 1.0 ? 0.5 * diff * diff : a - 0.5;
}

double smooth_l1(const std::array<double, 4>& pred, const std::array<double, 4>& target) {
  double total = 0;
  for (std::size_t i = 0; i < 4; ++i) total += smooth_l1(pred[i] - target[i]);
  return total;
}

double scale_margin(double w, double h, double alpha) {
  if (!(w > 0) || !(h > 0)) throw std::invalid_argument("scale_margin: box extents must be positive");
  if (!(alpha >= 0)) throw std::invalid_argument("scale_margin: alpha must be non-negative");
  return alpha / std::sqrt(w * h);
}

double margined_focal_loss(double logit, int label, double box_w, double box_h, double alpha, double gamma,
                           std::optional<double> balance) {
  const double m = scale_margin(box_w, box_h, alpha);
  return sigmoid_focal_loss(label == 1 ? logit - m : logit + m, label, gamma, balance);
}

template <typename T>
Tensor<T> focal_loss_sum(const Tensor<T>& logits, std::span<const std::int8_t> labels, std::span<const double> margins,
                         double gamma, std::optional<double> balance) {
  const auto n = static_cast<std::size_t>(logits.numel());
  if (labels.size() != n) throw std::invalid_argument("focal_loss_sum: label count does not match logits");
  if (!margins.empty() && margins.size() != n) throw std::invalid_argument("focal_loss_sum: margin count does not match logits");
  auto x = logits.data();
  std::vector<double> dloss(n, 0.0);
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == kIgnore) continue;
    const int label = labels[i];
    double shifted = static_cast<double>(x[i]);
    if (!margins.empty()) shifted += label == 1 ? -margins[i] : margins[i];
    total += sigmoid_focal_loss(shifted, label, gamma, balance);
    dloss[i] = sigmoid_focal_loss_grad(shifted, label, gamma, balance);
  }
  return make_result<T>({}, {static_cast<T>(total)}, {logits.node()},
                        [dloss = std::move(dloss)](detail::Node<T>& self) {
                          auto& in = *self.inputs[0];
                          in.ensure_grad();
                          const double g = static_cast<double>(self.grad[0]);
                          for (std::size_t i = 0; i < dloss.size(); ++i) in.grad[i] += static_cast<T>(g * dloss[i]);
                        });
}

template <typename T>
Tensor<T> smooth_l1_sum(const Tensor<T>& pred, std::span<const double> targets, std::span<const std::uint8_t> mask) {
  const auto n = static_cast<std::size_t>(pred.numel());
  if (n % 4 != 0 || targets.size() != n || mask.size() != n / 4) {
    throw std::invalid_argument("smooth_l1_sum: pred " + shape_str(pred.shape()) + " does not match " +
                                std::to_string(targets.size()) + " targets / " + std::to_string(mask.size()) + " rows");
  }
  auto p = pred.data();
  std::vector<double> dloss(n, 0.0);
  double total = 0;
  for (std::size_t row = 0; row < mask.size(); ++row) {
    if (!mask[row]) continue;
    for (std::size_t c = 0; c < 4; ++c) {
      const std::size_t i = row * 4 + c;
      const double d = static_cast<double>(p[i]) - targets[i];
      total += smooth_l1(d);
      dloss[i] = std::abs(d) < 1.0 ? d : (d > 0 ? 1.0 : -1.0);
    }
  }
  return make_result<T>({}, {static_cast<T>(total)}, {pred.node()},
                        [dloss = std::move(dloss)](detail::Node<T>& self) {
                          auto& in = *self.inputs[0];
                          in.ensure_grad();
                          const double g = static_cast<double>(self.grad[0]);
                          for (std::size_t i = 0; i < dloss.size(); ++i) in.grad[i] += static_cast<T>(g * dloss[i]);
                        });
}

template Tensor<float> focal_loss_sum(const Tensor<float>&, std::span<const std::int8_t>, std::span<const double>, double,
                                      std::optional<double>);
template Tensor<double> focal_loss_sum(const Tensor<double>&, std::span<const std::int8_t>, std::span<const double>, double,
                                       std::optional<double>);
template Tensor<float> smooth_l1_sum(const Tensor<float>&, std::span<const double>, std::span<const std::uint8_t>);
template Tensor<double> smooth_l1_sum(const Tensor<double>&, std::span<const double>, std::span<const std::uint8_t>);

}  // namespace cascadet
