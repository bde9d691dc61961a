#pragma once

// Shared helpers for the unit and acceptance tests: random generators and a
// central-difference gradient checker.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "cascadet/box.hpp"
#include "cascadet/tensor.hpp"

namespace cascadet::testing {

inline std::vector<double> uniform(std::mt19937_64& gen, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(gen);
  return v;
}

inline Tensord random_tensor(std::mt19937_64& gen, Shape shape, bool requires_grad = true, double lo = -1.0, double hi = 1.0) {
  const auto n = static_cast<std::size_t>(shape_numel(shape));
  return Tensord::from_data(std::move(shape), uniform(gen, n, lo, hi), requires_grad);
}

inline Box random_box(std::mt19937_64& gen, double extent = 64.0, double min_side = 2.0, double max_side = 24.0) {
  std::uniform_real_distribution<double> side(min_side, max_side);
  const double w = side(gen), h = side(gen);
  std::uniform_real_distribution<double> px(0.0, extent - w), py(0.0, extent - h);
  const double x = px(gen), y = py(gen);
  return {x, y, x + w, y + h};
}

// Box near `ref`, for IoU values spread over (0, 1].
inline Box jitter_box(std::mt19937_64& gen, const Box& ref, double amount) {
  std::uniform_real_distribution<double> d(-amount, amount);
  const double w = ref.width(), h = ref.height();
  Box b{ref.x1 + d(gen) * w, ref.y1 + d(gen) * h, ref.x2 + d(gen) * w, ref.y2 + d(gen) * h};
  if (b.x2 <= b.x1 + 0.5) b.x2 = b.x1 + 0.5;
  if (b.y2 <= b.y1 + 0.5) b.y2 = b.y1 + 0.5;
  return b;
}

// Adds U(-amount, amount) noise to every element.
inline void perturb(const std::vector<Tensord>& tensors, std::mt19937_64& gen, double amount = 0.05) {
  std::uniform_real_distribution<double> d(-amount, amount);
  for (Tensord t : tensors)
    for (double& v : t.mutable_data()) v += d(gen);
}

struct GradCheck {
  double max_rel_error = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates with a kink inside [x-h, x+h]
};

// Compares the tape gradient of the scalar f() with central differences.
// With `per_tensor` > 0 only that many random coordinates of each input are
// probed. |a - n| / max(|a|, |n|, floor) is reported. With `skip_kinks`, a
// coordinate whose one-sided slopes disagree by more than 1e-3 relative is
// counted in `skipped` instead, and n is whichever of the central, left and
// right differences lies closest to a.
inline GradCheck check_gradients(const std::vector<Tensord>& inputs, const std::function<Tensord()>& f,
                                 std::mt19937_64& gen, std::size_t per_tensor = 0, double h = 1e-6,
                                 double floor = 1e-4, bool skip_kinks = false) {
  std::vector<Tensord> params = inputs;
  for (auto& p : params) p.zero_grad();
  const Tensord base = f();
  base.backward();
  const double centre = base.item();
  GradCheck out;
  for (auto& p : params) {
    const std::vector<double> analytic(p.grad().begin(), p.grad().end());
    std::vector<std::size_t> coords(static_cast<std::size_t>(p.numel()));
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (per_tensor > 0 && coords.size() > per_tensor) {
      std::shuffle(coords.begin(), coords.end(), gen);
      coords.resize(per_tensor);
    }
    for (std::size_t i : coords) {
      auto data = p.mutable_data();
      const double saved = data[i];
      double plus = 0, minus = 0;
      {
        NoGradGuard no_grad;
        data[i] = saved + h;
        plus = f().item();
        data[i] = saved - h;
        minus = f().item();
        data[i] = saved;
      }
      double numeric = (plus - minus) / (2 * h);
      if (skip_kinks) {
        const double right = (plus - centre) / h, left = (centre - minus) / h;
        if (std::abs(right - left) > 1e-3 * std::max({std::abs(right), std::abs(left), floor})) {
          ++out.skipped;
          continue;
        }
        for (double side : {left, right}) {
          if (std::abs(side - analytic[i]) < std::abs(numeric - analytic[i])) numeric = side;
        }
      }
      const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
      out.max_rel_error = std::max(out.max_rel_error, std::abs(analytic[i] - numeric) / scale);
      ++out.checked;
    }
  }
  return out;
}

}  // namespace cascadet::testing
