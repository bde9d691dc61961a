#pragma once

// Differentiable operations over Tensor<T>. Only the set the detector needs.
// Broadcasting is limited to scalar-vs-tensor; everything else must match.

#include <cstdint>
#include <vector>

#include "cascadet/tensor.hpp"

namespace cascadet {

struct Conv2dOptions {
  int stride = 1;
  int pad_h = 0;
  int pad_w = 0;

  static Conv2dOptions same(int kh, int kw, int stride = 1) { return {stride, kh / 2, kw / 2}; }
};

// Cross-correlation of input [N,C,H,W] with kernel [K,C,kh,kw]; `bias` is
// either undefined or shaped [K]. Output [N,K,Ho,Wo] with
// Ho = (H + 2*pad_h - kh) / stride + 1.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 Conv2dOptions options);

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, int stride = 1, int padding = 0) {
  return conv2d(input, kernel, Tensor<T>{}, Conv2dOptions{stride, padding, padding});
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

// 1 / (1 + exp(-x)) evaluated without overflow for either sign.
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s);
template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T s);

// Sum of all elements, shape [].
template <typename T>
Tensor<T> sum(const Tensor<T>& x);

// Sum of a list of scalars; an empty list gives 0.
template <typename T>
Tensor<T> sum_scalars(const std::vector<Tensor<T>>& terms);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);

// Nearest-neighbour 2x upsampling of [N,C,H,W].
template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& x);

// Selects rows of x along axis 0 (repeats allowed).
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<std::int64_t>& rows);

// [N,C,H,W] -> [N,C]
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);

// Rearranges per-location predictions [N, A*k, H, W] (channel = a*k + c)
// into anchor-major rows [N, H*W*A, k] (row = (i*W + j)*A + a).
template <typename T>
Tensor<T> to_anchor_major(const Tensor<T>& x, int k);

// Four-corner bilinear interpolation of feature [C,H,W] at column x, row y.
// Corners outside the grid contribute zero.
template <typename T>
Tensor<T> bilinear_sample(const Tensor<T>& feature, double x, double y);

struct RoI {
  int batch = 0;
  // Corner box in feature-map pixel units, where integer coordinates are
  // pixel centres.
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
};

// Bilinear weights for one sample point; shared by bilinear_sample and roi_align.
struct BilinearTap {
  std::int64_t offset[4];  // y*W + x per corner, -1 when outside the grid
  double weight[4];
};
BilinearTap bilinear_tap(std::int64_t height, std::int64_t width, double x, double y);

// RoIAlign over feature [N,C,H,W] with one bilinear sample at each bin centre.
// Returns [R, C, bins, bins].
template <typename T>
Tensor<T> roi_align(const Tensor<T>& feature, const std::vector<RoI>& rois, int bins);

}  // namespace cascadet
