#include "cascadet/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cascadet {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
using NodeT = detail::Node<T>;

struct ConvGeometry {
  std::int64_t n, c, h, w;
  std::int64_t k, kh, kw;
  std::int64_t ho, wo;
  int stride, pad_h, pad_w;

  std::int64_t patch() const { return c * kh * kw; }
  std::int64_t out_plane() const { return ho * wo; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad_h == 0 && pad_w == 0; }
};

template <typename T>
void im2col(const T* in, const ConvGeometry& g, T* col) {
  const std::int64_t q = g.out_plane();
  for (std::int64_t c = 0; c < g.c; ++c) {
    const T* plane = in + c * g.h * g.w;
    for (std::int64_t ki = 0; ki < g.kh; ++ki) {
      for (std::int64_t kj = 0; kj < g.kw; ++kj) {
        T* row = col + ((c * g.kh + ki) * g.kw + kj) * q;
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad_h + ki;
          T* dst = row + oy * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.wo, T(0));
            continue;
          }
          const T* src = plane + iy * g.w;
          for (std::int64_t ox = 0; ox < g.wo; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad_w + kj;
            dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* in_grad) {
  const std::int64_t q = g.out_plane();
  for (std::int64_t c = 0; c < g.c; ++c) {
    T* plane = in_grad + c * g.h * g.w;
    for (std::int64_t ki = 0; ki < g.kh; ++ki) {
      for (std::int64_t kj = 0; kj < g.kw; ++kj) {
        const T* row = col + ((c * g.kh + ki) * g.kw + kj) * q;
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad_h + ki;
          if (iy < 0 || iy >= g.h) continue;
          const T* src = row + oy * g.wo;
          T* dst = plane + iy * g.w;
          for (std::int64_t ox = 0; ox < g.wo; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad_w + kj;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
bool is_scalar(const Tensor<T>& t) {
  return t.numel() == 1 && t.rank() <= 1;
}

enum class BinaryKind { Add, Sub, Mul };

template <typename T>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, BinaryKind kind) {
  const bool same = a.shape() == b.shape();
  const bool a_scalar = !same && is_scalar(a);
  const bool b_scalar = !same && is_scalar(b);
  if (!same && !a_scalar && !b_scalar) {
    throw std::invalid_argument("elementwise op on non-broadcastable shapes " + shape_str(a.shape()) + " and " +
                                shape_str(b.shape()));
  }
  const Shape out_shape = a_scalar ? b.shape() : a.shape();
  const auto n = static_cast<std::size_t>(shape_numel(out_shape));
  auto ad = a.data();
  auto bd = b.data();
  auto av = [&](std::size_t i) { return a_scalar ? ad[0] : ad[i]; };
  auto bv = [&](std::size_t i) { return b_scalar ? bd[0] : bd[i]; };
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (kind) {
      case BinaryKind::Add: out[i] = av(i) + bv(i); break;
      case BinaryKind::Sub: out[i] = av(i) - bv(i); break;
      case BinaryKind::Mul: out[i] = av(i) * bv(i); break;
    }
  }
  return make_result<T>(out_shape, std::move(out), {a.node(), b.node()},
                        [kind, a_scalar, b_scalar](NodeT<T>& self) {
                          auto& na = *self.inputs[0];
                          auto& nb = *self.inputs[1];
                          const std::size_t n = self.grad.size();
                          if (na.requires_grad) {
                            na.ensure_grad();
                            for (std::size_t i = 0; i < n; ++i) {
                              T g = self.grad[i];
                              if (kind == BinaryKind::Mul) g *= nb.value[b_scalar ? 0 : i];
                              na.grad[a_scalar ? 0 : i] += g;
                            }
                          }
                          if (nb.requires_grad) {
                            nb.ensure_grad();
                            for (std::size_t i = 0; i < n; ++i) {
                              T g = self.grad[i];
                              if (kind == BinaryKind::Sub) g = -g;
                              if (kind == BinaryKind::Mul) g *= na.value[a_scalar ? 0 : i];
                              nb.grad[b_scalar ? 0 : i] += g;
                            }
                          }
                        });
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias, Conv2dOptions options) {
  if (input.rank() != 4) throw std::invalid_argument("conv2d: input must be [N,C,H,W], got " + shape_str(input.shape()));
  if (kernel.rank() != 4) {
    throw std::invalid_argument("conv2d: kernel must be [K,C,kh,kw], got " + shape_str(kernel.shape()));
  }
  if (input.dim(1) != kernel.dim(1)) {
    throw std::invalid_argument("conv2d: input channels " + std::to_string(input.dim(1)) +
                                " do not match kernel channels " + std::to_string(kernel.dim(1)));
  }
  if (options.stride < 1 || options.pad_h < 0 || options.pad_w < 0) {
    throw std::invalid_argument("conv2d: stride must be >= 1 and padding >= 0");
  }
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), kernel.dim(0), kernel.dim(2),
                 kernel.dim(3), 0, 0, options.stride, options.pad_h, options.pad_w};
  if (g.h + 2 * g.pad_h < g.kh || g.w + 2 * g.pad_w < g.kw) {
    throw std::invalid_argument("conv2d: padded input " + shape_str(input.shape()) + " smaller than kernel " +
                                shape_str(kernel.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.k)) {
    throw std::invalid_argument("conv2d: bias must be [" + std::to_string(g.k) + "], got " + shape_str(bias.shape()));
  }
  g.ho = (g.h + 2 * g.pad_h - g.kh) / g.stride + 1;
  g.wo = (g.w + 2 * g.pad_w - g.kw) / g.stride + 1;

  const std::int64_t p = g.patch();
  const std::int64_t q = g.out_plane();
  std::vector<T> out(static_cast<std::size_t>(g.n * g.k * q));
  std::vector<T> col(g.pointwise() ? 0 : static_cast<std::size_t>(p * q));
  CMapMat<T> weights(kernel.data().data(), g.k, p);
  for (std::int64_t n = 0; n < g.n; ++n) {
    const T* in_n = input.data().data() + n * g.c * g.h * g.w;
    const T* col_ptr = in_n;
    if (!g.pointwise()) {
      im2col(in_n, g, col.data());
      col_ptr = col.data();
    }
    MapMat<T> out_n(out.data() + n * g.k * q, g.k, q);
    out_n.noalias() = weights * CMapMat<T>(col_ptr, p, q);
    if (bias.defined()) {
      for (std::int64_t k = 0; k < g.k; ++k) out_n.row(k).array() += bias.data()[static_cast<std::size_t>(k)];
    }
  }

  std::vector<std::shared_ptr<NodeT<T>>> inputs{input.node(), kernel.node()};
  if (bias.defined()) inputs.push_back(bias.node());
  return make_result<T>({g.n, g.k, g.ho, g.wo}, std::move(out), std::move(inputs), [g](NodeT<T>& self) {
    auto& x = *self.inputs[0];
    auto& w = *self.inputs[1];
    NodeT<T>* b = self.inputs.size() > 2 ? self.inputs[2].get() : nullptr;
    const std::int64_t p = g.patch();
    const std::int64_t q = g.out_plane();
    std::vector<T> col(g.pointwise() ? 0 : static_cast<std::size_t>(p * q));
    std::vector<T> dcol(x.requires_grad && !g.pointwise() ? static_cast<std::size_t>(p * q) : 0);
    if (w.requires_grad) w.ensure_grad();
    if (x.requires_grad) x.ensure_grad();
    if (b && b->requires_grad) b->ensure_grad();
    CMapMat<T> weights(w.value.data(), g.k, p);
    for (std::int64_t n = 0; n < g.n; ++n) {
      CMapMat<T> dout(self.grad.data() + n * g.k * q, g.k, q);
      const T* in_n = x.value.data() + n * g.c * g.h * g.w;
      if (w.requires_grad) {
        const T* col_ptr = in_n;
        if (!g.pointwise()) {
          im2col(in_n, g, col.data());
          col_ptr = col.data();
        }
        MapMat<T> dw(w.grad.data(), g.k, p);
        dw.noalias() += dout * CMapMat<T>(col_ptr, p, q).transpose();
      }
      if (b && b->requires_grad) {
        for (std::int64_t k = 0; k < g.k; ++k) {
          const T* row = self.grad.data() + (n * g.k + k) * q;
          T total = 0;
          for (std::int64_t j = 0; j < q; ++j) total += row[j];
          b->grad[static_cast<std::size_t>(k)] += total;
        }
      }
      if (x.requires_grad) {
        T* dx_n = x.grad.data() + n * g.c * g.h * g.w;
        if (g.pointwise()) {
          MapMat<T>(dx_n, p, q).noalias() += weights.transpose() * dout;
        } else {
          MapMat<T>(dcol.data(), p, q).noalias() = weights.transpose() * dout;
          col2im_add(dcol.data(), g, dx_n);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  auto xd = x.data();
  std::vector<T> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] > T(0) ? xd[i] : T(0);
  return make_result<T>(x.shape(), std::move(out), {x.node()}, [](NodeT<T>& self) {
    auto& in = *self.inputs[0];
    in.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (in.value[i] > T(0)) in.grad[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  auto xd = x.data();
  std::vector<T> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = xd[i];
    if (v >= T(0)) {
      out[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      out[i] = e / (T(1) + e);
    }
  }
  return make_result<T>(x.shape(), std::move(out), {x.node()}, [](NodeT<T>& self) {
    auto& in = *self.inputs[0];
    in.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T y = self.value[i];
      in.grad[i] += self.grad[i] * y * (T(1) - y);
    }
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinaryKind::Add);
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinaryKind::Sub);
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinaryKind::Mul);
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  auto ad = a.data();
  std::vector<T> out(ad.begin(), ad.end());
  for (auto& v : out) v += s;
  return make_result<T>(a.shape(), std::move(out), {a.node()}, [](NodeT<T>& self) {
    auto& in = *self.inputs[0];
    in.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T s) {
  auto ad = a.data();
  std::vector<T> out(ad.begin(), ad.end());
  for (auto& v : out) v *= s;
  return make_result<T>(a.shape(), std::move(out), {a.node()}, [s](NodeT<T>& self) {
    auto& in = *self.inputs[0];
    in.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i] * s;
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T total = 0;
  for (T v : x.data()) total += v;
  return make_result<T>({}, {total}, {x.node()}, [](NodeT<T>& self) {
    auto& in = *self.inputs[0];
    in.ensure_grad();
    const T g = self.grad[0];
    for (auto& v : in.grad) v += g;
  });
}

template <typename T>
Tensor<T> sum_scalars(const std::vector<Tensor<T>>& terms) {
  T total = 0;
  std::vector<std::shared_ptr<NodeT<T>>> inputs;
  for (const auto& t : terms) {
    total += t.item();
    inputs.push_back(t.node());
  }
  return make_result<T>({}, {total}, std::move(inputs), [](NodeT<T>& self) {
    for (auto& in : self.inputs) {
      if (!in->requires_grad) continue;
      in->ensure_grad();
      in->grad[0] += self.grad[0];
    }
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  auto xd = x.data();
  return make_result<T>(std::move(shape), std::vector<T>(xd.begin(), xd.end()), {x.node()}, [](NodeT<T>& self) {
    auto& in = *self.inputs[0];
    in.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw std::invalid_argument("concat: axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
    if (!ok) throw std::invalid_argument("concat: incompatible shapes " + shape_str(first) + " and " + shape_str(s));
    out_shape[axis] += s[axis];
  }
  std::int64_t outer = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  std::int64_t inner = 1;
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];

  std::vector<std::int64_t> widths;
  std::vector<T> out(static_cast<std::size_t>(shape_numel(out_shape)));
  const std::int64_t out_row = out_shape[axis] * inner;
  std::int64_t col = 0;
  std::vector<std::shared_ptr<NodeT<T>>> inputs;
  for (const auto& p : parts) {
    const std::int64_t width = p.shape()[axis] * inner;
    const T* src = p.data().data();
    for (std::int64_t o = 0; o < outer; ++o) {
      std::copy(src + o * width, src + (o + 1) * width, out.data() + o * out_row + col);
    }
    col += width;
    widths.push_back(width);
    inputs.push_back(p.node());
  }
  return make_result<T>(std::move(out_shape), std::move(out), std::move(inputs),
                        [widths, outer, out_row](NodeT<T>& self) {
                          std::int64_t col = 0;
                          for (std::size_t i = 0; i < self.inputs.size(); ++i) {
                            auto& in = *self.inputs[i];
                            const std::int64_t width = widths[i];
                            if (in.requires_grad) {
                              in.ensure_grad();
                              for (std::int64_t o = 0; o < outer; ++o) {
                                const T* src = self.grad.data() + o * out_row + col;
                                T* dst = in.grad.data() + o * width;
                                for (std::int64_t j = 0; j < width; ++j) dst[j] += src[j];
                              }
                            }
                            col += width;
                          }
                        });
}

template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& x) {
  if (x.rank() != 4) throw std::invalid_argument("upsample_nearest2x: need [N,C,H,W], got " + shape_str(x.shape()));
  const std::int64_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  std::vector<T> out(static_cast<std::size_t>(planes * 4 * h * w));
  const T* src = x.data().data();
  for (std::int64_t p = 0; p < planes; ++p) {
    for (std::int64_t i = 0; i < 2 * h; ++i) {
      for (std::int64_t j = 0; j < 2 * w; ++j) {
        out[static_cast<std::size_t>((p * 2 * h + i) * 2 * w + j)] = src[(p * h + i / 2) * w + j / 2];
      }
    }
  }
  return make_result<T>({x.dim(0), x.dim(1), 2 * h, 2 * w}, std::move(out), {x.node()},
                        [planes, h, w](NodeT<T>& self) {
                          auto& in = *self.inputs[0];
                          in.ensure_grad();
                          for (std::int64_t p = 0; p < planes; ++p) {
                            for (std::int64_t i = 0; i < 2 * h; ++i) {
                              for (std::int64_t j = 0; j < 2 * w; ++j) {
                                in.grad[static_cast<std::size_t>((p * h + i / 2) * w + j / 2)] +=
                                    self.grad[static_cast<std::size_t>((p * 2 * h + i) * 2 * w + j)];
                              }
                            }
                          }
                        });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<std::int64_t>& rows) {
  if (x.rank() == 0) throw std::invalid_argument("gather_rows: need rank >= 1");
  const std::int64_t count = x.dim(0);
  const std::int64_t width = count ? x.numel() / count : 0;
  Shape out_shape = x.shape();
  out_shape[0] = static_cast<std::int64_t>(rows.size());
  std::vector<T> out(static_cast<std::size_t>(shape_numel(out_shape)));
  const T* src = x.data().data();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= count) throw std::invalid_argument("gather_rows: row index out of range");
    std::copy(src + rows[r] * width, src + (rows[r] + 1) * width, out.data() + static_cast<std::int64_t>(r) * width);
  }
  return make_result<T>(std::move(out_shape), std::move(out), {x.node()}, [rows, width](NodeT<T>& self) {
    auto& in = *self.inputs[0];
    in.ensure_grad();
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const T* g = self.grad.data() + static_cast<std::int64_t>(r) * width;
      T* dst = in.grad.data() + rows[r] * width;
      for (std::int64_t j = 0; j < width; ++j) dst[j] += g[j];
    }
  });
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  if (x.rank() != 4) throw std::invalid_argument("global_avg_pool: need [N,C,H,W], got " + shape_str(x.shape()));
  const std::int64_t planes = x.dim(0) * x.dim(1), area = x.dim(2) * x.dim(3);
  std::vector<T> out(static_cast<std::size_t>(planes));
  const T* src = x.data().data();
  for (std::int64_t p = 0; p < planes; ++p) {
    T s = 0;
    for (std::int64_t i = 0; i < area; ++i) s += src[p * area + i];
    out[static_cast<std::size_t>(p)] = s / static_cast<T>(area);
  }
  return make_result<T>({x.dim(0), x.dim(1)}, std::move(out), {x.node()}, [planes, area](NodeT<T>& self) {
    auto& in = *self.inputs[0];
    in.ensure_grad();
    for (std::int64_t p = 0; p < planes; ++p) {
      const T g = self.grad[static_cast<std::size_t>(p)] / static_cast<T>(area);
      for (std::int64_t i = 0; i < area; ++i) in.grad[static_cast<std::size_t>(p * area + i)] += g;
    }
  });
}

template <typename T>
Tensor<T> to_anchor_major(const Tensor<T>& x, int k) {
  if (x.rank() != 4 || k < 1 || x.dim(1) % k != 0) {
    throw std::invalid_argument("to_anchor_major: channels of " + shape_str(x.shape()) + " not a multiple of " +
                                std::to_string(k));
  }
  const std::int64_t n = x.dim(0), a = x.dim(1) / k, h = x.dim(2), w = x.dim(3);
  const std::int64_t rows = h * w * a;
  std::vector<std::int64_t> index(static_cast<std::size_t>(n * rows * k));
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t i = 0; i < h; ++i) {
      for (std::int64_t j = 0; j < w; ++j) {
        for (std::int64_t ai = 0; ai < a; ++ai) {
          for (std::int64_t c = 0; c < k; ++c) {
            const std::int64_t dst = (b * rows + (i * w + j) * a + ai) * k + c;
            const std::int64_t src = ((b * a * k + ai * k + c) * h + i) * w + j;
            index[static_cast<std::size_t>(dst)] = src;
          }
        }
      }
    }
  }
  auto xd = x.data();
  std::vector<T> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) out[i] = xd[static_cast<std::size_t>(index[i])];
  return make_result<T>({n, rows, k}, std::move(out), {x.node()}, [index = std::move(index)](NodeT<T>& self) {
    auto& in = *self.inputs[0];
    in.ensure_grad();
    for (std::size_t i = 0; i < index.size(); ++i) in.grad[static_cast<std::size_t>(index[i])] += self.grad[i];
  });
}

BilinearTap bilinear_tap(std::int64_t height, std::int64_t width, double x, double y) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const double lx = x - fx;
  const double ly = y - fy;
  const auto x0 = static_cast<std::int64_t>(fx);
  const auto y0 = static_cast<std::int64_t>(fy);
  const std::int64_t xs[4] = {x0, x0 + 1, x0, x0 + 1};
  const std::int64_t ys[4] = {y0, y0, y0 + 1, y0 + 1};
  const double ws[4] = {(1 - ly) * (1 - lx), (1 - ly) * lx, ly * (1 - lx), ly * lx};
  BilinearTap tap{};
  for (int c = 0; c < 4; ++c) {
    const bool inside = xs[c] >= 0 && xs[c] < width && ys[c] >= 0 && ys[c] < height;
    tap.offset[c] = inside ? ys[c] * width + xs[c] : -1;
    tap.weight[c] = inside ? ws[c] : 0.0;
  }
  return tap;
}

template <typename T>
Tensor<T> bilinear_sample(const Tensor<T>& feature, double x, double y) {
  if (feature.rank() != 3) throw std::invalid_argument("bilinear_sample: need [C,H,W], got " + shape_str(feature.shape()));
  const std::int64_t c = feature.dim(0), h = feature.dim(1), w = feature.dim(2);
  const BilinearTap tap = bilinear_tap(h, w, x, y);
  std::vector<T> out(static_cast<std::size_t>(c), T(0));
  const T* src = feature.data().data();
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (int k = 0; k < 4; ++k) {
      if (tap.offset[k] >= 0) out[static_cast<std::size_t>(ch)] += static_cast<T>(tap.weight[k]) * src[ch * h * w + tap.offset[k]];
    }
  }
  return make_result<T>({c}, std::move(out), {feature.node()}, [tap, c, h, w](NodeT<T>& self) {
    auto& in = *self.inputs[0];
    in.ensure_grad();
    for (std::int64_t ch = 0; ch < c; ++ch) {
      for (int k = 0; k < 4; ++k) {
        if (tap.offset[k] >= 0) {
          in.grad[static_cast<std::size_t>(ch * h * w + tap.offset[k])] +=
              static_cast<T>(tap.weight[k]) * self.grad[static_cast<std::size_t>(ch)];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> roi_align(const Tensor<T>& feature, const std::vector<RoI>& rois, int bins) {
  if (feature.rank() != 4) throw std::invalid_argument("roi_align: need [N,C,H,W], got " + shape_str(feature.shape()));
  if (bins < 1) throw std::invalid_argument("roi_align: bins must be positive");
  const std::int64_t n = feature.dim(0), c = feature.dim(1), h = feature.dim(2), w = feature.dim(3);
  const auto r = static_cast<std::int64_t>(rois.size());
  const std::int64_t cells = static_cast<std::int64_t>(bins) * bins;
  std::vector<BilinearTap> taps;
  std::vector<std::int64_t> base;
  taps.reserve(static_cast<std::size_t>(r * cells));
  for (const RoI& roi : rois) {
    if (roi.batch < 0 || roi.batch >= n) throw std::invalid_argument("roi_align: RoI batch index out of range");
    if (!(roi.x2 > roi.x1) || !(roi.y2 > roi.y1)) throw std::invalid_argument("roi_align: degenerate RoI");
    const double bw = (roi.x2 - roi.x1) / bins;
    const double bh = (roi.y2 - roi.y1) / bins;
    for (int by = 0; by < bins; ++by) {
      for (int bx = 0; bx < bins; ++bx) {
        taps.push_back(bilinear_tap(h, w, roi.x1 + (bx + 0.5) * bw, roi.y1 + (by + 0.5) * bh));
      }
    }
    base.push_back(static_cast<std::int64_t>(roi.batch) * c * h * w);
  }
  std::vector<T> out(static_cast<std::size_t>(r * c * cells), T(0));
  const T* src = feature.data().data();
  for (std::int64_t ri = 0; ri < r; ++ri) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const T* plane = src + base[static_cast<std::size_t>(ri)] + ch * h * w;
      T* dst = out.data() + (ri * c + ch) * cells;
      for (std::int64_t cell = 0; cell < cells; ++cell) {
        const BilinearTap& tap = taps[static_cast<std::size_t>(ri * cells + cell)];
        T v = 0;
        for (int k = 0; k < 4; ++k) {
          if (tap.offset[k] >= 0) v += static_cast<T>(tap.weight[k]) * plane[tap.offset[k]];
        }
        dst[cell] = v;
      }
    }
  }
  return make_result<T>({r, c, bins, bins}, std::move(out), {feature.node()},
                        [taps = std::move(taps), base = std::move(base), r, c, h, w, cells](NodeT<T>& self) {
                          auto& in = *self.inputs[0];
                          in.ensure_grad();
                          for (std::int64_t ri = 0; ri < r; ++ri) {
                            for (std::int64_t ch = 0; ch < c; ++ch) {
                              T* plane = in.grad.data() + base[static_cast<std::size_t>(ri)] + ch * h * w;
                              const T* g = self.grad.data() + (ri * c + ch) * cells;
                              for (std::int64_t cell = 0; cell < cells; ++cell) {
                                const BilinearTap& tap = taps[static_cast<std::size_t>(ri * cells + cell)];
                                for (int k = 0; k < 4; ++k) {
                                  if (tap.offset[k] >= 0) plane[tap.offset[k]] += static_cast<T>(tap.weight[k]) * g[cell];
                                }
                              }
                            }
                          }
                        });
}

#define CASCADET_INSTANTIATE_OPS(T)                                                                 \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Conv2dOptions);   \
  template Tensor<T> relu(const Tensor<T>&);                                                       \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                    \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                              \
  template Tensor<T> mul_scalar(const Tensor<T>&, T);                                              \
  template Tensor<T> sum(const Tensor<T>&);                                                        \
  template Tensor<T> sum_scalars(const std::vector<Tensor<T>>&);                                   \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                             \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                           \
  template Tensor<T> upsample_nearest2x(const Tensor<T>&);                                         \
  template Tensor<T> gather_rows(const Tensor<T>&, const std::vector<std::int64_t>&); \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                            \
  template Tensor<T> to_anchor_major(const Tensor<T>&, int);                                       \
  template Tensor<T> bilinear_sample(const Tensor<T>&, double, double);                            \
  template Tensor<T> roi_align(const Tensor<T>&, const std::vector<RoI>&, int);

CASCADET_INSTANTIATE_OPS(float)
CASCADET_INSTANTIATE_OPS(double)

}  // namespace cascadet
