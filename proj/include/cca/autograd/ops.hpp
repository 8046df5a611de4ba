#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "cca/autograd/tensor.hpp"

namespace cca::ag {

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw Error(ErrorKind::Shape, std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                      " vs " + shape_string(b.shape()));
}

template <typename T>
void require_rank(const Tensor<T>& a, std::size_t rank, const char* op) {
  if (a.shape().size() != rank)
    throw Error(ErrorKind::Shape, std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                                      shape_string(a.shape()));
}

// Elementwise unary op: forward f(x), backward g'(x, y) * dy.
template <typename T, typename F, typename D>
Tensor<T> unary(Tape<T>& tape, const Tensor<T>& x, const char* name, F f, D dfdx) {
  std::vector<T> y(x.size());
  const auto xv = x.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
  auto xn = x.ptr();
  return tape.emit(x.shape(), std::move(y), {&x}, name, [xn, dfdx](Node<T>& out) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (std::size_t i = 0; i < out.grad.size(); ++i)
      xn->grad[i] += dfdx(xn->value[i], out.value[i]) * out.grad[i];
  });
}

// im2col for same-padded stride-1 convolution; cols is (C*k*k) x (N*H*W), row-major.
template <typename T>
void im2col(const T* x, std::size_t N, std::size_t C, std::size_t H, std::size_t W, std::size_t k,
            std::vector<T>& cols) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::size_t HW = H * W;
  const std::size_t ncols = N * HW;
  cols.assign(C * k * k * ncols, T(0));
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* row = cols.data() + ((c * k + ky) * k + kx) * ncols;
        const std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(ky) - pad;
        const std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(kx) - pad;
        for (std::size_t n = 0; n < N; ++n) {
          const T* plane = x + (n * C + c) * HW;
          T* dst = row + n * HW;
          for (std::size_t y = 0; y < H; ++y) {
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + oy;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(H)) continue;
            const std::size_t x0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -ox));
            const std::size_t x1 = static_cast<std::size_t>(
                std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(W), static_cast<std::ptrdiff_t>(W) - ox));
            for (std::size_t xx = x0; xx < x1; ++xx)
              dst[y * W + xx] = plane[static_cast<std::size_t>(sy) * W + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(xx) + ox)];
          }
        }
      }
}

template <typename T>
void col2im_add(const std::vector<T>& cols, std::size_t N, std::size_t C, std::size_t H, std::size_t W,
                std::size_t k, T* dx) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::size_t HW = H * W;
  const std::size_t ncols = N * HW;
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* row = cols.data() + ((c * k + ky) * k + kx) * ncols;
        const std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(ky) - pad;
        const std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(kx) - pad;
        for (std::size_t n = 0; n < N; ++n) {
          T* plane = dx + (n * C + c) * HW;
          const T* src = row + n * HW;
          for (std::size_t y = 0; y < H; ++y) {
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + oy;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(H)) continue;
            const std::size_t x0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -ox));
            const std::size_t x1 = static_cast<std::size_t>(
                std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(W), static_cast<std::ptrdiff_t>(W) - ox));
            for (std::size_t xx = x0; xx < x1; ++xx)
              plane[static_cast<std::size_t>(sy) * W + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(xx) + ox)] += src[y * W + xx];
          }
        }
      }
}

}  // namespace detail

/// Same-padded, stride-1 2-D cross-correlation. x: [N,C,H,W], w: [O,C,k,k] (k odd), b: [O].
/// Works one sample at a time so the column buffer stays cache resident.
template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  detail::require_rank(x, 4, "conv2d");
  detail::require_rank(w, 4, "conv2d");
  detail::require_rank(b, 1, "conv2d");
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = w.dim(0), k = w.dim(2);
  if (w.dim(1) != C || w.dim(3) != k || k % 2 == 0 || b.dim(0) != O)
    throw Error(ErrorKind::Shape, "conv2d: incompatible shapes x" + shape_string(x.shape()) + " w" +
                                      shape_string(w.shape()) + " b" + shape_string(b.shape()));
  const std::size_t HW = H * W;
  const std::size_t K = C * k * k;

  std::vector<T> out(N * O * HW);
  std::vector<T> cols;
  const detail::ConstMapMat<T> wm(w.value().data(), O, K);
  const auto bv = b.value();
  for (std::size_t n = 0; n < N; ++n) {
    detail::im2col(x.value().data() + n * C * HW, 1, C, H, W, k, cols);
    detail::MapMat<T> y(out.data() + n * O * HW, O, HW);
    y.noalias() = wm * detail::ConstMapMat<T>(cols.data(), K, HW);
    for (std::size_t o = 0; o < O; ++o) y.row(o).array() += bv[o];
  }

  auto xn = x.ptr(), wn = w.ptr(), bn = b.ptr();
  return tape.emit({N, O, H, W}, std::move(out), {&x, &w, &b}, "conv2d",
                   [xn, wn, bn, N, C, H, W, O, k, HW, K](Node<T>& node) {
                     if (bn->requires_grad) bn->ensure_grad();
                     if (wn->requires_grad) wn->ensure_grad();
                     if (xn->requires_grad) xn->ensure_grad();
                     std::vector<T> cols;
                     const detail::ConstMapMat<T> wm(wn->value.data(), O, K);
                     for (std::size_t n = 0; n < N; ++n) {
                       const detail::ConstMapMat<T> dy(node.grad.data() + n * O * HW, O, HW);
                       if (bn->requires_grad)
                         for (std::size_t o = 0; o < O; ++o) {
                           const T* row = node.grad.data() + (n * O + o) * HW;
                           T acc = T(0);
                           for (std::size_t i = 0; i < HW; ++i) acc += row[i];
                           bn->grad[o] += acc;
                         }
                       if (wn->requires_grad) {
                         detail::im2col(xn->value.data() + n * C * HW, 1, C, H, W, k, cols);
                         detail::MapMat<T>(wn->grad.data(), O, K).noalias() +=
                             dy * detail::ConstMapMat<T>(cols.data(), K, HW).transpose();
                       }
                       if (xn->requires_grad) {
                         cols.resize(K * HW);
                         detail::MapMat<T>(cols.data(), K, HW).noalias() = wm.transpose() * dy;
                         detail::col2im_add(cols, 1, C, H, W, k, xn->grad.data() + n * C * HW);
                       }
                     }
                   });
}

/// y = x W^T + b. x: [N,In], W: [Out,In], b: [Out].
template <typename T>
Tensor<T> dense(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  detail::require_rank(x, 2, "dense");
  detail::require_rank(w, 2, "dense");
  detail::require_rank(b, 1, "dense");
  const std::size_t N = x.dim(0), In = x.dim(1), Out = w.dim(0);
  if (w.dim(1) != In || b.dim(0) != Out)
    throw Error(ErrorKind::Shape, "dense: incompatible shapes x" + shape_string(x.shape()) + " w" +
                                      shape_string(w.shape()));
  // Plain loops: the matrices are small and a fixed summation order keeps
  // results independent of buffer alignment.
  std::vector<T> out(N * Out);
  const auto xv = x.value(), wv = w.value(), bv = b.value();
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < Out; ++o) {
      T acc = bv[o];
      for (std::size_t i = 0; i < In; ++i) acc += xv[n * In + i] * wv[o * In + i];
      out[n * Out + o] = acc;
    }

  auto xn = x.ptr(), wn = w.ptr(), bn = b.ptr();
  return tape.emit({N, Out}, std::move(out), {&x, &w, &b}, "dense", [xn, wn, bn, N, In, Out](Node<T>& node) {
    const T* dy = node.grad.data();
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < Out; ++o) bn->grad[o] += dy[n * Out + o];
    }
    if (wn->requires_grad) {
      wn->ensure_grad();
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < Out; ++o)
          for (std::size_t i = 0; i < In; ++i) wn->grad[o * In + i] += dy[n * Out + o] * xn->value[n * In + i];
    }
    if (xn->requires_grad) {
      xn->ensure_grad();
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < Out; ++o)
          for (std::size_t i = 0; i < In; ++i) xn->grad[n * In + i] += dy[n * Out + o] * wn->value[o * In + i];
    }
  });
}

/// Subgradient at 0 is 0.
template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x) {
  return detail::unary(
      tape, x, "relu", [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(Tape<T>& tape, const Tensor<T>& x) {
  return detail::unary(
      tape, x, "sigmoid",
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

/// Subgradient at 0 is 0.
template <typename T>
Tensor<T> abs(Tape<T>& tape, const Tensor<T>& x) {
  return detail::unary(
      tape, x, "abs", [](T v) { return std::abs(v); },
      [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

/// Throws ErrorKind::Domain on nonpositive input.
template <typename T>
Tensor<T> log(Tape<T>& tape, const Tensor<T>& x) {
  for (T v : x.value())
    if (!(v > T(0))) throw Error(ErrorKind::Domain, "log of nonpositive value");
  return detail::unary(
      tape, x, "log", [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> exp(Tape<T>& tape, const Tensor<T>& x) {
  return detail::unary(
      tape, x, "exp", [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& x, T factor) {
  return detail::unary(
      tape, x, "scale", [factor](T v) { return factor * v; }, [factor](T, T) { return factor; });
}

/// Gradient passes inside [lo, hi] and is zero outside.
template <typename T>
Tensor<T> clamp(Tape<T>& tape, const Tensor<T>& x, T lo, T hi) {
  return detail::unary(
      tape, x, "clamp", [lo, hi](T v) { return std::clamp(v, lo, hi); },
      [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] + b.value()[i];
  auto an = a.ptr(), bn = b.ptr();
  return tape.emit(a.shape(), std::move(y), {&a, &b}, "add", [an, bn](Node<T>& out) {
    for (auto* in : {an.get(), bn.get()}) {
      if (!in->requires_grad) continue;
      in->ensure_grad();
      for (std::size_t i = 0; i < out.grad.size(); ++i) in->grad[i] += out.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] - b.value()[i];
  auto an = a.ptr(), bn = b.ptr();
  return tape.emit(a.shape(), std::move(y), {&a, &b}, "sub", [an, bn](Node<T>& out) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < out.grad.size(); ++i) an->grad[i] += out.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < out.grad.size(); ++i) bn->grad[i] -= out.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<T> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] * b.value()[i];
  auto an = a.ptr(), bn = b.ptr();
  return tape.emit(a.shape(), std::move(y), {&a, &b}, "mul", [an, bn](Node<T>& out) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < out.grad.size(); ++i) an->grad[i] += bn->value[i] * out.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < out.grad.size(); ++i) bn->grad[i] += an->value[i] * out.grad[i];
    }
  });
}

/// Concatenation along axis 1 of rank-2 or rank-4 tensors.
template <typename T>
Tensor<T> concat(Tape<T>& tape, const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw Error(ErrorKind::Shape, "concat: no inputs");
  const Shape& s0 = parts.front().shape();
  if (s0.size() != 2 && s0.size() != 4) throw Error(ErrorKind::Shape, "concat: rank must be 2 or 4");
  const std::size_t N = s0[0];
  const std::size_t inner = s0.size() == 4 ? s0[2] * s0[3] : 1;
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != s0.size() || s[0] != N || (s.size() == 4 && (s[2] != s0[2] || s[3] != s0[3])))
      throw Error(ErrorKind::Shape, "concat: incompatible shape " + shape_string(s));
    total += s[1];
  }
  Shape shape = s0;
  shape[1] = total;
  std::vector<T> y(N * total * inner);
  std::size_t offset = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    const std::size_t c = p.dim(1);
    widths.push_back(c);
    for (std::size_t n = 0; n < N; ++n)
      std::copy_n(p.value().data() + n * c * inner, c * inner, y.data() + (n * total + offset) * inner);
    offset += c;
  }
  bool needs = false;
  std::vector<std::shared_ptr<Node<T>>> nodes;
  for (const auto& p : parts) {
    needs = needs || p.requires_grad();
    nodes.push_back(p.ptr());
  }
  return tape.emit_if(needs, std::move(shape), std::move(y), "concat",
                      [nodes, widths, N, total, inner](Node<T>& out) {
                        std::size_t off = 0;
                        for (std::size_t i = 0; i < nodes.size(); ++i) {
                          const std::size_t c = widths[i];
                          if (nodes[i]->requires_grad) {
                            nodes[i]->ensure_grad();
                            for (std::size_t n = 0; n < N; ++n) {
                              const T* src = out.grad.data() + (n * total + off) * inner;
                              T* dst = nodes[i]->grad.data() + n * c * inner;
                              for (std::size_t j = 0; j < c * inner; ++j) dst[j] += src[j];
                            }
                          }
                          off += c;
                        }
                      });
}

/// 2x2 max pooling, stride 2. H and W must be even. Ties resolve to the first
/// element in row-major order.
template <typename T>
Tensor<T> maxpool2(Tape<T>& tape, const Tensor<T>& x) {
  detail::require_rank(x, 4, "maxpool2");
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H % 2 || W % 2) throw Error(ErrorKind::Shape, "maxpool2: spatial size must be even");
  const std::size_t Ho = H / 2, Wo = W / 2;
  std::vector<T> y(N * C * Ho * Wo);
  std::vector<std::size_t> arg(y.size());
  const auto xv = x.value();
  for (std::size_t p = 0; p < N * C; ++p)
    for (std::size_t oy = 0; oy < Ho; ++oy)
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        std::size_t best = p * H * W + (2 * oy) * W + 2 * ox;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t i = p * H * W + (2 * oy + dy) * W + 2 * ox + dx;
            if (xv[i] > xv[best]) best = i;
          }
        const std::size_t o = (p * Ho + oy) * Wo + ox;
        y[o] = xv[best];
        arg[o] = best;
      }
  auto xn = x.ptr();
  return tape.emit({N, C, Ho, Wo}, std::move(y), {&x}, "maxpool2", [xn, arg](Node<T>& out) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (std::size_t o = 0; o < out.grad.size(); ++o) xn->grad[arg[o]] += out.grad[o];
  });
}

/// [N,C,H,W] -> [N,C]
template <typename T>
Tensor<T> global_avg_pool(Tape<T>& tape, const Tensor<T>& x) {
  detail::require_rank(x, 4, "global_avg_pool");
  const std::size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  std::vector<T> y(N * C);
  const auto xv = x.value();
  for (std::size_t p = 0; p < N * C; ++p) {
    T acc = 0;
    for (std::size_t i = 0; i < HW; ++i) acc += xv[p * HW + i];
    y[p] = acc / static_cast<T>(HW);
  }
  auto xn = x.ptr();
  return tape.emit({N, C}, std::move(y), {&x}, "global_avg_pool", [xn, HW](Node<T>& out) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    const T inv = T(1) / static_cast<T>(HW);
    for (std::size_t p = 0; p < out.grad.size(); ++p)
      for (std::size_t i = 0; i < HW; ++i) xn->grad[p * HW + i] += out.grad[p] * inv;
  });
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.value()) acc += v;
  auto xn = x.ptr();
  return tape.emit({1}, {acc}, {&x}, "sum", [xn](Node<T>& out) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (T& g : xn->grad) g += out.grad[0];
  });
}

template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x) {
  return scale(tape, sum(tape, x), T(1) / static_cast<T>(x.size()));
}

}  // namespace cca::ag
