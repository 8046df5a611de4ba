#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "cca/autograd/tensor.hpp"

namespace cca::ag {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <std::floating_point T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::int64_t step = 0;
};

/// One bias-corrected ADAM update of every parameter from its accumulated grad.
/// Parameters without an allocated grad are treated as having zero gradient.
template <std::floating_point T>
void adam_step(std::span<Tensor<T>> params, AdamState<T>& state, const AdamOptions& opt) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), T(0));
      state.v.emplace_back(p.size(), T(0));
    }
  }
  if (state.m.size() != params.size()) throw Error(ErrorKind::Shape, "adam: state does not match params");
  ++state.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(opt.beta1), b2 = static_cast<T>(opt.beta2);
  const T step_size = static_cast<T>(opt.lr / c1);
  const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(c2));
  const T eps = static_cast<T>(opt.eps);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor<T>& p = params[k];
    if (state.m[k].size() != p.size()) throw Error(ErrorKind::Shape, "adam: state shape mismatch");
    if (!p.has_grad()) continue;
    auto value = p.value();
    auto grad = p.grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const T g = grad[i];
      m[i] = b1 * m[i] + (T(1) - b1) * g;
      v[i] = b2 * v[i] + (T(1) - b2) * g * g;
      value[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_c2 + eps);
    }
  }
}

}  // namespace cca::ag
