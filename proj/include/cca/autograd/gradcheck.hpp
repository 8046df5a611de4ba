#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "cca/autograd/tensor.hpp"
#include "cca/rng.hpp"

namespace cca::ag {

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Builds a scalar loss from the current leaf values on the given tape.
using LossBuilder = std::function<Tensor<double>(Tape<double>&)>;

/// Compares backward gradients of `leaves` against central differences.
/// With `subset` > 0 only that many (leaf, index) pairs, drawn with `seed`,
/// are checked. Relative error is |a - n| / max(|a|, |n|, floor).
inline GradcheckResult gradcheck(std::vector<Tensor<double>> leaves, const LossBuilder& build, double eps = 1e-4,
                                 std::size_t subset = 0, std::uint64_t seed = 0, double floor = 1e-6) {
  for (auto& l : leaves) l.zero_grad();
  {
    Tape<double> tape;
    Tensor<double> loss = build(tape);
    tape.backward(loss);
  }
  std::vector<std::pair<std::size_t, std::size_t>> sites;
  for (std::size_t k = 0; k < leaves.size(); ++k)
    for (std::size_t i = 0; i < leaves[k].size(); ++i) sites.emplace_back(k, i);
  if (subset > 0 && subset < sites.size()) {
    Rng rng(seed);
    rng.shuffle(sites.begin(), sites.end());
    sites.resize(subset);
  }
  auto eval = [&] {
    Tape<double> tape(false);
    return build(tape).item();
  };
  GradcheckResult res;
  for (auto [k, i] : sites) {
    auto v = leaves[k].value();
    const double v0 = v[i];
    v[i] = v0 + eps;
    const double lp = eval();
    v[i] = v0 - eps;
    const double lm = eval();
    v[i] = v0;
    const double numeric = (lp - lm) / (2.0 * eps);
    const double analytic = leaves[k].grad()[i];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    res.max_rel_error = std::max(res.max_rel_error, std::abs(analytic - numeric) / denom);
    ++res.checked;
  }
  return res;
}

}  // namespace cca::ag
