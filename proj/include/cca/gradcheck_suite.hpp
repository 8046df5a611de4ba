#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cca {

struct GradcheckRow {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  double tolerance = 1e-4;

  bool passed() const { return max_rel_error < tolerance; }
};

/// Finite-difference checks (float64, central, eps 1e-4) for every autograd
/// op and the three losses, plus a 10-parameter subset of a full DDN graph
/// (eps 1e-6, tolerance 1e-3).
std::vector<GradcheckRow> run_gradcheck_suite(std::uint64_t seed = 1);

}  // namespace cca
