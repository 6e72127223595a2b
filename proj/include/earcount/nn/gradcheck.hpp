#pragma once

// Central finite-difference gradient verification. Intended for 64-bit
// builds of the graph; at 32 bits the truncation error swamps the check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "earcount/nn/tensor.hpp"

namespace earcount::nn {

struct GradCheckResult {
  double relative_error = 0.0;  // |g_a - g_n| / max(|g_a| + |g_n|, tiny), 2-norms
  double max_abs_error = 0.0;
  Index checked = 0;
};

/// `loss` must rebuild the graph from the current values of `inputs` and
/// return a scalar tensor. Analytic gradients come from one backward pass;
/// numeric ones perturb each element by +-step.
inline GradCheckResult check_gradients(const std::function<Tensor<double>()>& loss,
                                       std::vector<Tensor<double>> inputs, double step = 1e-6) {
  for (auto& t : inputs) t.zero_grad();
  loss().backward();
  std::vector<Vector<double>> analytic;
  for (auto& t : inputs) analytic.push_back(t.grad());

  double diff_sq = 0.0, a_sq = 0.0, n_sq = 0.0;
  GradCheckResult r;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Vector<double>& v = inputs[k].value();
    for (Index i = 0; i < v.size(); ++i) {
      const double saved = v[i];
      v[i] = saved + step;
      const double up = loss().item();
      v[i] = saved - step;
      const double down = loss().item();
      v[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double d = analytic[k][i] - numeric;
      diff_sq += d * d;
      a_sq += analytic[k][i] * analytic[k][i];
      n_sq += numeric * numeric;
      r.max_abs_error = std::max(r.max_abs_error, std::abs(d));
      ++r.checked;
    }
  }
  const double denom = std::max(std::sqrt(a_sq) + std::sqrt(n_sq), 1e-300);
  r.relative_error = std::sqrt(diff_sq) / denom;
  return r;
}

}  // namespace earcount::nn
