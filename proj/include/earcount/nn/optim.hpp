#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "earcount/nn/tensor.hpp"

namespace earcount::nn {

template <typename Scalar>
struct AdamState {
  long step = 0;
  std::vector<Vector<Scalar>> m, v;
};

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update. Parameters that received no gradient are
/// treated as having a zero gradient.
template <typename Scalar>
void adam_step(std::vector<Tensor<Scalar>>& params, AdamState<Scalar>& state, double lr,
               const AdamParams& hp = {}) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Vector<Scalar>::Zero(p.size()));
      state.v.push_back(Vector<Scalar>::Zero(p.size()));
    }
  }
  if (state.m.size() != params.size()) {
    throw ShapeError("adam_step: state does not match parameter list");
  }
  ++state.step;
  const auto b1 = static_cast<Scalar>(hp.beta1), b2 = static_cast<Scalar>(hp.beta2);
  const auto c1 = static_cast<Scalar>(1.0 - std::pow(hp.beta1, static_cast<double>(state.step)));
  const auto c2 = static_cast<Scalar>(1.0 - std::pow(hp.beta2, static_cast<double>(state.step)));
  const auto rate = static_cast<Scalar>(lr), eps = static_cast<Scalar>(hp.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.has_grad()) {
      state.m[i] *= b1;
      state.v[i] *= b2;
    } else {
      const Vector<Scalar>& g = p.grad();
      state.m[i] = b1 * state.m[i] + (1 - b1) * g;
      state.v[i] = b2 * state.v[i] + (1 - b2) * g.cwiseAbs2();
    }
    p.value().array() -=
        rate * (state.m[i].array() / c1) / ((state.v[i].array() / c2).sqrt() + eps);
  }
}

/// Multiplies the learning rate by `factor` after `patience` consecutive
/// epochs without the monitored metric (higher is better) improving on its
/// best value by more than `min_delta`. A reduction resets the counter.
class ReduceOnPlateau {
 public:
  ReduceOnPlateau(double lr, double factor = 0.1, int patience = 10, double min_delta = 1e-4)
      : lr_(lr), factor_(factor), patience_(patience), min_delta_(min_delta) {}

  double step(double metric) {
    if (!std::isnan(metric) && metric > best_ + min_delta_) {
      best_ = metric;
      bad_epochs_ = 0;
    } else if (++bad_epochs_ >= patience_) {
      lr_ *= factor_;
      bad_epochs_ = 0;
    }
    return lr_;
  }

  double lr() const { return lr_; }
  double best() const { return best_; }
  int bad_epochs() const { return bad_epochs_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  double min_delta_;
  double best_ = -std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

}  // namespace earcount::nn
