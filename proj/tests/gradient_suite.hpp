#pragma once

// Seeded finite-difference cases for every differentiable op and the toy
// model, shared by the unit tests and the acceptance harness.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "earcount/nn/gradcheck.hpp"
#include "earcount/nn/model.hpp"

namespace gradsuite {

using earcount::nn::Index;
using earcount::nn::Mode;
using earcount::nn::Shape;
using T = earcount::nn::Tensor<double>;
using Vec = earcount::nn::Vector<double>;
namespace nn = earcount::nn;

struct OpCase {
  std::string name;
  double tolerance;
  std::function<nn::GradCheckResult(std::uint64_t seed)> run;
};

inline T random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(nn::numel(shape));
  for (Index i = 0; i < v.size(); ++i) v[i] = u(rng);
  return T::from(std::move(shape), std::move(v), true);
}

/// Values bounded away from zero, for ops with a kink at 0.
inline T away_from_zero(Shape shape, std::mt19937_64& rng) {
  T t = random_tensor(std::move(shape), rng, 0.05, 1.0);
  std::bernoulli_distribution neg(0.5);
  for (Index i = 0; i < t.size(); ++i)
    if (neg(rng)) t.value()[i] = -t.value()[i];
  return t;
}

inline Vec random_weights(Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec w(n);
  for (Index i = 0; i < n; ++i) w[i] = u(rng);
  return w;
}

/// Scalar projection of an op output so every output element contributes.
inline nn::GradCheckResult check(const std::function<T()>& op, std::vector<T> inputs,
                                 std::mt19937_64& rng) {
  const Index n = op().size();
  const Vec w = random_weights(n, rng);
  return nn::check_gradients([&] { return nn::weighted_sum(op(), w); }, std::move(inputs));
}

inline nn::ModelConfig toy_config(std::uint64_t seed) {
  nn::ModelConfig cfg;
  cfg.input_shape = {3, 32, 8};
  cfg.block_channels = {8, 16};
  cfg.dense_width = 8;
  cfg.seed = seed;
  return cfg;
}

inline std::vector<OpCase> op_cases() {
  std::vector<OpCase> cases;
  cases.push_back({"conv2d", 1e-4, [](std::uint64_t s) {
                     std::mt19937_64 rng(s);
                     T x = random_tensor({2, 2, 5, 4}, rng), w = random_tensor({3, 2, 3, 3}, rng),
                       b = random_tensor({3}, rng);
                     return check([=] { return nn::conv2d(x, w, b, 1, 1); }, {x, w, b}, rng);
                   }});
  cases.push_back({"conv2d_stride2", 1e-4, [](std::uint64_t s) {
                     std::mt19937_64 rng(s);
                     T x = random_tensor({1, 2, 5, 5}, rng), w = random_tensor({2, 2, 3, 3}, rng),
                       b = random_tensor({2}, rng);
                     return check([=] { return nn::conv2d(x, w, b, 2, 0); }, {x, w, b}, rng);
                   }});
  cases.push_back({"dense", 1e-4, [](std::uint64_t s) {
                     std::mt19937_64 rng(s);
                     T x = random_tensor({3, 5}, rng), w = random_tensor({4, 5}, rng),
                       b = random_tensor({4}, rng);
                     return check([=] { return nn::dense(x, w, b); }, {x, w, b}, rng);
                   }});
  cases.push_back({"leaky_relu", 1e-4, [](std::uint64_t s) {
                     std::mt19937_64 rng(s);
                     T x = away_from_zero({2, 3, 4, 4}, rng);
                     return check([=] { return nn::leaky_relu(x, 0.3); }, {x}, rng);
                   }});
  cases.push_back({"maxpool2d", 1e-4, [](std::uint64_t s) {
                     std::mt19937_64 rng(s);
                     T x = random_tensor({2, 2, 4, 6}, rng);
                     return check([=] { return nn::maxpool2d(x, 2); }, {x}, rng);
                   }});
  cases.push_back({"global_avg_pool", 1e-4, [](std::uint64_t s) {
                     std::mt19937_64 rng(s);
                     T x = random_tensor({2, 3, 4, 5}, rng);
                     return check([=] { return nn::global_avg_pool(x); }, {x}, rng);
                   }});
  cases.push_back({"residual_add", 1e-4, [](std::uint64_t s) {
                     std::mt19937_64 rng(s);
                     T a = random_tensor({2, 3, 4, 4}, rng), b = random_tensor({2, 3, 4, 4}, rng);
                     return check([=] { return nn::residual_add(a, b); }, {a, b}, rng);
                   }});
  cases.push_back({"dropout", 1e-4, [](std::uint64_t s) {
                     std::mt19937_64 rng(s);
                     T x = random_tensor({4, 6}, rng);
                     return check(
                         [=] {
                           std::mt19937_64 mask(s);
                           return nn::dropout(x, 0.2, Mode::Train, mask);
                         },
                         {x}, rng);
                   }});
  cases.push_back({"mae_loss", 1e-4, [](std::uint64_t s) {
                     std::mt19937_64 rng(s);
                     T p = away_from_zero({3, 4}, rng);
                     const T target = T::zeros({3, 4});
                     return nn::check_gradients([=] { return nn::mae_loss(p, target); }, {p});
                   }});
  cases.push_back({"batchnorm_train", 1e-3, [](std::uint64_t s) {
                     std::mt19937_64 rng(s);
                     T x = random_tensor({3, 2, 3, 3}, rng), g = random_tensor({2}, rng, 0.5, 1.5),
                       b = random_tensor({2}, rng);
                     return check(
                         [=] {
                           nn::BatchNormStats<double> st(2);
                           return nn::batchnorm(x, g, b, st, Mode::Train);
                         },
                         {x, g, b}, rng);
                   }});
  cases.push_back({"batchnorm_dense", 1e-3, [](std::uint64_t s) {
                     std::mt19937_64 rng(s);
                     T x = random_tensor({4, 3}, rng), g = random_tensor({3}, rng, 0.5, 1.5),
                       b = random_tensor({3}, rng);
                     return check(
                         [=] {
                           nn::BatchNormStats<double> st(3);
                           return nn::batchnorm(x, g, b, st, Mode::Train);
                         },
                         {x, g, b}, rng);
                   }});
  cases.push_back({"batchnorm_eval", 1e-3, [](std::uint64_t s) {
                     std::mt19937_64 rng(s);
                     T x = random_tensor({3, 2, 2, 2}, rng), g = random_tensor({2}, rng),
                       b = random_tensor({2}, rng);
                     nn::BatchNormStats<double> st(2);
                     st.running_mean = random_weights(2, rng);
                     st.running_var = Vec::Constant(2, 0.7);
                     return check([=]() mutable { return nn::batchnorm(x, g, b, st, Mode::Eval); },
                                  {x, g, b}, rng);
                   }});
  cases.push_back({"toy_model", 1e-3, [](std::uint64_t s) {
                     std::mt19937_64 rng(s);
                     auto model = std::make_shared<nn::Model<double>>(toy_config(s));
                     T x = random_tensor({3, 3, 32, 8}, rng);
                     std::vector<T> inputs = model->parameter_tensors();
                     inputs.push_back(x);
                     return check(
                         [=] {
                           std::mt19937_64 mask(s);
                           return model->forward(x, Mode::Train, &mask);
                         },
                         inputs, rng);
                   }});
  return cases;
}

}  // namespace gradsuite
