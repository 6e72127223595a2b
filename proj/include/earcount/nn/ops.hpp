#pragma once

// Differentiable ops over NCHW / NF tensors. Each forward computes its value
// eagerly and, when an input requires a gradient, attaches the matching
// backward closure to the output node.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>

#include "earcount/nn/tensor.hpp"

namespace earcount::nn {

enum class Mode { Train, Eval };

namespace detail {

inline void require_rank(const Shape& s, std::size_t rank, const char* op) {
  if (s.size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     to_string(s));
  }
}

template <typename Scalar, typename Derived>
void add_grad(const Tensor<Scalar>& t, const Eigen::MatrixBase<Derived>& delta) {
  if (t.defined() && t.requires_grad()) t.node()->accumulate(delta);
}

}  // namespace detail

// ---- convolution --------------------------------------------------------------

/// Cross-correlation. x [N,C,H,W], weight [K,C,kh,kw], bias [K] (may be
/// undefined) -> [N,K,H',W'] with H' = (H + 2*padding - kh) / stride + 1.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& weight,
                      const Tensor<Scalar>& bias, int stride = 1, int padding = 0) {
  detail::require_rank(x.shape(), 4, "conv2d input");
  detail::require_rank(weight.shape(), 4, "conv2d weight");
  const Index n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index k = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  if (weight.dim(1) != c) {
    throw ShapeError("conv2d: weight " + to_string(weight.shape()) + " vs input " +
                     to_string(x.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != k)) {
    throw ShapeError("conv2d: bias must have shape [" + std::to_string(k) + "]");
  }
  if (stride < 1 || padding < 0) throw ShapeError("conv2d: invalid stride or padding");
  const Index span_h = h + 2 * padding - kh, span_w = w + 2 * padding - kw;
  if (span_h < 0 || span_w < 0 || span_h % stride != 0 || span_w % stride != 0) {
    throw ShapeError("conv2d: output size is not integral");
  }
  const Index ho = span_h / stride + 1, wo = span_w / stride + 1;
  const Index patch = c * kh * kw, out_px = ho * wo;

  auto cols = std::make_shared<std::vector<RowMatrix<Scalar>>>(n);
  Vector<Scalar> out(n * k * out_px);
  Eigen::Map<const RowMatrix<Scalar>> wm(weight.value().data(), k, patch);

  for (Index s = 0; s < n; ++s) {
    RowMatrix<Scalar>& col = (*cols)[s];
    col.setZero(patch, out_px);
    const Scalar* xs = x.value().data() + s * c * h * w;
    for (Index ci = 0; ci < c; ++ci) {
      for (Index i = 0; i < kh; ++i) {
        for (Index j = 0; j < kw; ++j) {
          Scalar* row = col.data() + ((ci * kh + i) * kw + j) * out_px;
          for (Index oy = 0; oy < ho; ++oy) {
            const Index iy = oy * stride - padding + i;
            if (iy < 0 || iy >= h) continue;
            const Scalar* src = xs + (ci * h + iy) * w;
            for (Index ox = 0; ox < wo; ++ox) {
              const Index ix = ox * stride - padding + j;
              if (ix >= 0 && ix < w) row[oy * wo + ox] = src[ix];
            }
          }
        }
      }
    }
    Eigen::Map<RowMatrix<Scalar>> ys(out.data() + s * k * out_px, k, out_px);
    ys.noalias() = wm * col;
    if (bias.defined()) ys.colwise() += bias.value();
  }

  return make_result<Scalar>(
      {n, k, ho, wo}, std::move(out), {x, weight, bias},
      [=](Node<Scalar>& self) {
        Eigen::Map<const RowMatrix<Scalar>> wm(weight.value().data(), k, patch);
        RowMatrix<Scalar> dw = RowMatrix<Scalar>::Zero(k, patch);
        Vector<Scalar> db = Vector<Scalar>::Zero(k);
        Vector<Scalar> dx;
        if (x.requires_grad()) dx = Vector<Scalar>::Zero(x.size());
        for (Index s = 0; s < n; ++s) {
          Eigen::Map<const RowMatrix<Scalar>> dy(self.grad.data() + s * k * out_px, k, out_px);
          const RowMatrix<Scalar>& col = (*cols)[s];
          if (weight.requires_grad()) dw.noalias() += dy * col.transpose();
          if (bias.defined() && bias.requires_grad()) db += dy.rowwise().sum();
          if (!x.requires_grad()) continue;
          RowMatrix<Scalar> dcol = wm.transpose() * dy;
          Scalar* dxs = dx.data() + s * c * h * w;
          for (Index ci = 0; ci < c; ++ci) {
            for (Index i = 0; i < kh; ++i) {
              for (Index j = 0; j < kw; ++j) {
                const Scalar* row = dcol.data() + ((ci * kh + i) * kw + j) * out_px;
                for (Index oy = 0; oy < ho; ++oy) {
                  const Index iy = oy * stride - padding + i;
                  if (iy < 0 || iy >= h) continue;
                  Scalar* dst = dxs + (ci * h + iy) * w;
                  for (Index ox = 0; ox < wo; ++ox) {
                    const Index ix = ox * stride - padding + j;
                    if (ix >= 0 && ix < w) dst[ix] += row[oy * wo + ox];
                  }
                }
              }
            }
          }
        }
        if (weight.requires_grad()) {
          detail::add_grad(weight, Eigen::Map<const Vector<Scalar>>(dw.data(), dw.size()));
        }
        if (bias.defined()) detail::add_grad(bias, db);
        if (x.requires_grad()) detail::add_grad(x, dx);
      });
}

// ---- normalisation ---------------------------------------------------------

template <typename Scalar>
struct BatchNormStats {
  Vector<Scalar> running_mean;
  Vector<Scalar> running_var;

  explicit BatchNormStats(Index channels = 0)
      : running_mean(Vector<Scalar>::Zero(channels)),
        running_var(Vector<Scalar>::Ones(channels)) {}
};

/// Per-channel batch normalisation of [N,C] or [N,C,H,W]. Train mode uses
/// biased batch statistics and folds the unbiased variance into the running
/// estimate: running = (1 - momentum) * running + momentum * batch.
template <typename Scalar>
Tensor<Scalar> batchnorm(const Tensor<Scalar>& x, const Tensor<Scalar>& gamma,
                         const Tensor<Scalar>& beta, BatchNormStats<Scalar>& stats, Mode mode,
                         Scalar momentum = Scalar(0.1), Scalar eps = Scalar(1e-5)) {
  if (x.rank() != 2 && x.rank() != 4) {
    throw ShapeError("batchnorm: expected rank 2 or 4, got " + to_string(x.shape()));
  }
  const Index n = x.dim(0), c = x.dim(1);
  const Index inner = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
  if (gamma.size() != c || beta.size() != c || stats.running_mean.size() != c) {
    throw ShapeError("batchnorm: parameter size does not match channels");
  }
  const Index m = n * inner;
  const Vector<Scalar>& xv = x.value();
  auto at = [=](Index s, Index ch, Index i) { return (s * c + ch) * inner + i; };

  Vector<Scalar> mean(c), inv_std(c);
  if (mode == Mode::Train) {
    for (Index ch = 0; ch < c; ++ch) {
      Scalar sum = 0;
      for (Index s = 0; s < n; ++s)
        for (Index i = 0; i < inner; ++i) sum += xv[at(s, ch, i)];
      const Scalar mu = sum / m;
      Scalar sq = 0;
      for (Index s = 0; s < n; ++s)
        for (Index i = 0; i < inner; ++i) {
          const Scalar d = xv[at(s, ch, i)] - mu;
          sq += d * d;
        }
      const Scalar var = sq / m;
      mean[ch] = mu;
      inv_std[ch] = Scalar(1) / std::sqrt(var + eps);
      const Scalar unbiased = m > 1 ? sq / (m - 1) : var;
      stats.running_mean[ch] = (1 - momentum) * stats.running_mean[ch] + momentum * mu;
      stats.running_var[ch] = (1 - momentum) * stats.running_var[ch] + momentum * unbiased;
    }
  } else {
    mean = stats.running_mean;
    inv_std = (stats.running_var.array() + eps).rsqrt();
  }

  Vector<Scalar> xhat(x.size()), out(x.size());
  for (Index s = 0; s < n; ++s)
    for (Index ch = 0; ch < c; ++ch)
      for (Index i = 0; i < inner; ++i) {
        const Index idx = at(s, ch, i);
        xhat[idx] = (xv[idx] - mean[ch]) * inv_std[ch];
        out[idx] = gamma.value()[ch] * xhat[idx] + beta.value()[ch];
      }

  return make_result<Scalar>(
      x.shape(), std::move(out), {x, gamma, beta},
      [=, xhat = std::move(xhat)](Node<Scalar>& self) {
        const Vector<Scalar>& dy = self.grad;
        Vector<Scalar> dgamma = Vector<Scalar>::Zero(c), dbeta = Vector<Scalar>::Zero(c);
        for (Index s = 0; s < n; ++s)
          for (Index ch = 0; ch < c; ++ch)
            for (Index i = 0; i < inner; ++i) {
              const Index idx = at(s, ch, i);
              dgamma[ch] += dy[idx] * xhat[idx];
              dbeta[ch] += dy[idx];
            }
        detail::add_grad(gamma, dgamma);
        detail::add_grad(beta, dbeta);
        if (!x.requires_grad()) return;
        Vector<Scalar> dx(x.size());
        for (Index ch = 0; ch < c; ++ch) {
          const Scalar g = gamma.value()[ch];
          if (mode == Mode::Eval) {
            for (Index s = 0; s < n; ++s)
              for (Index i = 0; i < inner; ++i) {
                const Index idx = at(s, ch, i);
                dx[idx] = dy[idx] * g * inv_std[ch];
              }
            continue;
          }
          // dxhat = dy * g; sums over the channel
          const Scalar sum_dxhat = g * dbeta[ch];
          const Scalar sum_dxhat_xhat = g * dgamma[ch];
          for (Index s = 0; s < n; ++s)
            for (Index i = 0; i < inner; ++i) {
              const Index idx = at(s, ch, i);
              dx[idx] = inv_std[ch] / m *
                        (m * dy[idx] * g - sum_dxhat - xhat[idx] * sum_dxhat_xhat);
            }
        }
        detail::add_grad(x, dx);
      });
}

// ---- elementwise and pooling -----------------------------------------------

template <typename Scalar>
Tensor<Scalar> leaky_relu(const Tensor<Scalar>& x, Scalar slope) {
  Vector<Scalar> out = (x.value().array() >= 0).select(x.value(), slope * x.value());
  return make_result<Scalar>(x.shape(), std::move(out), {x}, [=](Node<Scalar>& self) {
    detail::add_grad(x, Vector<Scalar>((x.value().array() >= 0)
                                           .select(self.grad, slope * self.grad)));
  });
}

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  return make_result<Scalar>(a.shape(), a.value() + b.value(), {a, b}, [=](Node<Scalar>& self) {
    detail::add_grad(a, self.grad);
    detail::add_grad(b, self.grad);
  });
}

/// Residual connection: identical shapes required.
template <typename Scalar>
Tensor<Scalar> residual_add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return add(a, b);
}

/// Non-overlapping max pooling with window = stride = `size`; trailing rows
/// and columns that do not fill a window are dropped.
template <typename Scalar>
Tensor<Scalar> maxpool2d(const Tensor<Scalar>& x, int size = 2) {
  detail::require_rank(x.shape(), 4, "maxpool2d");
  const Index n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index ho = h / size, wo = w / size;
  if (ho == 0 || wo == 0) throw ShapeError("maxpool2d: input smaller than window");
  Vector<Scalar> out(n * c * ho * wo);
  auto argmax = std::make_shared<std::vector<Index>>(out.size());
  const Scalar* xv = x.value().data();
  for (Index p = 0; p < n * c; ++p) {
    for (Index oy = 0; oy < ho; ++oy) {
      for (Index ox = 0; ox < wo; ++ox) {
        Index best = p * h * w + (oy * size) * w + ox * size;
        for (int i = 0; i < size; ++i)
          for (int j = 0; j < size; ++j) {
            const Index idx = p * h * w + (oy * size + i) * w + ox * size + j;
            if (xv[idx] > xv[best]) best = idx;
          }
        const Index o = (p * ho + oy) * wo + ox;
        out[o] = xv[best];
        (*argmax)[o] = best;
      }
    }
  }
  return make_result<Scalar>({n, c, ho, wo}, std::move(out), {x}, [=](Node<Scalar>& self) {
    Vector<Scalar> dx = Vector<Scalar>::Zero(x.size());
    for (Index o = 0; o < self.grad.size(); ++o) dx[(*argmax)[o]] += self.grad[o];
    detail::add_grad(x, dx);
  });
}

/// [N,C,H,W] -> [N,C] spatial mean.
template <typename Scalar>
Tensor<Scalar> global_avg_pool(const Tensor<Scalar>& x) {
  detail::require_rank(x.shape(), 4, "global_avg_pool");
  const Index nc = x.dim(0) * x.dim(1), hw = x.dim(2) * x.dim(3);
  Eigen::Map<const RowMatrix<Scalar>> xm(x.value().data(), nc, hw);
  Vector<Scalar> out = xm.rowwise().mean();
  return make_result<Scalar>({x.dim(0), x.dim(1)}, std::move(out), {x}, [=](Node<Scalar>& self) {
    RowMatrix<Scalar> dx = (self.grad / Scalar(hw)).replicate(1, hw);
    detail::add_grad(x, Eigen::Map<const Vector<Scalar>>(dx.data(), dx.size()));
  });
}

/// x [N,F], weight [O,F], bias [O] (may be undefined) -> [N,O].
template <typename Scalar>
Tensor<Scalar> dense(const Tensor<Scalar>& x, const Tensor<Scalar>& weight,
                     const Tensor<Scalar>& bias) {
  detail::require_rank(x.shape(), 2, "dense input");
  detail::require_rank(weight.shape(), 2, "dense weight");
  const Index n = x.dim(0), f = x.dim(1), o = weight.dim(0);
  if (weight.dim(1) != f) {
    throw ShapeError("dense: weight " + to_string(weight.shape()) + " vs input " +
                     to_string(x.shape()));
  }
  if (bias.defined() && bias.size() != o) throw ShapeError("dense: bias size mismatch");
  Eigen::Map<const RowMatrix<Scalar>> xm(x.value().data(), n, f);
  Eigen::Map<const RowMatrix<Scalar>> wm(weight.value().data(), o, f);
  RowMatrix<Scalar> y = xm * wm.transpose();
  if (bias.defined()) y.rowwise() += bias.value().transpose();
  Vector<Scalar> out = Eigen::Map<const Vector<Scalar>>(y.data(), y.size());
  return make_result<Scalar>({n, o}, std::move(out), {x, weight, bias}, [=](Node<Scalar>& self) {
    Eigen::Map<const RowMatrix<Scalar>> dy(self.grad.data(), n, o);
    Eigen::Map<const RowMatrix<Scalar>> xm(x.value().data(), n, f);
    Eigen::Map<const RowMatrix<Scalar>> wm(weight.value().data(), o, f);
    if (x.requires_grad()) {
      RowMatrix<Scalar> dx = dy * wm;
      detail::add_grad(x, Eigen::Map<const Vector<Scalar>>(dx.data(), dx.size()));
    }
    if (weight.requires_grad()) {
      RowMatrix<Scalar> dw = dy.transpose() * xm;
      detail::add_grad(weight, Eigen::Map<const Vector<Scalar>>(dw.data(), dw.size()));
    }
    if (bias.defined()) detail::add_grad(bias, Vector<Scalar>(dy.colwise().sum().transpose()));
  });
}

/// Inverted dropout: in train mode zeroes with probability p and scales
/// survivors by 1 / (1 - p). Identity in eval mode or when p == 0.
template <typename Scalar>
Tensor<Scalar> dropout(const Tensor<Scalar>& x, Scalar p, Mode mode, std::mt19937_64& rng) {
  if (!(p >= 0 && p < 1)) throw std::invalid_argument("dropout: p must lie in [0, 1)");
  if (mode == Mode::Eval || p == 0) return x;
  std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
  Vector<Scalar> scale(x.size());
  for (Index i = 0; i < scale.size(); ++i) scale[i] = keep(rng) ? Scalar(1) / (1 - p) : Scalar(0);
  Vector<Scalar> out = x.value().cwiseProduct(scale);
  return make_result<Scalar>(x.shape(), std::move(out), {x}, [=](Node<Scalar>& self) {
    detail::add_grad(x, Vector<Scalar>(self.grad.cwiseProduct(scale)));
  });
}

template <typename Scalar>
Tensor<Scalar> reshape(const Tensor<Scalar>& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw ShapeError("reshape: " + to_string(x.shape()) + " -> " + to_string(shape));
  }
  return make_result<Scalar>(std::move(shape), x.value(), {x},
                             [=](Node<Scalar>& self) { detail::add_grad(x, self.grad); });
}

// ---- reductions ---------------------------------------------------------------

/// Mean absolute error over all elements; target carries no gradient.
template <typename Scalar>
Tensor<Scalar> mae_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("mae_loss: " + to_string(pred.shape()) + " vs " + to_string(target.shape()));
  }
  const Vector<Scalar> diff = pred.value() - target.value();
  Vector<Scalar> out(1);
  out[0] = diff.cwiseAbs().mean();
  const Scalar count = Scalar(diff.size());
  return make_result<Scalar>({1}, std::move(out), {pred}, [=](Node<Scalar>& self) {
    Vector<Scalar> g = diff.unaryExpr([](Scalar d) {
      return d > 0 ? Scalar(1) : (d < 0 ? Scalar(-1) : Scalar(0));
    });
    detail::add_grad(pred, Vector<Scalar>(g * (self.grad[0] / count)));
  });
}

/// sum_i weights_i * x_i.
template <typename Scalar>
Tensor<Scalar> weighted_sum(const Tensor<Scalar>& x, const Vector<Scalar>& weights) {
  if (weights.size() != x.size()) throw ShapeError("weighted_sum: size mismatch");
  Vector<Scalar> out(1);
  out[0] = x.value().dot(weights);
  return make_result<Scalar>({1}, std::move(out), {x}, [=](Node<Scalar>& self) {
    detail::add_grad(x, Vector<Scalar>(weights * self.grad[0]));
  });
}

}  // namespace earcount::nn
