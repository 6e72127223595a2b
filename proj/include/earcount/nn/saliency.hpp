#pragma once

// Vanilla gradient saliency: |d output / d input|, reduced over channels by
// the maximum.

#include <cmath>

#include "earcount/nn/ops.hpp"

namespace earcount::nn {

/// input [1, C, H, W]; `forward` maps it to [1, outputs]. Returns the raw
/// H x W map.
template <typename Scalar, typename Forward>
RowMatrix<double> saliency_map(Forward&& forward, const Tensor<Scalar>& input, Index output_index) {
  if (input.rank() != 4 || input.dim(0) != 1) {
    throw ShapeError("saliency: expected a single [1,C,H,W] input");
  }
  Tensor<Scalar> x = input.detach();
  x.set_requires_grad(true);
  Tensor<Scalar> y = forward(x);
  if (output_index < 0 || output_index >= y.size()) {
    throw ShapeError("saliency: output index out of range");
  }
  Vector<Scalar> pick = Vector<Scalar>::Zero(y.size());
  pick[output_index] = Scalar(1);
  weighted_sum(y, pick).backward();

  const Index c = x.dim(1), h = x.dim(2), w = x.dim(3);
  RowMatrix<double> out = RowMatrix<double>::Zero(h, w);
  const Vector<Scalar>& g = x.grad();
  for (Index ch = 0; ch < c; ++ch)
    for (Index i = 0; i < h; ++i)
      for (Index j = 0; j < w; ++j)
        out(i, j) = std::max(out(i, j), std::abs(static_cast<double>(g[(ch * h + i) * w + j])));
  return out;
}

/// Min-max scaling to [0, 255]; an all-equal map becomes all zero.
inline RowMatrix<double> normalize_saliency(const RowMatrix<double>& raw) {
  const double lo = raw.minCoeff(), hi = raw.maxCoeff();
  if (!(hi > lo)) return RowMatrix<double>::Zero(raw.rows(), raw.cols());
  return ((raw.array() - lo) * (255.0 / (hi - lo))).matrix();
}

}  // namespace earcount::nn
