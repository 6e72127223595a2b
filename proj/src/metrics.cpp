#include "earcount/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace earcount {

namespace {

void check_pair(std::span<const double> pred, std::span<const double> truth, std::size_t min_n) {
  if (pred.size() != truth.size()) throw std::invalid_argument("prediction/truth length mismatch");
  if (pred.size() < min_n) throw std::invalid_argument("too few samples for metric");
}

}  // namespace

double mae(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred, truth, 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - truth[i]);
  return sum / static_cast<double>(pred.size());
}

double r_squared(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred, truth, 2);
  double mean = 0.0;
  for (double t : truth) mean += t;
  mean /= static_cast<double>(truth.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  if (ss_tot == 0.0) throw std::invalid_argument("R^2 undefined for constant truth");
  return 1.0 - ss_res / ss_tot;
}

double manual_estimate(int kernels_row_a, int kernels_row_b, int num_rows) {
  if (kernels_row_a < 0 || kernels_row_b < 0 || num_rows < 0) {
    throw std::invalid_argument("manual_estimate: counts must be non-negative");
  }
  return (kernels_row_a + kernels_row_b) / 2.0 * num_rows;
}

}  // namespace earcount
