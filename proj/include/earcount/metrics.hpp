#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "earcount/synthgen.hpp"

namespace earcount {

/// Mean absolute error. Throws std::invalid_argument on empty or unequal inputs.
double mae(std::span<const double> pred, std::span<const double> truth);

/// 1 - SS_res / SS_tot, SS_tot about the mean of `truth`. Needs at least two
/// samples and non-constant truth.
double r_squared(std::span<const double> pred, std::span<const double> truth);

/// Two-row field rule: mean of the two counted rows times the row count.
double manual_estimate(int kernels_row_a, int kernels_row_b, int num_rows);

struct MetricsReport {
  std::vector<double> mae;  // per output, kernels
  std::vector<double> r2;   // per output; NaN where truth is constant
  long n = 0;
  Split split = Split::Test;
  std::uint64_t run_seed = 0;

  double total_mae() const { return mae.at(0); }
  double total_r2() const { return r2.at(0); }
};

}  // namespace earcount
