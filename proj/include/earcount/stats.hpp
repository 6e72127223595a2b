#pragma once

// Rank-based tests for comparing run-level metrics between groups.

#include <span>
#include <string>
#include <vector>

namespace earcount {

struct GroupComparison {
  std::string test;  // "mann-whitney" or "kruskal-wallis"
  std::vector<std::string> names;
  std::vector<std::vector<double>> groups;
  double statistic = 0.0;  // U of the first group, or H
  double p_value = 1.0;
  std::vector<double> medians;
  bool exact = false;  // p from the exact null distribution
};

/// Midranks (1-based) of the pooled values; ties share their average rank.
std::vector<double> midranks(std::span<const double> values);

/// Number of orderings giving U_a = u for u in [0, n_a * n_b], assuming no ties.
std::vector<double> mann_whitney_null_counts(int n_a, int n_b);

/// Two-sided Mann-Whitney U. U counts pairs with a > b, ties as one half.
/// Exact p (2 * smaller tail, capped at 1) when n_a + n_b <= 16 and there are
/// no ties; otherwise the tie-corrected normal approximation with continuity
/// correction.
GroupComparison mann_whitney_u(std::span<const double> a, std::span<const double> b,
                               const std::string& name_a = "a", const std::string& name_b = "b");

/// Kruskal-Wallis H with tie correction; p from chi-squared with k - 1
/// degrees of freedom. All-identical data gives H = 0, p = 1.
GroupComparison kruskal_wallis_h(const std::vector<std::vector<double>>& groups,
                                 const std::vector<std::string>& names = {});

double median(std::vector<double> v);
/// Lower median for even counts.
double lower_median(std::vector<double> v);

struct Summary {
  double mean = 0, std = 0, min = 0, median = 0, max = 0;
};
/// Sample standard deviation (n - 1 denominator; 0 for a single value).
Summary summarize(std::span<const double> v);

}  // namespace earcount
