#include "earcount/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

namespace earcount {

namespace {

// Sum of t^3 - t over tie groups of the pooled values.
double tie_term(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  double t_sum = 0.0;
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    const double t = static_cast<double>(j - i);
    t_sum += t * t * t - t;
    i = j;
  }
  return t_sum;
}

double clamp01(double p) { return std::clamp(p, 0.0, 1.0); }

}  // namespace

std::vector<double> midranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

std::vector<double> mann_whitney_null_counts(int n_a, int n_b) {
  // c[m][n][u] = c[m-1][n][u-n] + c[m][n-1][u], rolled over n.
  const int max_u = n_a * n_b;
  std::vector<std::vector<std::vector<double>>> c(
      n_a + 1, std::vector<std::vector<double>>(n_b + 1, std::vector<double>(max_u + 1, 0.0)));
  for (int m = 0; m <= n_a; ++m) {
    for (int n = 0; n <= n_b; ++n) {
      if (m == 0 || n == 0) {
        c[m][n][0] = 1.0;
        continue;
      }
      for (int u = 0; u <= m * n; ++u) {
        double v = c[m][n - 1][u];
        if (u >= n) v += c[m - 1][n][u - n];
        c[m][n][u] = v;
      }
    }
  }
  return c[n_a][n_b];
}

GroupComparison mann_whitney_u(std::span<const double> a, std::span<const double> b,
                               const std::string& name_a, const std::string& name_b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("mann_whitney_u: empty sample");
  GroupComparison out;
  out.test = "mann-whitney";
  out.names = {name_a, name_b};
  out.groups = {std::vector<double>(a.begin(), a.end()), std::vector<double>(b.begin(), b.end())};
  out.medians = {median(out.groups[0]), median(out.groups[1])};

  std::vector<double> pooled(out.groups[0]);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = midranks(pooled);
  const double n1 = static_cast<double>(a.size()), n2 = static_cast<double>(b.size());
  double r1 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) r1 += ranks[i];
  const double u = r1 - n1 * (n1 + 1.0) / 2.0;
  out.statistic = u;

  const double ties = tie_term(pooled);
  if (a.size() + b.size() <= 16 && ties == 0.0) {
    const auto counts = mann_whitney_null_counts(static_cast<int>(a.size()),
                                                 static_cast<int>(b.size()));
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const auto ui = static_cast<std::size_t>(std::llround(u));
    double lower = 0.0, upper = 0.0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      if (k <= ui) lower += counts[k];
      if (k >= ui) upper += counts[k];
    }
    out.p_value = clamp01(2.0 * std::min(lower, upper) / total);
    out.exact = true;
    return out;
  }

  const double n = n1 + n2;
  const double mu = n1 * n2 / 2.0;
  const double var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
  if (!(var > 0.0)) {
    out.p_value = 1.0;
    return out;
  }
  const double z = std::max(0.0, std::abs(u - mu) - 0.5) / std::sqrt(var);
  out.p_value = clamp01(std::erfc(z / std::sqrt(2.0)));
  return out;
}

GroupComparison kruskal_wallis_h(const std::vector<std::vector<double>>& groups,
                                 const std::vector<std::string>& names) {
  if (groups.size() < 2) throw std::invalid_argument("kruskal_wallis_h: need at least two groups");
  if (!names.empty() && names.size() != groups.size()) {
    throw std::invalid_argument("kruskal_wallis_h: names do not match groups");
  }
  GroupComparison out;
  out.test = "kruskal-wallis";
  out.groups = groups;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw std::invalid_argument("kruskal_wallis_h: empty group");
    out.names.push_back(names.empty() ? "g" + std::to_string(g) : names[g]);
    out.medians.push_back(median(groups[g]));
  }
  std::vector<double> pooled;
  for (const auto& g : groups) pooled.insert(pooled.end(), g.begin(), g.end());
  const auto ranks = midranks(pooled);
  const double n = static_cast<double>(pooled.size());
  const double correction = 1.0 - tie_term(pooled) / (n * n * n - n);
  if (!(correction > 0.0)) {
    out.statistic = 0.0;
    out.p_value = 1.0;
    return out;
  }
  double h = 0.0;
  std::size_t offset = 0;
  for (const auto& g : groups) {
    double r = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) r += ranks[offset + i];
    offset += g.size();
    const double ni = static_cast<double>(g.size());
    const double d = r / ni - (n + 1.0) / 2.0;
    h += ni * d * d;
  }
  h *= 12.0 / (n * (n + 1.0));
  h /= correction;
  out.statistic = h;
  const double df = static_cast<double>(groups.size() - 1);
  out.p_value = h > 0.0 ? clamp01(boost::math::gamma_q(df / 2.0, h / 2.0)) : 1.0;
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : (v[m - 1] + v[m]) / 2.0;
}

double lower_median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty sample");
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

Summary summarize(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("summarize: empty sample");
  Summary s;
  const double n = static_cast<double>(v.size());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  s.min = *lo;
  s.max = *hi;
  s.median = median(std::vector<double>(v.begin(), v.end()));
  return s;
}

}  // namespace earcount
