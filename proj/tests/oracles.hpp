#pragma once

// Brute-force reference implementations used by the unit and acceptance
// tests. Each is written as plainly as possible and shares no code with the
// library beyond the raster types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "earcount/imgcore.hpp"

namespace oracle {

using earcount::BinaryMask;
using earcount::GrayImage;

inline GrayImage random_gray(int w, int h, std::mt19937_64& rng, int levels = 256) {
  std::uniform_int_distribution<int> u(0, levels - 1);
  GrayImage g(w, h);
  const int step = 256 / levels;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) g.px(y, x) = static_cast<std::uint8_t>(u(rng) * step);
  return g;
}

inline BinaryMask random_mask(int w, int h, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution b(p);
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.px(y, x) = b(rng);
  return m;
}

/// Labels by explicit-stack flood fill, scanning seeds in raster order.
/// Returns the label raster (0 = background) and the component count.
inline std::pair<std::vector<int>, int> flood_fill_labels(const BinaryMask& m, bool eight) {
  const int w = m.width(), h = m.height();
  std::vector<int> lab(static_cast<std::size_t>(w) * h, 0);
  int next = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!m.px(y, x) || lab[y * w + x]) continue;
      ++next;
      std::vector<std::pair<int, int>> stack{{x, y}};
      lab[y * w + x] = next;
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            if (!eight && dx != 0 && dy != 0) continue;
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            if (!m.px(ny, nx) || lab[ny * w + nx]) continue;
            lab[ny * w + nx] = next;
            stack.push_back({nx, ny});
          }
      }
    }
  }
  return {lab, next};
}

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

inline GrayImage median(const GrayImage& g, int r) {
  GrayImage out(g.width(), g.height());
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) {
      std::vector<int> win;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          win.push_back(g.px(clampi(y + dy, 0, g.height() - 1), clampi(x + dx, 0, g.width() - 1)));
      std::sort(win.begin(), win.end());
      out.px(y, x) = static_cast<std::uint8_t>(win[win.size() / 2]);
    }
  return out;
}

inline BinaryMask mean_threshold(const GrayImage& g, int block, double c) {
  const int r = block / 2;
  BinaryMask out(g.width(), g.height());
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) {
      long sum = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          sum += g.px(clampi(y + dy, 0, g.height() - 1), clampi(x + dx, 0, g.width() - 1));
      const double mean = static_cast<double>(sum) / static_cast<double>(block * block);
      out.px(y, x) = static_cast<double>(g.px(y, x)) > mean - c;
    }
  return out;
}

inline std::uint8_t round_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

/// Mapping of value v by tile (tx, ty): clipped, redistributed, cumulative
/// histogram of the edge-replicated tile.
inline int clahe_tile_map(const GrayImage& g, int tx, int ty, int tw, int th, double clip,
                          int bins, int v) {
  std::vector<long> hist(bins, 0);
  for (int y = ty * th; y < ty * th + th; ++y)
    for (int x = tx * tw; x < tx * tw + tw; ++x) {
      const int p = g.px(std::min(y, g.height() - 1), std::min(x, g.width() - 1));
      hist[p * bins / 256]++;
    }
  const long area = static_cast<long>(tw) * th;
  long limit = static_cast<long>(clip * static_cast<double>(area) / bins);
  if (limit < 1) limit = 1;
  long excess = 0;
  for (int b = 0; b < bins; ++b) {
    if (hist[b] > limit) {
      excess += hist[b] - limit;
      hist[b] = limit;
    }
  }
  for (int b = 0; b < bins; ++b) hist[b] += excess / bins;
  long rest = excess % bins;
  if (rest > 0) {
    long stride = bins / rest;
    if (stride < 1) stride = 1;
    for (long b = 0; b < bins && rest > 0; b += stride) {
      hist[b]++;
      rest--;
    }
  }
  long cdf = 0;
  for (int b = 0; b <= v * bins / 256; ++b) cdf += hist[b];
  return round_byte(255.0 * static_cast<double>(cdf) / static_cast<double>(area));
}

inline GrayImage clahe(const GrayImage& g, int cols, int rows, double clip, int bins) {
  const int tw = (g.width() + cols - 1) / cols, th = (g.height() + rows - 1) / rows;
  GrayImage out(g.width(), g.height());
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) {
      const double fx = (x + 0.5) / tw - 0.5, fy = (y + 0.5) / th - 0.5;
      const int x0 = static_cast<int>(std::floor(fx)), y0 = static_cast<int>(std::floor(fy));
      const double ax = fx - x0, ay = fy - y0;
      const int v = g.px(y, x);
      auto m = [&](int tx, int ty) {
        return static_cast<double>(clahe_tile_map(g, clampi(tx, 0, cols - 1), clampi(ty, 0, rows - 1),
                                                  tw, th, clip, bins, v));
      };
      const double top = (1 - ax) * m(x0, y0) + ax * m(x0 + 1, y0);
      const double bot = (1 - ax) * m(x0, y0 + 1) + ax * m(x0 + 1, y0 + 1);
      out.px(y, x) = round_byte((1 - ay) * top + ay * bot);
    }
  return out;
}

/// Two-sided Mann-Whitney p by enumerating every split of the pooled sample.
inline double permutation_mann_whitney_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const int n = static_cast<int>(pooled.size()), na = static_cast<int>(a.size());
  auto u_of = [&](unsigned mask) {
    double u = 0;
    for (int i = 0; i < n; ++i) {
      if (!(mask >> i & 1u)) continue;
      for (int j = 0; j < n; ++j) {
        if (mask >> j & 1u) continue;
        if (pooled[i] > pooled[j]) u += 1;
        else if (pooled[i] == pooled[j]) u += 0.5;
      }
    }
    return u;
  };
  const double observed = u_of((1u << na) - 1u);
  long total = 0, le = 0, ge = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (__builtin_popcount(mask) != na) continue;
    const double u = u_of(mask);
    ++total;
    if (u <= observed) ++le;
    if (u >= observed) ++ge;
  }
  return std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(total));
}

}  // namespace oracle
