#include "earcount/imgcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace earcount {

namespace {

std::uint8_t round_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

void require_same_size(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw ImageError("mask dimension mismatch");
  }
}

// Union-find over provisional labels.
struct DisjointSet {
  std::vector<std::int32_t> parent{0};

  std::int32_t make() {
    parent.push_back(static_cast<std::int32_t>(parent.size()));
    return parent.back();
  }
  std::int32_t find(std::int32_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent[a] = b;
  }
};

BinaryMask erode(const BinaryMask& in, const StructuringElement& se) {
  const int w = in.width(), h = in.height();
  const int rx = se.rx(), ry = se.ry();
  BinaryMask out(w, h, false);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool keep = true;
      for (int j = 0; j < se.px.rows() && keep; ++j) {
        for (int i = 0; i < se.px.cols(); ++i) {
          if (!se.px(j, i)) continue;
          const int sx = x + i - rx, sy = y + j - ry;
          if (sx < 0 || sy < 0 || sx >= w || sy >= h || !in.px(sy, sx)) {
            keep = false;
            break;
          }
        }
      }
      out.px(y, x) = keep;
    }
  }
  return out;
}

BinaryMask dilate(const BinaryMask& in, const StructuringElement& se) {
  const int w = in.width(), h = in.height();
  const int rx = se.rx(), ry = se.ry();
  BinaryMask out(w, h, false);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!in.px(y, x)) continue;
      for (int j = 0; j < se.px.rows(); ++j) {
        for (int i = 0; i < se.px.cols(); ++i) {
          if (!se.px(j, i)) continue;
          const int tx = x + i - rx, ty = y + j - ry;
          if (tx >= 0 && ty >= 0 && tx < w && ty < h) out.px(ty, tx) = true;
        }
      }
    }
  }
  return out;
}

}  // namespace

RgbImage::RgbImage(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw ImageError("image dimensions must be positive");
  data_.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = fill.r;
    data_[i + 1] = fill.g;
    data_[i + 2] = fill.b;
  }
}

Hsv rgb_to_hsv(Rgb c) {
  const double r = c.r / 255.0, g = c.g / 255.0, b = c.b / 255.0;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  Hsv out;
  out.v = mx;
  out.s = mx > 0.0 ? delta / mx : 0.0;
  if (delta <= 0.0) return out;
  double h;
  if (mx == r) {
    h = 60.0 * ((g - b) / delta);
  } else if (mx == g) {
    h = 60.0 * ((b - r) / delta + 2.0);
  } else {
    h = 60.0 * ((r - g) / delta + 4.0);
  }
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
  out.h = h;
  return out;
}

std::vector<Hsv> rgb_to_hsv(const RgbImage& img) {
  std::vector<Hsv> out;
  out.reserve(static_cast<std::size_t>(img.width()) * img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) out.push_back(rgb_to_hsv(img.at(x, y)));
  return out;
}

Rgb hsv_to_rgb(Hsv c) {
  const double h = std::fmod(std::fmod(c.h, 360.0) + 360.0, 360.0) / 60.0;
  const double chroma = c.v * c.s;
  const double xx = chroma * (1.0 - std::abs(std::fmod(h, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h)) {
    case 0: r = chroma; g = xx; break;
    case 1: r = xx; g = chroma; break;
    case 2: g = chroma; b = xx; break;
    case 3: g = xx; b = chroma; break;
    case 4: r = xx; b = chroma; break;
    default: r = chroma; b = xx; break;
  }
  const double m = c.v - chroma;
  return {round_u8((r + m) * 255.0), round_u8((g + m) * 255.0), round_u8((b + m) * 255.0)};
}

BinaryMask hue_range_mask(const RgbImage& img, double hue_lo, double hue_hi, double sat_min,
                          double val_min) {
  BinaryMask out(img.width(), img.height(), false);
  const bool wraps = hue_lo > hue_hi;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const Hsv p = rgb_to_hsv(img.at(x, y));
      const bool in_hue = wraps ? (p.h >= hue_lo || p.h <= hue_hi)
                                : (p.h >= hue_lo && p.h <= hue_hi);
      out.px(y, x) = in_hue && p.s >= sat_min && p.v >= val_min;
    }
  }
  return out;
}

GrayImage to_gray(const RgbImage& img) {
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const Rgb c = img.at(x, y);
      out.px(y, x) = static_cast<std::uint8_t>((299 * c.r + 587 * c.g + 114 * c.b + 500) / 1000);
    }
  }
  return out;
}

LabelMap connected_components(const BinaryMask& mask, Connectivity connectivity) {
  const int w = mask.width(), h = mask.height();
  Raster<std::int32_t> prov = Raster<std::int32_t>::Zero(h, w);
  DisjointSet sets;
  const bool eight = connectivity == Connectivity::Eight;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.px(y, x)) continue;
      std::array<std::int32_t, 4> nb{};
      int n = 0;
      auto look = [&](int nx, int ny) {
        if (nx >= 0 && ny >= 0 && nx < w && prov(ny, nx) != 0) nb[n++] = prov(ny, nx);
      };
      look(x - 1, y);
      look(x, y - 1);
      if (eight) {
        look(x - 1, y - 1);
        look(x + 1, y - 1);
      }
      if (n == 0) {
        prov(y, x) = sets.make();
        continue;
      }
      std::int32_t lbl = nb[0];
      for (int i = 1; i < n; ++i) lbl = std::min(lbl, nb[i]);
      prov(y, x) = lbl;
      for (int i = 0; i < n; ++i) sets.unite(lbl, nb[i]);
    }
  }

  LabelMap lm;
  lm.labels = Raster<std::int32_t>::Zero(h, w);
  std::vector<std::int32_t> final_of(sets.parent.size(), 0);
  std::vector<long long> sum_x, sum_y;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (prov(y, x) == 0) continue;
      const std::int32_t root = sets.find(prov(y, x));
      if (final_of[root] == 0) {
        final_of[root] = static_cast<std::int32_t>(lm.components.size()) + 1;
        lm.components.push_back({final_of[root], 0, {}});
        sum_x.push_back(0);
        sum_y.push_back(0);
      }
      const std::int32_t lbl = final_of[root];
      lm.labels(y, x) = lbl;
      lm.components[lbl - 1].area += 1;
      sum_x[lbl - 1] += x;
      sum_y[lbl - 1] += y;
    }
  }
  for (std::size_t i = 0; i < lm.components.size(); ++i) {
    auto& c = lm.components[i];
    c.centroid = {static_cast<double>(sum_x[i]) / static_cast<double>(c.area),
                  static_cast<double>(sum_y[i]) / static_cast<double>(c.area)};
  }
  return lm;
}

BinaryMask component_mask(const LabelMap& lm, int label) {
  return BinaryMask(Raster<bool>(lm.labels == label));
}

BinaryMask largest_component(const LabelMap& lm) {
  if (lm.components.empty()) throw ImageError("label map has no components");
  const Component* best = &lm.components.front();
  for (const auto& c : lm.components) {
    if (c.area > best->area) best = &c;
  }
  return component_mask(lm, best->label);
}

GrayImage clahe(const GrayImage& img, const ClaheParams& params) {
  if (params.bins < 2) throw ImageError("clahe needs at least two bins");
  if (params.grid_cols < 1 || params.grid_rows < 1) throw ImageError("clahe grid must be positive");
  if (!(params.clip_limit > 0.0)) throw ImageError("clahe clip limit must be positive");

  const int w = img.width(), h = img.height();
  const int cols = params.grid_cols, rows = params.grid_rows, bins = params.bins;
  const int tile_w = (w + cols - 1) / cols;
  const int tile_h = (h + rows - 1) / rows;
  const long tile_pixels = static_cast<long>(tile_w) * tile_h;
  const long limit = std::max<long>(
      1, static_cast<long>(params.clip_limit * static_cast<double>(tile_pixels) / bins));

  auto bin_of = [bins](int v) { return v * bins / 256; };

  // luts(tile_row * cols + tile_col, bin)
  Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> luts(rows * cols,
                                                                                     bins);
  std::vector<long> hist(bins);
  for (int ty = 0; ty < rows; ++ty) {
    for (int tx = 0; tx < cols; ++tx) {
      std::fill(hist.begin(), hist.end(), 0);
      for (int y = ty * tile_h; y < (ty + 1) * tile_h; ++y) {
        const int sy = std::min(y, h - 1);
        for (int x = tx * tile_w; x < (tx + 1) * tile_w; ++x) {
          hist[bin_of(img.px(sy, std::min(x, w - 1)))] += 1;
        }
      }
      long excess = 0;
      for (auto& c : hist) {
        if (c > limit) {
          excess += c - limit;
          c = limit;
        }
      }
      const long batch = excess / bins;
      long residual = excess % bins;
      for (auto& c : hist) c += batch;
      if (residual > 0) {
        const long step = std::max<long>(1, bins / residual);
        for (long i = 0; i < bins && residual > 0; i += step, --residual) hist[i] += 1;
      }
      long cdf = 0;
      for (int b = 0; b < bins; ++b) {
        cdf += hist[b];
        luts(ty * cols + tx, b) =
            round_u8(255.0 * static_cast<double>(cdf) / static_cast<double>(tile_pixels));
      }
    }
  }

  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    const double fy = (y + 0.5) / tile_h - 0.5;
    const int ty0 = static_cast<int>(std::floor(fy));
    const double wy = fy - ty0;
    const int r0 = std::clamp(ty0, 0, rows - 1), r1 = std::clamp(ty0 + 1, 0, rows - 1);
    for (int x = 0; x < w; ++x) {
      const double fx = (x + 0.5) / tile_w - 0.5;
      const int tx0 = static_cast<int>(std::floor(fx));
      const double wx = fx - tx0;
      const int c0 = std::clamp(tx0, 0, cols - 1), c1 = std::clamp(tx0 + 1, 0, cols - 1);
      const int b = bin_of(img.px(y, x));
      const double top = (1.0 - wx) * luts(r0 * cols + c0, b) + wx * luts(r0 * cols + c1, b);
      const double bot = (1.0 - wx) * luts(r1 * cols + c0, b) + wx * luts(r1 * cols + c1, b);
      out.px(y, x) = round_u8((1.0 - wy) * top + wy * bot);
    }
  }
  return out;
}

GrayImage median_filter(const GrayImage& img, int radius) {
  if (radius < 1) throw ImageError("median radius must be >= 1");
  const int w = img.width(), h = img.height();
  const int side = 2 * radius + 1;
  std::vector<std::uint8_t> window(static_cast<std::size_t>(side) * side);
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::size_t k = 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int sy = std::clamp(y + dy, 0, h - 1);
        for (int dx = -radius; dx <= radius; ++dx) {
          window[k++] = img.px(sy, std::clamp(x + dx, 0, w - 1));
        }
      }
      auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
      std::nth_element(window.begin(), mid, window.end());
      out.px(y, x) = *mid;
    }
  }
  return out;
}

BinaryMask adaptive_threshold(const GrayImage& img, int block, double c) {
  if (block < 3 || block % 2 == 0) throw ImageError("threshold block must be odd and >= 3");
  const int w = img.width(), h = img.height();
  const int r = block / 2;
  // Integral image over the edge-replicated, r-padded raster.
  const int pw = w + 2 * r, ph = h + 2 * r;
  Eigen::Array<long long, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> integral =
      decltype(integral)::Zero(ph + 1, pw + 1);
  for (int y = 0; y < ph; ++y) {
    const int sy = std::clamp(y - r, 0, h - 1);
    long long row = 0;
    for (int x = 0; x < pw; ++x) {
      row += img.px(sy, std::clamp(x - r, 0, w - 1));
      integral(y + 1, x + 1) = integral(y, x + 1) + row;
    }
  }
  const double area = static_cast<double>(block) * block;
  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // window in padded coords: [x, x + block) x [y, y + block)
      const long long sum = integral(y + block, x + block) - integral(y, x + block) -
                            integral(y + block, x) + integral(y, x);
      out.px(y, x) = static_cast<double>(img.px(y, x)) > static_cast<double>(sum) / area - c;
    }
  }
  return out;
}

StructuringElement StructuringElement::rect(int width, int height) {
  if (width < 1 || height < 1 || width % 2 == 0 || height % 2 == 0) {
    throw ImageError("structuring element dimensions must be odd");
  }
  return {Raster<bool>::Constant(height, width, true)};
}

StructuringElement StructuringElement::cross(int size) {
  StructuringElement se = rect(size, size);
  se.px.setConstant(false);
  se.px.row(size / 2).setConstant(true);
  se.px.col(size / 2).setConstant(true);
  return se;
}

StructuringElement StructuringElement::ellipse(int size) {
  StructuringElement se = rect(size, size);
  const double r = size / 2.0;
  for (int j = 0; j < size; ++j) {
    for (int i = 0; i < size; ++i) {
      const double dx = (i + 0.5 - r) / r, dy = (j + 0.5 - r) / r;
      se.px(j, i) = dx * dx + dy * dy <= 1.0;
    }
  }
  return se;
}

StructuringElement StructuringElement::reflected() const {
  return {Raster<bool>(px.reverse())};
}

BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b) {
  require_same_size(a, b);
  return BinaryMask(Raster<bool>(a.px && b.px));
}

BinaryMask mask_not(const BinaryMask& a) { return BinaryMask(Raster<bool>(!a.px)); }

BinaryMask morphology(const BinaryMask& mask, MorphOp op, const StructuringElement& element,
                      int iterations) {
  if (element.px.rows() % 2 == 0 || element.px.cols() % 2 == 0) {
    throw ImageError("structuring element dimensions must be odd");
  }
  auto repeat = [&](BinaryMask m, auto&& fn) {
    for (int i = 0; i < iterations; ++i) m = fn(m, element);
    return m;
  };
  switch (op) {
    case MorphOp::Erode: return repeat(mask, erode);
    case MorphOp::Dilate: return repeat(mask, dilate);
    case MorphOp::Open: return repeat(repeat(mask, erode), dilate);
    case MorphOp::Close: return repeat(repeat(mask, dilate), erode);
  }
  return mask;
}

Box bounding_box(const BinaryMask& mask) {
  Box b{mask.width(), mask.height(), -1, -1};
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.px(y, x)) continue;
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x);
      b.y1 = std::max(b.y1, y);
    }
  }
  return b;
}

namespace {

template <typename Fn>
void for_each_disk_pixel(int width, int height, std::span<const Point2d> points, int radius,
                         Fn&& fn) {
  for (const auto& p : points) {
    const int cx = static_cast<int>(std::floor(p.x + 0.5));
    const int cy = static_cast<int>(std::floor(p.y + 0.5));
    for (int dy = -radius; dy <= radius; ++dy) {
      for (int dx = -radius; dx <= radius; ++dx) {
        if (dx * dx + dy * dy > radius * radius) continue;
        const int x = cx + dx, y = cy + dy;
        if (x >= 0 && y >= 0 && x < width && y < height) fn(x, y);
      }
    }
  }
}

}  // namespace

RgbImage draw_dots(const RgbImage& img, std::span<const Point2d> points, int radius, Rgb color) {
  RgbImage out = img;
  for_each_disk_pixel(img.width(), img.height(), points, radius,
                      [&](int x, int y) { out.set(x, y, color); });
  return out;
}

BinaryMask dot_mask(int width, int height, std::span<const Point2d> points, int radius) {
  BinaryMask out(width, height, false);
  for_each_disk_pixel(width, height, points, radius, [&](int x, int y) { out.px(y, x) = true; });
  return out;
}

Point2d CropWindow::to_target(Point2d p) const {
  return {(p.x + 0.5 - x0) / scale_x - 0.5, (p.y + 0.5 - y0) / scale_y - 0.5};
}

CropWindow ear_crop_window(const BinaryMask& ear_mask, int target_width, int target_height) {
  const Box box = bounding_box(ear_mask);
  if (box.empty()) throw ImageError("cannot crop around an empty mask");
  double sx = 0.0, sy = 0.0;
  long n = 0;
  for (int y = box.y0; y <= box.y1; ++y) {
    for (int x = box.x0; x <= box.x1; ++x) {
      if (!ear_mask.px(y, x)) continue;
      sx += x;
      sy += y;
      ++n;
    }
  }
  const double cx = sx / n + 0.5, cy = sy / n + 0.5;
  double half_w = std::max(cx - box.x0, box.x1 + 1.0 - cx);
  double half_h = std::max(cy - box.y0, box.y1 + 1.0 - cy);
  const double aspect = static_cast<double>(target_width) / target_height;
  if (half_w / half_h > aspect) {
    half_h = half_w / aspect;
  } else {
    half_w = half_h * aspect;
  }
  CropWindow win;
  win.x0 = cx - half_w;
  win.y0 = cy - half_h;
  win.scale_x = 2.0 * half_w / target_width;
  win.scale_y = 2.0 * half_h / target_height;
  win.target_width = target_width;
  win.target_height = target_height;
  return win;
}

namespace {

template <typename Sample>
void bilinear_walk(const CropWindow& win, Sample&& sample) {
  for (int v = 0; v < win.target_height; ++v) {
    const double fy = win.y0 + (v + 0.5) * win.scale_y - 0.5;
    const int iy = static_cast<int>(std::floor(fy));
    const double wy = fy - iy;
    for (int u = 0; u < win.target_width; ++u) {
      const double fx = win.x0 + (u + 0.5) * win.scale_x - 0.5;
      const int ix = static_cast<int>(std::floor(fx));
      const double wx = fx - ix;
      sample(u, v, ix, iy, wx, wy);
    }
  }
}

}  // namespace

RgbImage resample(const RgbImage& img, const CropWindow& window, Rgb background) {
  RgbImage out(window.target_width, window.target_height);
  auto fetch = [&](int x, int y) {
    return (x >= 0 && y >= 0 && x < img.width() && y < img.height()) ? img.at(x, y) : background;
  };
  bilinear_walk(window, [&](int u, int v, int ix, int iy, double wx, double wy) {
    const Rgb a = fetch(ix, iy), b = fetch(ix + 1, iy), c = fetch(ix, iy + 1),
              d = fetch(ix + 1, iy + 1);
    auto mix = [&](double pa, double pb, double pc, double pd) {
      return round_u8((1 - wy) * ((1 - wx) * pa + wx * pb) + wy * ((1 - wx) * pc + wx * pd));
    };
    out.set(u, v, {mix(a.r, b.r, c.r, d.r), mix(a.g, b.g, c.g, d.g), mix(a.b, b.b, c.b, d.b)});
  });
  return out;
}

BinaryMask resample(const BinaryMask& mask, const CropWindow& window) {
  BinaryMask out(window.target_width, window.target_height);
  auto fetch = [&](int x, int y) -> double {
    return (x >= 0 && y >= 0 && x < mask.width() && y < mask.height() && mask.px(y, x)) ? 1.0
                                                                                        : 0.0;
  };
  bilinear_walk(window, [&](int u, int v, int ix, int iy, double wx, double wy) {
    const double val = (1 - wy) * ((1 - wx) * fetch(ix, iy) + wx * fetch(ix + 1, iy)) +
                       wy * ((1 - wx) * fetch(ix, iy + 1) + wx * fetch(ix + 1, iy + 1));
    out.px(v, u) = val >= 0.5;
  });
  return out;
}

RgbImage crop_resize(const RgbImage& img, int target_width, int target_height,
                     const BinaryMask& ear_mask, Rgb background) {
  if (ear_mask.width() != img.width() || ear_mask.height() != img.height()) {
    throw ImageError("ear mask does not match image size");
  }
  return resample(img, ear_crop_window(ear_mask, target_width, target_height), background);
}

RgbImage downsample_area(const RgbImage& img, int target_width, int target_height) {
  if (target_width < 1 || target_height < 1 || img.width() % target_width != 0 ||
      img.height() % target_height != 0) {
    throw ImageError("area downsampling needs integer factors");
  }
  const int fx = img.width() / target_width, fy = img.height() / target_height;
  if (fx == 1 && fy == 1) return img;
  const double n = static_cast<double>(fx) * fy;
  RgbImage out(target_width, target_height);
  for (int v = 0; v < target_height; ++v) {
    for (int u = 0; u < target_width; ++u) {
      int r = 0, g = 0, b = 0;
      for (int y = v * fy; y < (v + 1) * fy; ++y) {
        for (int x = u * fx; x < (u + 1) * fx; ++x) {
          const Rgb c = img.at(x, y);
          r += c.r;
          g += c.g;
          b += c.b;
        }
      }
      out.set(u, v, {round_u8(r / n), round_u8(g / n), round_u8(b / n)});
    }
  }
  return out;
}

RgbImage flip_horizontal(const RgbImage& img) {
  RgbImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) out.set(img.width() - 1 - x, y, img.at(x, y));
  return out;
}

RgbImage flip_vertical(const RgbImage& img) {
  RgbImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) out.set(x, img.height() - 1 - y, img.at(x, y));
  return out;
}

GrayImage flip_horizontal(const GrayImage& img) {
  return GrayImage(Raster<std::uint8_t>(img.px.rowwise().reverse()));
}

BinaryMask flip_horizontal(const BinaryMask& mask) {
  return BinaryMask(Raster<bool>(mask.px.rowwise().reverse()));
}

RgbImage apply_mask(const RgbImage& img, const BinaryMask& mask, Rgb fill) {
  if (mask.width() != img.width() || mask.height() != img.height()) {
    throw ImageError("mask does not match image size");
  }
  RgbImage out = img;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (!mask.px(y, x)) out.set(x, y, fill);
  return out;
}

RgbImage gray_to_rgb(const GrayImage& img) {
  RgbImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const auto v = img.px(y, x);
      out.set(x, y, {v, v, v});
    }
  return out;
}

GrayImage mask_to_gray(const BinaryMask& mask) {
  return GrayImage(Raster<std::uint8_t>(
      mask.px.select(Raster<std::uint8_t>::Constant(mask.height(), mask.width(), 255),
                     Raster<std::uint8_t>::Zero(mask.height(), mask.width()))));
}

}  // namespace earcount
