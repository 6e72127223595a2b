#pragma once

// Raster primitives: colour conversion, histogram equalisation, filtering,
// thresholding, morphology and connected-component analysis.
//
// Every routine here is a pure function of its arguments. Rasters are stored
// row-major; (x, y) means (column, row).

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace earcount {

template <typename T>
using Raster = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct Point2d {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2d&, const Point2d&) = default;
};

/// Interleaved 8-bit RGB image.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int width, int height, Rgb fill = {});

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }

  Rgb at(int x, int y) const {
    const std::uint8_t* p = &data_[index(x, y)];
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb c) {
    std::uint8_t* p = &data_[index(x, y)];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }

  std::span<const std::uint8_t> data() const { return data_; }
  std::span<std::uint8_t> data() { return data_; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// 8-bit luminance image; px(y, x).
struct GrayImage {
  Raster<std::uint8_t> px;

  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 0)
      : px(Raster<std::uint8_t>::Constant(height, width, fill)) {}
  explicit GrayImage(Raster<std::uint8_t> p) : px(std::move(p)) {}

  int width() const { return static_cast<int>(px.cols()); }
  int height() const { return static_cast<int>(px.rows()); }
  std::uint8_t at(int x, int y) const { return px(y, x); }
  bool operator==(const GrayImage& o) const {
    return px.rows() == o.px.rows() && px.cols() == o.px.cols() && (px == o.px).all();
  }
};

/// Boolean raster, true = foreground; px(y, x).
struct BinaryMask {
  Raster<bool> px;

  BinaryMask() = default;
  BinaryMask(int width, int height, bool fill = false)
      : px(Raster<bool>::Constant(height, width, fill)) {}
  explicit BinaryMask(Raster<bool> p) : px(std::move(p)) {}

  int width() const { return static_cast<int>(px.cols()); }
  int height() const { return static_cast<int>(px.rows()); }
  bool at(int x, int y) const { return px(y, x); }
  long count() const { return px.count(); }
  bool operator==(const BinaryMask& o) const {
    return px.rows() == o.px.rows() && px.cols() == o.px.cols() && (px == o.px).all();
  }
};

struct Component {
  int label = 0;
  long area = 0;
  Point2d centroid;
};

struct LabelMap {
  Raster<std::int32_t> labels;  // 0 = background
  std::vector<Component> components;  // components[i].label == i + 1

  int width() const { return static_cast<int>(labels.cols()); }
  int height() const { return static_cast<int>(labels.rows()); }
};

struct Hsv {
  double h = 0.0;  // degrees, [0, 360)
  double s = 0.0;
  double v = 0.0;
};

struct Box {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;  // inclusive
  bool empty() const { return x1 < x0 || y1 < y0; }
};

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Connectivity { Four = 4, Eight = 8 };
enum class MorphOp { Erode, Dilate, Open, Close };

// ---- colour -----------------------------------------------------------------

Hsv rgb_to_hsv(Rgb c);
std::vector<Hsv> rgb_to_hsv(const RgbImage& img);
Rgb hsv_to_rgb(Hsv c);

/// Foreground where hue is in [hue_lo, hue_hi] (wrapping when hue_lo > hue_hi)
/// and saturation/value clear their minimums.
BinaryMask hue_range_mask(const RgbImage& img, double hue_lo, double hue_hi,
                          double sat_min, double val_min);

/// ITU-R BT.601 luma, rounded to nearest.
GrayImage to_gray(const RgbImage& img);

// ---- components -------------------------------------------------------------

/// Labels are assigned in raster-scan order of each component's first pixel.
LabelMap connected_components(const BinaryMask& mask,
                              Connectivity connectivity = Connectivity::Eight);

/// Mask of the largest component; ties go to the smallest label.
/// Throws ImageError when there are no components.
BinaryMask largest_component(const LabelMap& lm);

BinaryMask component_mask(const LabelMap& lm, int label);

// ---- enhancement and filtering ---------------------------------------------

struct ClaheParams {
  int grid_cols = 8;
  int grid_rows = 8;
  double clip_limit = 2.0;
  int bins = 256;
};

/// Contrast-limited adaptive histogram equalisation.
///
/// The image is padded by edge replication up to a multiple of the tile grid.
/// Each tile histogram is clipped at max(1, floor(clip_limit * tile_pixels /
/// bins)); the clipped excess is spread evenly over all bins, the remainder one
/// count per bin at stride max(1, bins / remainder). A tile maps bin b to
/// round(255 * cdf(b) / tile_pixels). Output pixels bilinearly blend the
/// mappings of the four nearest tile centres.
GrayImage clahe(const GrayImage& img, const ClaheParams& params = {});

/// Median over the (2r+1)^2 window, edges replicated.
GrayImage median_filter(const GrayImage& img, int radius);

/// Foreground iff value > mean(block x block window, edges replicated) - c.
BinaryMask adaptive_threshold(const GrayImage& img, int block, double c);

// ---- binary morphology -----------------------------------------------------

/// Odd-sized structuring element with its origin at the centre.
struct StructuringElement {
  Raster<bool> px;

  static StructuringElement rect(int width, int height);
  static StructuringElement cross(int size);
  static StructuringElement ellipse(int size);

  int rx() const { return static_cast<int>(px.cols()) / 2; }
  int ry() const { return static_cast<int>(px.rows()) / 2; }
  StructuringElement reflected() const;
};

BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_not(const BinaryMask& a);

/// Out-of-bounds pixels count as background for every operation. Open is
/// `iterations` erosions followed by as many dilations; close is the reverse.
BinaryMask morphology(const BinaryMask& mask, MorphOp op,
                      const StructuringElement& element, int iterations = 1);

// ---- geometry ---------------------------------------------------------------

Box bounding_box(const BinaryMask& mask);

/// Stamps filled disks. Centres are rounded half-up; pixels off the image are
/// dropped.
RgbImage draw_dots(const RgbImage& img, std::span<const Point2d> points, int radius,
                   Rgb color);

/// Disk mask matching draw_dots for the same points and radius.
BinaryMask dot_mask(int width, int height, std::span<const Point2d> points, int radius);

/// Axis-aligned source window mapped onto a target raster. Target pixel
/// centre (u + 0.5, v + 0.5) samples source position
/// (x0 + (u + 0.5) * scale_x, y0 + (v + 0.5) * scale_y) in continuous
/// coordinates, where pixel i covers [i, i + 1).
struct CropWindow {
  double x0 = 0.0, y0 = 0.0;
  double scale_x = 1.0, scale_y = 1.0;
  int target_width = 0, target_height = 0;

  Point2d to_target(Point2d src_pixel) const;
};

/// Window centred on the mask centroid that contains the mask bounding box and
/// has the target aspect ratio. Throws ImageError on an empty mask.
CropWindow ear_crop_window(const BinaryMask& ear_mask, int target_width, int target_height);

/// Bilinear resampling through a window; samples falling outside the source
/// blend with `background`.
RgbImage resample(const RgbImage& img, const CropWindow& window, Rgb background = {});
BinaryMask resample(const BinaryMask& mask, const CropWindow& window);

/// Crop around the ear and bilinearly resize to target (width x height).
RgbImage crop_resize(const RgbImage& img, int target_width, int target_height,
                     const BinaryMask& ear_mask, Rgb background = {});

/// Box-filter downsampling by integer factors in each axis.
RgbImage downsample_area(const RgbImage& img, int target_width, int target_height);

RgbImage flip_horizontal(const RgbImage& img);
RgbImage flip_vertical(const RgbImage& img);
GrayImage flip_horizontal(const GrayImage& img);
BinaryMask flip_horizontal(const BinaryMask& mask);

/// Pixels outside `mask` set to `fill`.
RgbImage apply_mask(const RgbImage& img, const BinaryMask& mask, Rgb fill = {});

RgbImage gray_to_rgb(const GrayImage& img);
GrayImage mask_to_gray(const BinaryMask& mask);

}  // namespace earcount
