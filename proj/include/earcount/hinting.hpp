#pragma once

// Kernel-centre hinting: ear segmentation, kernel-centre detection and the
// three preprocessing variants compared in the experiments (segmentation
// only, random dots, dots on detected kernel centres).

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "earcount/imgcore.hpp"

namespace earcount {

class NoEarFound : public std::runtime_error {
 public:
  NoEarFound() : std::runtime_error("no ear found: hue gate selected no pixels") {}
};

struct MorphStep {
  MorphOp op = MorphOp::Open;
  int iterations = 1;
};

struct PipelineConfig {
  // segmentation
  double hue_lo = 20.0;
  double hue_hi = 70.0;
  double sat_min = 0.35;
  double val_min = 0.2;
  // enhancement
  int clahe_cols = 8;
  int clahe_rows = 8;
  double clahe_clip = 2.0;
  int median_radius = 1;
  // binarisation
  int thresh_block = 15;
  double thresh_c = 2.0;
  StructuringElement morph_element = StructuringElement::rect(3, 3);
  std::vector<MorphStep> morph_sequence{{MorphOp::Open, 1}};
  Connectivity connectivity = Connectivity::Eight;
  // centre filter; max_component_area falls back to a fraction of ear area
  long min_component_area = 4;
  std::optional<long> max_component_area;
  double max_component_fraction = 0.05;
  // marking
  int dot_radius = 2;
  Rgb dot_color{0, 0, 255};

  /// Throws std::invalid_argument on violated invariants.
  void validate() const;
  /// Stable digest of every field, used as a cache key.
  std::uint64_t hash() const;
};

struct BaselineVariant {};
struct ControlVariant {
  int n_dots = 240;
  std::uint64_t seed = 0;
};
struct HintsVariant {};

using PipelineVariant = std::variant<BaselineVariant, ControlVariant, HintsVariant>;

std::string variant_name(const PipelineVariant& v);
/// "baseline", "control" or "hints"; control takes n_dots and seed.
PipelineVariant parse_variant(const std::string& name, int n_dots = 240, std::uint64_t seed = 0);
std::uint64_t variant_hash(const PipelineVariant& v);

struct HintResult {
  BinaryMask ear_mask;
  RgbImage masked_image;
  std::vector<Point2d> hint_points;
  RgbImage output_image;
};

/// Intermediate rasters of the centre detector, for inspection.
struct HintStages {
  GrayImage enhanced;      // grey -> CLAHE -> median
  BinaryMask thresholded;  // adaptive threshold AND ear mask
  BinaryMask morphed;      // after the morphology sequence
};

struct Segmentation {
  BinaryMask ear_mask;
  RgbImage masked_image;  // non-ear pixels black
};

/// Hue gate, then the largest 8-connected component. Throws NoEarFound.
Segmentation segment_ear(const RgbImage& img, const PipelineConfig& cfg);

/// Centroids of size-filtered blobs of the binarised, enhanced ear.
std::vector<Point2d> detect_kernel_centers(const RgbImage& masked, const BinaryMask& ear_mask,
                                           const PipelineConfig& cfg,
                                           HintStages* stages = nullptr);

HintResult apply_variant(const RgbImage& img, const PipelineConfig& cfg,
                         const PipelineVariant& variant, HintStages* stages = nullptr);

}  // namespace earcount
