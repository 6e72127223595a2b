#pragma once

// Synthetic maize-ear renderer and dataset management: ground-truth labels,
// stratified ear-level splits, flip augmentation and the CSV manifest.

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "earcount/imgcore.hpp"

namespace earcount {

inline constexpr int kCanvasWidth = 1024;
inline constexpr int kCanvasHeight = 256;
inline constexpr int kImageWidth = 512;
inline constexpr int kImageHeight = 128;

struct EarLabels {
  int total_kernels = 0;  // whole ear, both faces
  int num_rows = 0;
  int kernels_row_a = 0;
  int kernels_row_b = 0;

  std::array<double, 4> as_array() const {
    return {static_cast<double>(total_kernels), static_cast<double>(num_rows),
            static_cast<double>(kernels_row_a), static_cast<double>(kernels_row_b)};
  }
  friend bool operator==(const EarLabels&, const EarLabels&) = default;
};

inline constexpr std::array<const char*, 4> kLabelNames = {"total_kernels", "num_rows",
                                                           "kernels_row_a", "kernels_row_b"};

/// Rendering recipe for one hybrid. Lengths are canvas pixels.
struct EarSpec {
  std::string hybrid_id = "H00";
  int num_rows = 16;
  double kernels_per_row_mean = 34.0;
  double kernel_radius = 14.0;  // upper bound on drawn kernel semi-axes
  double ear_length = 880.0;
  double ear_width = 220.0;
  double jitter = 0.08;          // centre jitter, fraction of kernel pitch
  double hue_center = 45.0;
  double noise_sigma = 3.0;      // per-channel Gaussian noise, 8-bit units
  double ear_count_sigma = 2.5;  // ear-to-ear spread of kernels per row
  double row_count_sigma = 1.5;  // row-to-row spread within one ear
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Side { Front, Back };
enum class Split { Train, Val, Test };

std::string to_string(Side s);
std::string to_string(Split s);
Side parse_side(const std::string& s);
Split parse_split(const std::string& s);

struct EarSample {
  RgbImage image;  // kImageWidth x kImageHeight
  EarLabels labels;
  std::string hybrid_id;
  std::string ear_id;
  Side side = Side::Front;
  std::vector<Point2d> true_centers;  // visible kernels, image pixel coordinates
  BinaryMask ear_mask;                // renderer's own ear silhouette
  double kernel_radius = 0.0;         // mean visible kernel semi-minor axis, image pixels
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Renders both faces of one ear. Throws GenerationError if the spec does not
/// fit the canvas.
std::pair<EarSample, EarSample> generate_ear(const EarSpec& spec, std::uint64_t ear_seed);

/// Designated counted rows for `num_rows`; both lie on the front face when
/// it has at least two rows.
std::pair<int, int> counted_rows(int num_rows);

/// Plausible hybrids with seeded random parameters.
std::vector<EarSpec> random_specs(int count, std::uint64_t seed);

// ---- datasets ---------------------------------------------------------------

struct SplitFractions {
  double train = 0.6, val = 0.2, test = 0.2;
};

struct DatasetImage {
  RgbImage image;
  EarLabels labels;
  std::string hybrid_id;
  std::string ear_id;
  Side side = Side::Front;
  Split split = Split::Train;
};

struct Dataset {
  std::vector<DatasetImage> images;

  std::vector<const DatasetImage*> in_split(Split s) const;
};

/// Assigns ears (ear_ids grouped by hybrid, in order) to splits. Every hybrid
/// gets at least one ear per split; the rest fill the global proportions.
std::vector<Split> stratified_split(const std::vector<std::string>& hybrid_of_ear,
                                    SplitFractions fractions, std::uint64_t seed);

/// ears_per_spec >= 3. Ear seeds derive from (seed, hybrid index, ear index).
Dataset generate_dataset(const std::vector<EarSpec>& specs, int ears_per_spec,
                         SplitFractions fractions, std::uint64_t seed, int jobs = 1);

// ---- augmentation -----------------------------------------------------------

RgbImage apply_flips(const RgbImage& img, bool flip_h, bool flip_v);
/// Independent horizontal and vertical flips, each with probability 0.5.
RgbImage augment_flips(const RgbImage& img, std::mt19937_64& rng);

// ---- manifest ---------------------------------------------------------------

inline constexpr const char* kManifestHeader =
    "image_path,ear_id,hybrid_id,side,split,total_kernels,num_rows,kernels_row_a,kernels_row_b";

struct ManifestRecord {
  std::string image_path;  // relative to the manifest directory
  std::string ear_id;
  std::string hybrid_id;
  Side side = Side::Front;
  Split split = Split::Train;
  EarLabels labels;
  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct Manifest {
  std::vector<ManifestRecord> records;
  friend bool operator==(const Manifest&, const Manifest&) = default;
};

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_manifest(const Manifest& m, const std::filesystem::path& path);
/// With check_images, every image_path must exist next to the manifest.
Manifest read_manifest(const std::filesystem::path& path, bool check_images = true);

/// Writes images/<ear_id>_<side>.png plus manifest.csv under `dir`.
Manifest write_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Manifest invariants: ear-level split exclusivity, every hybrid in every split.
void check_manifest_invariants(const Manifest& m);

}  // namespace earcount
