#pragma once

// Training, evaluation and the multi-run group comparison.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "earcount/hinting.hpp"
#include "earcount/metrics.hpp"
#include "earcount/nn/checkpoint.hpp"
#include "earcount/nn/model.hpp"
#include "earcount/stats.hpp"
#include "earcount/synthgen.hpp"

namespace earcount {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 64;
  double lr = 1e-4;
  double plateau_factor = 0.1;
  int plateau_patience = 10;
  double plateau_min_delta = 1e-4;
  std::uint64_t seed = 0;
  PipelineVariant variant = HintsVariant{};
  nn::ModelConfig model;
  int repetitions = 30;
  bool augment_flips = true;
  bool init_head_bias = true;      // start the head bias at the training-target means
  bool freeze_parameters = false;  // no updates and eval-mode forward; scheduler still runs

  void validate() const;
};

// ---- preprocessing ------------------------------------------------------------

/// One image after variant preprocessing, resized to the model input.
struct PreparedSample {
  RgbImage input;  // width = input_shape[1], height = input_shape[2]
  std::array<double, 4> targets{};
  std::string ear_id;
  Side side = Side::Front;
  Split split = Split::Train;
};

/// Preprocessed-image store keyed by (image, variant, pipeline config, size).
/// With a directory, entries persist as PNG files named by key.
class PreprocessCache {
 public:
  explicit PreprocessCache(std::filesystem::path dir = {});

  std::optional<RgbImage> get(std::uint64_t key);
  void put(std::uint64_t key, const RgbImage& img);
  long hits() const;
  long misses() const;

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::map<std::uint64_t, RgbImage> memory_;
  long hits_ = 0, misses_ = 0;
};

std::uint64_t image_hash(const RgbImage& img);
std::uint64_t preprocess_key(std::uint64_t image, const PipelineVariant& v,
                             const PipelineConfig& cfg, int width, int height);

/// Control dots are re-seeded per image from the image content so that every
/// image gets its own random layout.
PipelineVariant per_image_variant(const PipelineVariant& v, std::uint64_t image);

/// Variant output for one image at model resolution. Throws NoEarFound.
RgbImage preprocess_image(const RgbImage& img, const PipelineConfig& cfg,
                          const PipelineVariant& v, int width, int height);

struct PreparedSet {
  std::vector<PreparedSample> samples;
  long skipped = 0;  // images without a detectable ear
};

PreparedSet prepare_samples(const Dataset& ds, const PipelineConfig& cfg,
                            const PipelineVariant& v, int width, int height,
                            PreprocessCache* cache = nullptr, int jobs = 1);

std::vector<const PreparedSample*> in_split(const std::vector<PreparedSample>& s, Split split);

/// Median total_kernels over training images, lower median for even counts.
int control_dot_count(const Manifest& m);
int control_dot_count(const Dataset& ds);

/// Control variants with n_dots == 0 take control_dot_count(ds).
PipelineVariant resolve_variant(const PipelineVariant& v, const Dataset& ds);

/// Model batch [N, 3, W, H]: tensor rows follow image x, columns image y,
/// values scaled to [0, 1].
template <typename Scalar>
nn::Tensor<Scalar> to_tensor(std::span<const RgbImage* const> images) {
  if (images.empty()) throw std::invalid_argument("to_tensor: empty batch");
  const int w = images[0]->width(), h = images[0]->height();
  const auto n = static_cast<nn::Index>(images.size());
  nn::Vector<Scalar> v(n * 3 * w * h);
  for (nn::Index i = 0; i < n; ++i) {
    const RgbImage& img = *images[static_cast<std::size_t>(i)];
    if (img.width() != w || img.height() != h) {
      throw std::invalid_argument("to_tensor: images differ in size");
    }
    const auto px = img.data();
    for (int c = 0; c < 3; ++c)
      for (int x = 0; x < w; ++x)
        for (int y = 0; y < h; ++y)
          v[((i * 3 + c) * w + x) * h + y] =
              static_cast<Scalar>(px[(static_cast<std::size_t>(y) * w + x) * 3 + c]) /
              Scalar(255);
  }
  return nn::Tensor<Scalar>::from({n, 3, w, h}, std::move(v));
}

// ---- evaluation -----------------------------------------------------------------

/// Maps samples to an N x outputs prediction matrix.
using Predictor = std::function<Eigen::MatrixXd(std::span<const PreparedSample* const>)>;

/// Eval-mode forward in batches. The predictor owns a copy of the model.
Predictor model_predictor(const nn::Model<float>& model, int batch_size = 64);
/// Returns the true labels.
Predictor oracle_predictor(int num_outputs = 4);
Predictor constant_predictor(std::vector<double> values);

MetricsReport evaluate(const Predictor& predict, std::span<const PreparedSample* const> samples,
                       int num_outputs, Split split, std::uint64_t run_seed = 0);

MetricsReport evaluate(const nn::Checkpoint& ckpt, const std::vector<PreparedSample>& samples,
                       Split split, std::uint64_t run_seed = 0);

// ---- training ------------------------------------------------------------------

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double lr = 0.0;  // rate used during the epoch
  MetricsReport val;
};

struct TrainResult {
  nn::Checkpoint checkpoint;  // epoch with the best validation R^2 on total kernels
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  long skipped = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train_prepared(const TrainConfig& cfg, const std::vector<PreparedSample>& samples,
                           const EpochCallback& on_epoch = {});

TrainResult train(const TrainConfig& cfg, const PipelineConfig& pipeline, const Dataset& ds,
                  PreprocessCache* cache = nullptr, const EpochCallback& on_epoch = {});

// ---- saliency -------------------------------------------------------------------

/// Raw |d output / d input| (max over channels) in image orientation:
/// rows follow image y, columns image x.
nn::RowMatrix<double> image_saliency(const nn::Model<float>& model, const RgbImage& input,
                                     int output_index = 0);
/// Min-max scaled to 0..255; a constant map becomes black.
GrayImage saliency_to_gray(const nn::RowMatrix<double>& raw);

// ---- group comparison -------------------------------------------------------------

struct GroupSpec {
  std::string name;
  PipelineVariant variant;
  int num_outputs = 4;
};

/// Univariate and multivariate baselines plus the control and hints variants.
std::vector<GroupSpec> default_groups();

struct ComparisonConfig {
  TrainConfig base;
  PipelineConfig pipeline;
  std::vector<GroupSpec> groups = default_groups();
  std::vector<std::string> kruskal_groups;  // empty: all groups
  std::string cnn_group = "hints";          // compared against the manual rule
  int jobs = 1;
  std::filesystem::path checkpoint_dir;  // empty: keep checkpoints in memory only
};

struct RunRecord {
  std::string group;
  int repetition = 0;
  std::uint64_t seed = 0;
  MetricsReport test;
  double best_val_r2 = 0.0;
  int best_epoch = 0;
  std::uint64_t probe = 0;
  nn::Checkpoint checkpoint;
};

struct SummaryRow {
  std::string group;
  std::string metric;  // "r2" or "mae", total kernels on the test split
  Summary stats;
};

struct MetricTest {
  std::string metric;
  GroupComparison result;
};

struct ManualComparison {
  long n = 0;
  double manual_mae = 0.0, manual_r2 = 0.0;
  std::string cnn_group;
  double cnn_mae = 0.0, cnn_r2 = 0.0;  // medians over runs
};

struct ComparisonResult {
  std::vector<RunRecord> runs;  // ordered by group, then repetition
  std::vector<SummaryRow> summary;
  std::vector<MetricTest> tests;
  std::optional<ManualComparison> manual;
  int control_dots = 0;
  long skipped = 0;
};

using LogFn = std::function<void(const std::string&)>;

ComparisonResult run_comparison(const ComparisonConfig& cfg, const Dataset& ds,
                                PreprocessCache* cache = nullptr, const LogFn& log = {});

/// Manual two-row rule against the true totals of a split.
std::pair<double, double> manual_metrics(const Dataset& ds, Split split);  // (mae, r2)

/// Writes summary.csv, runs.csv, stats.json and manual_vs_cnn.csv. Per-run
/// checkpoints are saved during the run when checkpoint_dir is set.
void write_comparison(const ComparisonResult& result, const std::filesystem::path& dir,
                      std::uint64_t config_hash);

std::string format_hash(std::uint64_t h);

}  // namespace earcount
