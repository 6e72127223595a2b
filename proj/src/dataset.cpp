#include <algorithm>
#include <cstdio>
#include <stdexcept>
#include <thread>

#include "earcount/experiment.hpp"
#include "earcount/hash.hpp"
#include "earcount/nn/saliency.hpp"
#include "earcount/png_io.hpp"

namespace earcount {

std::string format_hash(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---- cache ----------------------------------------------------------------------

PreprocessCache::PreprocessCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

std::optional<RgbImage> PreprocessCache::get(std::uint64_t key) {
  {
    std::lock_guard lock(mu_);
    if (auto it = memory_.find(key); it != memory_.end()) {
      ++hits_;
      return it->second;
    }
  }
  if (!dir_.empty()) {
    const auto path = dir_ / (format_hash(key) + ".png");
    if (std::filesystem::exists(path)) {
      RgbImage img = read_png_rgb(path);
      std::lock_guard lock(mu_);
      memory_.emplace(key, img);
      ++hits_;
      return img;
    }
  }
  std::lock_guard lock(mu_);
  ++misses_;
  return std::nullopt;
}

void PreprocessCache::put(std::uint64_t key, const RgbImage& img) {
  if (!dir_.empty()) {
    // write under a temporary name so concurrent readers never see a partial file
    const auto final_path = dir_ / (format_hash(key) + ".png");
    const auto tmp = dir_ / (format_hash(key) + ".tmp" +
                             format_hash(std::hash<std::thread::id>{}(std::this_thread::get_id())));
    write_png(tmp, img);
    std::filesystem::rename(tmp, final_path);
  }
  std::lock_guard lock(mu_);
  memory_.insert_or_assign(key, img);
}

long PreprocessCache::hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}

long PreprocessCache::misses() const {
  std::lock_guard lock(mu_);
  return misses_;
}

std::uint64_t image_hash(const RgbImage& img) {
  Fnv1a h;
  h.add(img.width()).add(img.height());
  h.add_span(img.data());
  return h.value();
}

std::uint64_t preprocess_key(std::uint64_t image, const PipelineVariant& v,
                             const PipelineConfig& cfg, int width, int height) {
  Fnv1a h;
  h.add(image).add(variant_hash(v)).add(cfg.hash()).add(width).add(height);
  return h.value();
}

PipelineVariant per_image_variant(const PipelineVariant& v, std::uint64_t image) {
  if (const auto* c = std::get_if<ControlVariant>(&v)) {
    return ControlVariant{c->n_dots, derive_seed(c->seed, image)};
  }
  return v;
}

RgbImage preprocess_image(const RgbImage& img, const PipelineConfig& cfg,
                          const PipelineVariant& v, int width, int height) {
  RgbImage out = apply_variant(img, cfg, per_image_variant(v, image_hash(img))).output_image;
  if (out.width() == width && out.height() == height) return out;
  return downsample_area(out, width, height);
}

// ---- prepared samples -----------------------------------------------------------

PreparedSet prepare_samples(const Dataset& ds, const PipelineConfig& cfg,
                            const PipelineVariant& v, int width, int height,
                            PreprocessCache* cache, int jobs) {
  const std::size_t n = ds.images.size();
  std::vector<std::optional<RgbImage>> outputs(n);
  std::vector<std::exception_ptr> errors(n);

  auto work = [&](std::size_t i) {
    const DatasetImage& di = ds.images[i];
    try {
      const std::uint64_t key = preprocess_key(image_hash(di.image), v, cfg, width, height);
      if (cache) {
        if (auto hit = cache->get(key)) {
          outputs[i] = std::move(*hit);
          return;
        }
      }
      outputs[i] = preprocess_image(di.image, cfg, v, width, height);
      if (cache) cache->put(key, *outputs[i]);
    } catch (const NoEarFound&) {
      // left empty and counted below
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  const int threads = std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(n, 1)));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = static_cast<std::size_t>(t); i < n; i += static_cast<std::size_t>(threads)) {
          work(i);
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  PreparedSet out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!outputs[i]) {
      ++out.skipped;
      continue;
    }
    const DatasetImage& di = ds.images[i];
    out.samples.push_back({std::move(*outputs[i]), di.labels.as_array(), di.ear_id, di.side, di.split});
  }
  return out;
}

std::vector<const PreparedSample*> in_split(const std::vector<PreparedSample>& s, Split split) {
  std::vector<const PreparedSample*> out;
  for (const auto& p : s) {
    if (p.split == split) out.push_back(&p);
  }
  return out;
}

namespace {

int lower_median_count(std::vector<double> totals) {
  if (totals.empty()) throw std::invalid_argument("control_dot_count: empty training split");
  return static_cast<int>(lower_median(std::move(totals)));
}

}  // namespace

int control_dot_count(const Manifest& m) {
  std::vector<double> totals;
  for (const auto& r : m.records) {
    if (r.split == Split::Train) totals.push_back(r.labels.total_kernels);
  }
  return lower_median_count(std::move(totals));
}

int control_dot_count(const Dataset& ds) {
  std::vector<double> totals;
  for (const auto& im : ds.images) {
    if (im.split == Split::Train) totals.push_back(im.labels.total_kernels);
  }
  return lower_median_count(std::move(totals));
}

PipelineVariant resolve_variant(const PipelineVariant& v, const Dataset& ds) {
  if (const auto* c = std::get_if<ControlVariant>(&v); c && c->n_dots == 0) {
    return ControlVariant{control_dot_count(ds), c->seed};
  }
  return v;
}

// ---- evaluation -----------------------------------------------------------------

Predictor model_predictor(const nn::Model<float>& model, int batch_size) {
  if (batch_size < 1) throw std::invalid_argument("model_predictor: batch_size must be >= 1");
  auto shared = std::make_shared<nn::Model<float>>(model);
  auto mu = std::make_shared<std::mutex>();
  return [shared, mu, batch_size](std::span<const PreparedSample* const> samples) {
    const int outputs = shared->config().num_outputs;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(samples.size()), outputs);
    std::lock_guard lock(*mu);
    for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(batch_size)) {
      const std::size_t end = std::min(samples.size(), start + static_cast<std::size_t>(batch_size));
      std::vector<const RgbImage*> imgs;
      for (std::size_t i = start; i < end; ++i) imgs.push_back(&samples[i]->input);
      const auto y = shared->forward(to_tensor<float>(imgs), nn::Mode::Eval);
      for (std::size_t i = start; i < end; ++i)
        for (int o = 0; o < outputs; ++o)
          out(static_cast<Eigen::Index>(i), o) = y.value()[static_cast<nn::Index>((i - start) * outputs + o)];
    }
    return out;
  };
}

Predictor oracle_predictor(int num_outputs) {
  return [num_outputs](std::span<const PreparedSample* const> samples) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(samples.size()), num_outputs);
    for (std::size_t i = 0; i < samples.size(); ++i)
      for (int o = 0; o < num_outputs; ++o) out(static_cast<Eigen::Index>(i), o) = samples[i]->targets[o];
    return out;
  };
}

Predictor constant_predictor(std::vector<double> values) {
  return [values](std::span<const PreparedSample* const> samples) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(values.size()));
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      for (Eigen::Index o = 0; o < out.cols(); ++o) out(i, o) = values[static_cast<std::size_t>(o)];
    return out;
  };
}

MetricsReport evaluate(const Predictor& predict, std::span<const PreparedSample* const> samples,
                       int num_outputs, Split split, std::uint64_t run_seed) {
  if (samples.empty()) throw std::invalid_argument("evaluate: empty split " + to_string(split));
  const Eigen::MatrixXd pred = predict(samples);
  if (pred.rows() != static_cast<Eigen::Index>(samples.size()) || pred.cols() != num_outputs) {
    throw std::invalid_argument("evaluate: predictor returned the wrong shape");
  }
  MetricsReport r;
  r.n = static_cast<long>(samples.size());
  r.split = split;
  r.run_seed = run_seed;
  for (int o = 0; o < num_outputs; ++o) {
    std::vector<double> p(samples.size()), t(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      p[i] = pred(static_cast<Eigen::Index>(i), o);
      t[i] = samples[i]->targets[o];
    }
    r.mae.push_back(mae(p, t));
    const bool constant = std::all_of(t.begin(), t.end(), [&](double v) { return v == t[0]; });
    r.r2.push_back(constant || t.size() < 2 ? std::numeric_limits<double>::quiet_NaN()
                                            : r_squared(p, t));
  }
  return r;
}

MetricsReport evaluate(const nn::Checkpoint& ckpt, const std::vector<PreparedSample>& samples,
                       Split split, std::uint64_t run_seed) {
  const auto model = nn::model_from(ckpt);
  const auto subset = in_split(samples, split);
  return evaluate(model_predictor(model), subset, ckpt.config.num_outputs, split, run_seed);
}

// ---- saliency -------------------------------------------------------------------

nn::RowMatrix<double> image_saliency(const nn::Model<float>& model, const RgbImage& input,
                                     int output_index) {
  nn::Model<double> m = model.cast<double>();
  const RgbImage* imgs[] = {&input};
  const auto x = to_tensor<double>(imgs);
  const auto raw = nn::saliency_map(
      [&](const nn::Tensor<double>& t) { return m.forward(t, nn::Mode::Eval); }, x, output_index);
  // tensor rows are image columns
  return raw.transpose();
}

GrayImage saliency_to_gray(const nn::RowMatrix<double>& raw) {
  const auto scaled = nn::normalize_saliency(raw);
  GrayImage g;
  g.px.resize(scaled.rows(), scaled.cols());
  for (Eigen::Index y = 0; y < scaled.rows(); ++y)
    for (Eigen::Index x = 0; x < scaled.cols(); ++x)
      g.px(y, x) = static_cast<std::uint8_t>(std::lround(scaled(y, x)));
  return g;
}

}  // namespace earcount
