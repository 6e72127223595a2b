#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "earcount/experiment.hpp"
#include "earcount/nn/optim.hpp"

namespace earcount {

void TrainConfig::validate() const {
  auto check = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("train config: " + what);
  };
  check(epochs >= 1, "epochs must be >= 1");
  check(batch_size >= 1, "batch_size must be >= 1");
  check(lr >= 0.0 && std::isfinite(lr), "lr must be finite and non-negative");
  check(plateau_factor > 0.0 && plateau_factor < 1.0, "plateau_factor must lie in (0, 1)");
  check(plateau_patience >= 1, "plateau_patience must be >= 1");
  check(plateau_min_delta >= 0.0, "plateau_min_delta must be >= 0");
  check(repetitions >= 1, "repetitions must be >= 1");
  model.validate();
}

namespace {

nn::Tensor<float> target_tensor(std::span<const PreparedSample* const> batch, int outputs) {
  nn::Vector<float> v(static_cast<nn::Index>(batch.size()) * outputs);
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (int o = 0; o < outputs; ++o)
      v[static_cast<nn::Index>(i) * outputs + o] = static_cast<float>(batch[i]->targets[o]);
  return nn::Tensor<float>::from({static_cast<nn::Index>(batch.size()), outputs}, std::move(v));
}

}  // namespace

TrainResult train_prepared(const TrainConfig& cfg, const std::vector<PreparedSample>& samples,
                           const EpochCallback& on_epoch) {
  cfg.validate();
  const auto train_set = in_split(samples, Split::Train);
  const auto val_set = in_split(samples, Split::Val);
  if (train_set.empty()) throw std::invalid_argument("train: empty training split");
  if (val_set.empty()) throw std::invalid_argument("train: empty validation split");
  const int in_w = cfg.model.input_shape[1], in_h = cfg.model.input_shape[2];
  for (const auto* s : train_set) {
    if (s->input.width() != in_w || s->input.height() != in_h) {
      throw std::invalid_argument("train: prepared inputs do not match the model input shape");
    }
  }

  const int outputs = cfg.model.num_outputs;
  nn::Model<float> model(cfg.model);
  if (cfg.init_head_bias) {
    auto& bias = model.head_bias().value();
    for (int o = 0; o < outputs; ++o) {
      double sum = 0.0;
      for (const auto* s : train_set) sum += s->targets[o];
      bias[o] = static_cast<float>(sum / static_cast<double>(train_set.size()));
    }
  }

  std::mt19937_64 rng(cfg.seed);
  auto params = model.parameter_tensors();
  nn::AdamState<float> adam;
  nn::ReduceOnPlateau plateau(cfg.lr, cfg.plateau_factor, cfg.plateau_patience,
                              cfg.plateau_min_delta);

  TrainResult result;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = plateau.lr();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      // a lone trailing sample would give degenerate batch statistics
      if (end - start == 1 && order.size() > 1) break;
      std::vector<RgbImage> inputs;
      std::vector<const PreparedSample*> batch;
      for (std::size_t i = start; i < end; ++i) {
        const PreparedSample* s = train_set[order[i]];
        batch.push_back(s);
        inputs.push_back(cfg.augment_flips ? augment_flips(s->input, rng) : s->input);
      }
      std::vector<const RgbImage*> ptrs;
      for (const auto& im : inputs) ptrs.push_back(&im);
      const auto x = to_tensor<float>(ptrs);
      const auto target = target_tensor(batch, outputs);
      if (cfg.freeze_parameters) {
        const auto y = model.forward(x, nn::Mode::Eval);
        loss_sum += nn::mae_loss(y, target).item() * static_cast<double>(batch.size());
      } else {
        model.zero_grad();
        const auto y = model.forward(x, nn::Mode::Train, &rng);
        const auto loss = nn::mae_loss(y, target);
        loss.backward();
        nn::adam_step(params, adam, lr);
        loss_sum += loss.item() * static_cast<double>(batch.size());
      }
      seen += batch.size();
    }
    model.zero_grad();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    rec.lr = lr;
    rec.val = evaluate(model_predictor(model), val_set, outputs, Split::Val, cfg.seed);
    const double metric = rec.val.total_r2();
    plateau.step(metric);
    if (result.best_epoch == 0 || (!std::isnan(metric) && metric > best)) {
      if (!std::isnan(metric)) best = metric;
      result.best_epoch = epoch;
      result.checkpoint = nn::make_checkpoint(model, metric, epoch, &adam);
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

TrainResult train(const TrainConfig& cfg, const PipelineConfig& pipeline, const Dataset& ds,
                  PreprocessCache* cache, const EpochCallback& on_epoch) {
  cfg.validate();
  const auto variant = resolve_variant(cfg.variant, ds);
  auto prepared = prepare_samples(ds, pipeline, variant, cfg.model.input_shape[1],
                                  cfg.model.input_shape[2], cache);
  TrainResult r = train_prepared(cfg, prepared.samples, on_epoch);
  r.skipped = prepared.skipped;
  return r;
}

}  // namespace earcount
