#pragma once

// Residual CNN regressor. Each combined block is a convolutional block
// (conv 3x3 -> BN -> LeakyReLU -> maxpool 2x2) followed by a residual block
// (conv 3x3 -> BN -> LeakyReLU, summed with the block input). After the last
// block: global average pooling, a dense block (dense -> BN -> LeakyReLU ->
// dropout) and a linear output layer with 1 or 4 outputs.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "earcount/nn/ops.hpp"

namespace earcount::nn {

struct ModelConfig {
  std::array<int, 3> input_shape{3, 512, 128};  // channels, height, width
  std::vector<int> block_channels{32, 64, 128, 256, 512, 1024};
  int dense_width = 256;
  double leaky_slope = 0.3;
  double dropout_p = 0.2;
  int num_outputs = 4;
  std::uint64_t seed = 0;
  bool zero_head = false;  // output layer starts at zero

  void validate() const {
    auto check = [](bool ok, const std::string& what) {
      if (!ok) throw std::invalid_argument("model config: " + what);
    };
    check(input_shape[0] >= 1, "input channels must be positive");
    check(!block_channels.empty(), "block_channels must not be empty");
    for (std::size_t i = 0; i < block_channels.size(); ++i) {
      check(block_channels[i] >= 1, "block widths must be positive");
      check(i == 0 || block_channels[i] > block_channels[i - 1],
            "block_channels must be increasing");
    }
    const int factor = 1 << block_channels.size();
    check(input_shape[1] % factor == 0 && input_shape[2] % factor == 0 &&
              input_shape[1] >= factor && input_shape[2] >= factor,
          "input height and width must be divisible by 2^" +
              std::to_string(block_channels.size()));
    check(dense_width >= 1, "dense_width must be positive");
    check(dropout_p >= 0.0 && dropout_p < 1.0, "dropout_p must lie in [0, 1)");
    check(num_outputs == 1 || num_outputs == 4, "num_outputs must be 1 or 4");
  }

  /// Spatial shape of the last block's output.
  std::pair<int, int> feature_hw() const {
    const int factor = 1 << block_channels.size();
    return {input_shape[1] / factor, input_shape[2] / factor};
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename Scalar>
struct NamedTensor {
  std::string name;
  Tensor<Scalar> tensor;
};

template <typename Scalar>
struct NamedBuffer {
  std::string name;
  Vector<Scalar>* values;
};

template <typename Scalar>
class Model {
 public:
  struct ConvUnit {
    Tensor<Scalar> weight, bias, gamma, beta;
    BatchNormStats<Scalar> stats;
  };
  struct CombinedBlock {
    ConvUnit conv;      // widening conv block, followed by pooling
    ConvUnit residual;  // width-preserving residual block
  };

  explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    std::mt19937_64 rng(cfg_.seed);
    int in_ch = cfg_.input_shape[0];
    for (int width : cfg_.block_channels) {
      CombinedBlock b{make_conv(in_ch, width, rng), make_conv(width, width, rng)};
      blocks_.push_back(std::move(b));
      in_ch = width;
    }
    dense_weight_ = he_uniform({cfg_.dense_width, in_ch}, in_ch, rng);
    dense_bias_ = Tensor<Scalar>::zeros({cfg_.dense_width}, true);
    dense_gamma_ = Tensor<Scalar>::constant({cfg_.dense_width}, Scalar(1), true);
    dense_beta_ = Tensor<Scalar>::zeros({cfg_.dense_width}, true);
    dense_stats_ = BatchNormStats<Scalar>(cfg_.dense_width);
    head_weight_ = he_uniform({cfg_.num_outputs, cfg_.dense_width}, cfg_.dense_width, rng);
    if (cfg_.zero_head) head_weight_.value().setZero();
    head_bias_ = Tensor<Scalar>::zeros({cfg_.num_outputs}, true);
    register_all();
  }

  Model(const Model& other) : Model(other.cfg_) { copy_state_from(other); }
  Model& operator=(const Model& other) {
    if (this != &other) {
      Model tmp(other);
      *this = std::move(tmp);
    }
    return *this;
  }
  Model(Model&& other) noexcept
      : cfg_(std::move(other.cfg_)),
        blocks_(std::move(other.blocks_)),
        dense_weight_(std::move(other.dense_weight_)),
        dense_bias_(std::move(other.dense_bias_)),
        dense_gamma_(std::move(other.dense_gamma_)),
        dense_beta_(std::move(other.dense_beta_)),
        dense_stats_(std::move(other.dense_stats_)),
        head_weight_(std::move(other.head_weight_)),
        head_bias_(std::move(other.head_bias_)) {
    register_all();
  }
  Model& operator=(Model&& other) noexcept {
    cfg_ = std::move(other.cfg_);
    blocks_ = std::move(other.blocks_);
    dense_weight_ = std::move(other.dense_weight_);
    dense_bias_ = std::move(other.dense_bias_);
    dense_gamma_ = std::move(other.dense_gamma_);
    dense_beta_ = std::move(other.dense_beta_);
    dense_stats_ = std::move(other.dense_stats_);
    head_weight_ = std::move(other.head_weight_);
    head_bias_ = std::move(other.head_bias_);
    register_all();
    return *this;
  }

  const ModelConfig& config() const { return cfg_; }

  /// x: [N, C, H, W] matching input_shape. Train mode needs `rng` for dropout.
  Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode, std::mt19937_64* rng = nullptr) {
    if (x.rank() != 4 || x.dim(1) != cfg_.input_shape[0] || x.dim(2) != cfg_.input_shape[1] ||
        x.dim(3) != cfg_.input_shape[2]) {
      throw ShapeError("model input " + to_string(x.shape()) + " does not match config");
    }
    const Scalar slope = static_cast<Scalar>(cfg_.leaky_slope);
    Tensor<Scalar> h = x;
    for (auto& b : blocks_) {
      h = maxpool2d(conv_unit(h, b.conv, mode, slope), 2);
      h = residual_add(conv_unit(h, b.residual, mode, slope), h);
    }
    h = global_avg_pool(h);
    h = dense(h, dense_weight_, dense_bias_);
    h = leaky_relu(batchnorm(h, dense_gamma_, dense_beta_, dense_stats_, mode), slope);
    const auto p = static_cast<Scalar>(cfg_.dropout_p);
    if (mode == Mode::Train && p > 0) {
      if (!rng) throw std::invalid_argument("train-mode forward needs an rng for dropout");
      h = dropout(h, p, mode, *rng);
    }
    return dense(h, head_weight_, head_bias_);
  }

  /// Output of the combined blocks only, before pooling.
  Tensor<Scalar> features(const Tensor<Scalar>& x, Mode mode) {
    const Scalar slope = static_cast<Scalar>(cfg_.leaky_slope);
    Tensor<Scalar> h = x;
    for (auto& b : blocks_) {
      h = maxpool2d(conv_unit(h, b.conv, mode, slope), 2);
      h = residual_add(conv_unit(h, b.residual, mode, slope), h);
    }
    return h;
  }

  std::vector<NamedTensor<Scalar>>& parameters() { return params_; }
  const std::vector<NamedTensor<Scalar>>& parameters() const { return params_; }
  std::vector<NamedBuffer<Scalar>>& buffers() { return buffers_; }
  const std::vector<NamedBuffer<Scalar>>& buffers() const { return buffers_; }

  std::vector<Tensor<Scalar>> parameter_tensors() const {
    std::vector<Tensor<Scalar>> out;
    for (const auto& p : params_) out.push_back(p.tensor);
    return out;
  }

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

  Tensor<Scalar>& head_bias() { return head_bias_; }

  /// Copies parameter values and running statistics from a same-shaped model.
  template <typename Other>
  void copy_state_from(const Model<Other>& other) {
    const auto& op = other.parameters();
    const auto& ob = other.buffers();
    if (op.size() != params_.size() || ob.size() != buffers_.size()) {
      throw ShapeError("copy_state_from: architecture mismatch");
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (op[i].tensor.shape() != params_[i].tensor.shape()) {
        throw ShapeError("copy_state_from: shape mismatch at " + params_[i].name);
      }
      params_[i].tensor.value() = op[i].tensor.value().template cast<Scalar>();
    }
    for (std::size_t i = 0; i < buffers_.size(); ++i) {
      *buffers_[i].values = ob[i].values->template cast<Scalar>();
    }
  }

  template <typename Other>
  Model<Other> cast() const {
    Model<Other> out(cfg_);
    out.copy_state_from(*this);
    return out;
  }

 private:
  static Tensor<Scalar> he_uniform(Shape shape, Index fan_in, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Vector<Scalar> v(numel(shape));
    for (Index i = 0; i < v.size(); ++i) v[i] = static_cast<Scalar>(u(rng));
    return Tensor<Scalar>::from(std::move(shape), std::move(v), true);
  }

  static ConvUnit make_conv(int in_ch, int out_ch, std::mt19937_64& rng) {
    ConvUnit u;
    u.weight = he_uniform({out_ch, in_ch, 3, 3}, in_ch * 9, rng);
    u.bias = Tensor<Scalar>::zeros({out_ch}, true);
    u.gamma = Tensor<Scalar>::constant({out_ch}, Scalar(1), true);
    u.beta = Tensor<Scalar>::zeros({out_ch}, true);
    u.stats = BatchNormStats<Scalar>(out_ch);
    return u;
  }

  static Tensor<Scalar> conv_unit(const Tensor<Scalar>& x, ConvUnit& u, Mode mode, Scalar slope) {
    return leaky_relu(batchnorm(conv2d(x, u.weight, u.bias, 1, 1), u.gamma, u.beta, u.stats, mode),
                      slope);
  }

  void register_all() {
    params_.clear();
    buffers_.clear();
    auto unit = [&](const std::string& prefix, ConvUnit& u) {
      params_.push_back({prefix + ".weight", u.weight});
      params_.push_back({prefix + ".bias", u.bias});
      params_.push_back({prefix + ".bn.gamma", u.gamma});
      params_.push_back({prefix + ".bn.beta", u.beta});
      buffers_.push_back({prefix + ".bn.running_mean", &u.stats.running_mean});
      buffers_.push_back({prefix + ".bn.running_var", &u.stats.running_var});
    };
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const std::string prefix = "blocks." + std::to_string(i);
      unit(prefix + ".conv", blocks_[i].conv);
      unit(prefix + ".residual", blocks_[i].residual);
    }
    params_.push_back({"dense.weight", dense_weight_});
    params_.push_back({"dense.bias", dense_bias_});
    params_.push_back({"dense.bn.gamma", dense_gamma_});
    params_.push_back({"dense.bn.beta", dense_beta_});
    buffers_.push_back({"dense.bn.running_mean", &dense_stats_.running_mean});
    buffers_.push_back({"dense.bn.running_var", &dense_stats_.running_var});
    params_.push_back({"head.weight", head_weight_});
    params_.push_back({"head.bias", head_bias_});
  }

  ModelConfig cfg_;
  std::vector<CombinedBlock> blocks_;
  Tensor<Scalar> dense_weight_, dense_bias_, dense_gamma_, dense_beta_;
  BatchNormStats<Scalar> dense_stats_;
  Tensor<Scalar> head_weight_, head_bias_;
  std::vector<NamedTensor<Scalar>> params_;
  std::vector<NamedBuffer<Scalar>> buffers_;
};

}  // namespace earcount::nn
