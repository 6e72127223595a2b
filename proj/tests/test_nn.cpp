#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "earcount/nn/checkpoint.hpp"
#include "earcount/nn/saliency.hpp"
#include "gradient_suite.hpp"

using namespace earcount::nn;
namespace fs = std::filesystem;
using T = Tensor<double>;
using Vec = Vector<double>;

TEST_CASE("gradient suite") {
  for (const auto& c : gradsuite::op_cases()) {
    const int seeds = c.name == "toy_model" ? 3 : 20;
    for (int s = 0; s < seeds; ++s) {
      const auto r = c.run(static_cast<std::uint64_t>(s) + 1);
      INFO(c.name << " seed " << s << " rel " << r.relative_error);
      CHECK(r.relative_error < c.tolerance);
      CHECK(r.checked > 0);
    }
  }
}

TEST_CASE("conv2d examples") {
  const T x = T::from({1, 1, 3, 4}, Vec::LinSpaced(12, 0, 11));
  const T one = T::constant({1, 1, 1, 1}, 1.0);
  CHECK(conv2d(x, one, T::zeros({1})).value() == x.value());

  const T ones_img = T::constant({1, 1, 4, 5}, 1.0);
  const T k = T::constant({1, 1, 3, 3}, 1.0);
  const T y = conv2d(ones_img, k, T{}, 1, 1);
  REQUIRE(y.shape() == Shape{1, 1, 4, 5});
  CHECK(y.value()[0] == 4.0);
  CHECK(y.value()[1 * 5 + 2] == 9.0);
  CHECK(y.value()[3 * 5 + 4] == 4.0);
  CHECK(y.value()[2] == 6.0);
  CHECK_THROWS_AS(conv2d(ones_img, T::constant({1, 2, 3, 3}, 1.0), T{}), ShapeError);
  CHECK_THROWS_AS(conv2d(T::constant({1, 1, 4, 4}, 1.0), k, T{}, 2, 0), ShapeError);
}

TEST_CASE("batchnorm examples") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(3.0, 2.0);
  Vec v(64);
  for (auto& e : v) e = n(rng);
  const T x = T::from({16, 1, 2, 2}, v);
  const T g = T::constant({1}, 1.0), b = T::zeros({1});
  BatchNormStats<double> st(1);
  const T y = batchnorm(x, g, b, st, Mode::Train);
  const double mean = y.value().mean();
  const double var = (y.value().array() - mean).square().mean();
  CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(st.running_mean[0] == doctest::Approx(0.1 * v.mean()));

  BatchNormStats<double> fresh(1);
  const T e = batchnorm(x, g, b, fresh, Mode::Eval);
  for (Index i = 0; i < x.size(); ++i) CHECK(e.value()[i] == doctest::Approx(x.value()[i]).epsilon(1e-5));

  // single sample, zero variance: finite thanks to eps
  BatchNormStats<double> one(1);
  const T z = batchnorm(T::constant({1, 1}, 5.0), g, b, one, Mode::Train);
  CHECK(std::isfinite(z.value()[0]));
}

TEST_CASE("elementwise examples") {
  CHECK(leaky_relu(T::constant({1}, -1.0), 0.3).item() == doctest::Approx(-0.3));
  CHECK(leaky_relu(T::constant({1}, 2.0), 0.3).item() == 2.0);
  const T m = T::from({1, 1, 2, 2}, (Vec(4) << 1, 2, 3, 4).finished());
  CHECK(maxpool2d(m, 2).item() == 4.0);
  std::mt19937_64 rng(1);
  const T x = gradsuite::random_tensor({3, 4}, rng);
  CHECK(dropout(x, 0.0, Mode::Train, rng).value() == x.value());
  CHECK(dropout(x, 0.5, Mode::Eval, rng).value() == x.value());
  const T d = dropout(T::constant({1000}, 1.0), 0.2, Mode::Train, rng);
  for (Index i = 0; i < d.size(); ++i) CHECK((d.value()[i] == 0.0 || d.value()[i] == doctest::Approx(1.25)));
  CHECK_THROWS_AS(residual_add(T::zeros({1, 2}), T::zeros({2, 1})), ShapeError);
  CHECK(global_avg_pool(T::from({1, 1, 2, 2}, (Vec(4) << 1, 2, 3, 6).finished())).item() == 3.0);
}

TEST_CASE("model shapes") {
  ModelConfig full;
  full.input_shape = {3, 512, 128};
  CHECK(full.feature_hw() == std::pair{8, 2});

  auto cfg = gradsuite::toy_config(5);
  Model<float> m(cfg);
  std::mt19937_64 rng(2);
  Vector<float> v = Vector<float>::Random(2 * 3 * 32 * 8);
  const auto x = Tensor<float>::from({2, 3, 32, 8}, v);
  const auto y = m.forward(x, Mode::Eval);
  CHECK(y.shape() == Shape{2, 4});
  CHECK(y.value().allFinite());
  CHECK(m.features(x, Mode::Eval).shape() == Shape{2, 16, 8, 2});
  CHECK(m.forward(x, Mode::Eval).value() == y.value());

  cfg.num_outputs = 1;
  CHECK(Model<float>(cfg).forward(x, Mode::Eval).shape() == Shape{2, 1});

  // residual blocks keep their input shape
  const auto h = maxpool2d(x, 2);
  CHECK(residual_add(h, h).shape() == h.shape());

  ModelConfig bad = gradsuite::toy_config(0);
  bad.input_shape = {3, 30, 8};
  CHECK_THROWS(Model<float>{bad});
  bad = gradsuite::toy_config(0);
  bad.block_channels = {16, 8};
  CHECK_THROWS(Model<float>{bad});
  bad = gradsuite::toy_config(0);
  bad.num_outputs = 2;
  CHECK_THROWS(Model<float>{bad});
  CHECK_THROWS_AS(m.forward(Tensor<float>::zeros({1, 3, 16, 8}), Mode::Eval), ShapeError);
}

TEST_CASE("adam") {
  T p = T::constant({1}, 0.5, true);
  std::vector<T> params{p};
  AdamState<double> st;
  p.grad()[0] = 1.0;
  adam_step(params, st, 0.1);
  CHECK(p.value()[0] == doctest::Approx(0.4).epsilon(1e-6));

  T q = T::constant({3}, 2.0, true);
  std::vector<T> qs{q};
  AdamState<double> st2;
  q.grad().setZero();
  adam_step(qs, st2, 0.1);
  CHECK(q.value() == Vec::Constant(3, 2.0));

  auto run = [] {
    T w = T::constant({2}, 1.0, true);
    std::vector<T> ws{w};
    AdamState<double> s;
    for (int i = 0; i < 20; ++i) {
      w.zero_grad();
      weighted_sum(w, Vec(Vec::Constant(2, 1.0))).backward();
      adam_step(ws, s, 0.05);
    }
    return Vec(w.value());
  };
  CHECK(run() == run());
}

TEST_CASE("reduce on plateau") {
  ReduceOnPlateau up(1.0, 0.1, 3);
  for (int i = 0; i < 10; ++i) CHECK(up.step(0.1 * i) == 1.0);

  ReduceOnPlateau flat(1.0, 0.1, 3);
  CHECK(flat.step(0.5) == 1.0);  // first epoch sets the best
  CHECK(flat.step(0.5) == 1.0);
  CHECK(flat.step(0.5) == 1.0);
  CHECK(flat.step(0.5) == doctest::Approx(0.1));  // epoch 4
  CHECK(flat.step(0.5) == doctest::Approx(0.1));
  CHECK(flat.step(0.5) == doctest::Approx(0.1));
  CHECK(flat.step(0.5) == doctest::Approx(0.01));

  ReduceOnPlateau small(1.0, 0.1, 2, 1e-4);
  small.step(0.5);
  small.step(0.50005);
  CHECK(small.step(0.50009) == doctest::Approx(0.1));
}

TEST_CASE("saliency") {
  SUBCASE("linear model gives |w|") {
    std::mt19937_64 rng(4);
    const Vec w = gradsuite::random_weights(12, rng);
    const T x = gradsuite::random_tensor({1, 1, 3, 4}, rng);
    const auto map = saliency_map<double>([&](const T& in) { return reshape(weighted_sum(in, w), {1, 1}); }, x, 0);
    for (Index i = 0; i < 3; ++i)
      for (Index j = 0; j < 4; ++j) CHECK(map(i, j) == doctest::Approx(std::abs(w[i * 4 + j])));
  }
  SUBCASE("flip equivariance") {
    std::mt19937_64 rng(8);
    // kernel symmetric under left-right mirroring
    T k = gradsuite::random_tensor({2, 1, 3, 3}, rng);
    for (Index o = 0; o < 2; ++o)
      for (Index r = 0; r < 3; ++r) k.value()[(o * 3 + r) * 3 + 2] = k.value()[(o * 3 + r) * 3];
    auto f = [&](const T& in) {
      return reshape(weighted_sum(global_avg_pool(leaky_relu(conv2d(in, k, T{}, 1, 1), 0.3)),
                                  Vec(Vec::Ones(2))),
                     {1, 1});
    };
    T x = gradsuite::random_tensor({1, 1, 5, 6}, rng);
    T mirrored = x.detach();
    for (Index r = 0; r < 5; ++r)
      for (Index c = 0; c < 6; ++c) mirrored.value()[r * 6 + c] = x.value()[r * 6 + 5 - c];
    const auto a = saliency_map<double>(f, x, 0);
    const auto b = saliency_map<double>(f, mirrored, 0);
    for (Index r = 0; r < 5; ++r)
      for (Index c = 0; c < 6; ++c) CHECK(b(r, c) == doctest::Approx(a(r, 5 - c)));
  }
  SUBCASE("zero head") {
    auto cfg = gradsuite::toy_config(1);
    cfg.zero_head = true;
    Model<double> m(cfg);
    std::mt19937_64 rng(1);
    const T x = gradsuite::random_tensor({1, 3, 32, 8}, rng);
    const auto map = saliency_map<double>([&](const T& in) { return m.forward(in, Mode::Eval); }, x, 2);
    CHECK(map.isZero());
    CHECK(normalize_saliency(map).isZero());
  }
  const RowMatrix<double> raw = (RowMatrix<double>(1, 3) << 1, 2, 3).finished();
  const auto n = normalize_saliency(raw);
  CHECK(n(0, 0) == 0.0);
  CHECK(n(0, 2) == doctest::Approx(255.0));
}

TEST_CASE("checkpoint io") {
  const auto dir = fs::temp_directory_path() / "earcount_ckpt";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto cfg = gradsuite::toy_config(11);
  Model<float> m(cfg);
  // non-trivial running statistics
  std::mt19937_64 rng(2);
  Vector<float> v = Vector<float>::Random(4 * 3 * 32 * 8);
  m.forward(Tensor<float>::from({4, 3, 32, 8}, v), Mode::Train, &rng);
  const auto h0 = probe_hash(m);
  const auto ckpt = make_checkpoint(m, 0.5, 7);
  save_checkpoint(ckpt, dir / "a.ckpt");
  const auto back = load_checkpoint(dir / "a.ckpt");
  CHECK(back.arrays == ckpt.arrays);
  CHECK(back.config == cfg);
  CHECK(back.epoch == 7);
  CHECK(back.best_val_r2 == 0.5);
  Model<float> m2 = model_from(back);
  CHECK(probe_hash(m2) == h0);

  // optimizer state survives
  AdamState<float> opt;
  opt.step = 3;
  opt.m.push_back(Vector<float>::Constant(2, 1.5f));
  opt.v.push_back(Vector<float>::Constant(2, 0.5f));
  auto with_opt = ckpt;
  with_opt.optimizer = opt;
  save_checkpoint(with_opt, dir / "b.ckpt");
  const auto ob = load_checkpoint(dir / "b.ckpt");
  REQUIRE(ob.optimizer);
  CHECK(ob.optimizer->step == 3);
  CHECK(ob.optimizer->v[0] == opt.v[0]);

  auto other = cfg;
  other.block_channels = {8, 24};
  Model<float> wrong(other);
  CHECK_THROWS_AS(load_into(wrong, back), CheckpointError);

  {
    std::fstream f(dir / "a.ckpt", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XX", 2);
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "a.ckpt"), CheckpointError);
  {
    std::fstream f(dir / "b.ckpt", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(6);
    f.write("02", 2);
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "b.ckpt"), CheckpointError);

  save_checkpoint(ckpt, dir / "c.ckpt");
  fs::resize_file(dir / "c.ckpt", fs::file_size(dir / "c.ckpt") - 10);
  CHECK_THROWS_AS(load_checkpoint(dir / "c.ckpt"), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), CheckpointError);
  fs::remove_all(dir);
}
