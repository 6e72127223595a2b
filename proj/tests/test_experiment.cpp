#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "earcount/experiment.hpp"

using namespace earcount;
namespace fs = std::filesystem;

namespace {

nn::ModelConfig tiny_model() {
  nn::ModelConfig m;
  m.input_shape = {3, 16, 8};
  m.block_channels = {4, 8};
  m.dense_width = 8;
  return m;
}

/// Random images whose brightness tracks the target so a model can learn.
std::vector<PreparedSample> toy_samples(int per_split, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> total(100, 400);
  std::uniform_int_distribution<int> noise(0, 40);
  std::vector<PreparedSample> out;
  for (Split s : {Split::Train, Split::Val, Split::Test})
    for (int i = 0; i < per_split; ++i) {
      PreparedSample p;
      const int t = total(rng);
      p.targets = {static_cast<double>(t), 12.0 + 2 * (i % 4), t / 16.0, t / 16.0 + 1};
      p.input = RgbImage(16, 8);
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 16; ++x) {
          const auto v = static_cast<std::uint8_t>(std::min(255, t / 2 + noise(rng)));
          p.input.set(x, y, {v, v, static_cast<std::uint8_t>(255 - v)});
        }
      p.ear_id = "E" + std::to_string(out.size());
      p.split = s;
      out.push_back(std::move(p));
    }
  return out;
}

TrainConfig toy_train(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 4;
  c.lr = 1e-2;
  c.seed = 9;
  c.model = tiny_model();
  return c;
}

Manifest manifest_with_train(const std::vector<int>& totals) {
  Manifest m;
  int k = 0;
  for (int t : totals) {
    ManifestRecord r;
    r.image_path = "i" + std::to_string(k) + ".png";
    r.ear_id = "E" + std::to_string(k++);
    r.hybrid_id = "H";
    r.labels = {t, 4, t / 4, t / 4};
    m.records.push_back(r);
  }
  ManifestRecord v = m.records[0];
  v.ear_id = "EV";
  v.split = Split::Val;
  v.labels.total_kernels = 9999;
  m.records.push_back(v);
  return m;
}

}  // namespace

TEST_CASE("metrics examples") {
  const std::vector<double> t{2, 2}, p{1, 3};
  CHECK(mae(p, t) == 1.0);
  CHECK(mae(t, t) == 0.0);
  const std::vector<double> truth{1, 2, 3}, pred{1, 2, 4}, mean{2, 2, 2};
  CHECK(r_squared(pred, truth) == doctest::Approx(0.5));
  CHECK(r_squared(truth, truth) == 1.0);
  CHECK(r_squared(mean, truth) == doctest::Approx(0.0));
  const std::vector<double> pred_s{11, 12, 14}, truth_s{11, 12, 13};
  CHECK(r_squared(pred_s, truth_s) == doctest::Approx(r_squared(pred, truth)));
  CHECK_THROWS(r_squared(mean, mean));
  CHECK_THROWS(mae(std::vector<double>{}, std::vector<double>{}));
  CHECK_THROWS(mae(p, truth));

  CHECK(manual_estimate(30, 32, 16) == 496.0);
  CHECK(manual_estimate(0, 0, 12) == 0.0);
  CHECK(manual_estimate(29, 30, 14) == 413.0);
}

TEST_CASE("control dot count") {
  CHECK(control_dot_count(manifest_with_train({300, 200, 240})) == 240);
  CHECK(control_dot_count(manifest_with_train({20, 10})) == 10);
  Manifest only_val = manifest_with_train({5});
  only_val.records.erase(only_val.records.begin());
  CHECK_THROWS(control_dot_count(only_val));
}

TEST_CASE("tensor layout follows image x along rows") {
  RgbImage img(4, 2);
  img.set(3, 1, {255, 0, 51});
  const RgbImage* p = &img;
  const auto t = to_tensor<double>(std::span<const RgbImage* const>(&p, 1));
  CHECK(t.shape() == nn::Shape{1, 3, 4, 2});
  CHECK(t.value()[(0 * 4 + 3) * 2 + 1] == 1.0);
  CHECK(t.value()[(2 * 4 + 3) * 2 + 1] == doctest::Approx(0.2));
  CHECK(t.value().sum() == doctest::Approx(1.2));
}

TEST_CASE("stub predictors") {
  const auto samples = toy_samples(6, 1);
  const auto test = in_split(samples, Split::Test);
  const auto perfect = evaluate(oracle_predictor(4), test, 4, Split::Test);
  for (int o = 0; o < 4; ++o) {
    CHECK(perfect.mae[o] == 0.0);
    CHECK(perfect.r2[o] == 1.0);
  }
  CHECK(perfect.n == 6);
  double mean = 0;
  for (const auto* s : test) mean += s->targets[0] / 6.0;
  const auto flat = evaluate(constant_predictor({mean}), test, 1, Split::Test);
  CHECK(flat.total_r2() == doctest::Approx(0.0).epsilon(1e-12));
  // constant truth gives an undefined R^2
  auto flat_rows = samples;
  for (auto& s : flat_rows) s.targets[1] = 16;
  CHECK(std::isnan(evaluate(oracle_predictor(4), in_split(flat_rows, Split::Test), 4, Split::Test).r2[1]));
  CHECK_THROWS(evaluate(oracle_predictor(4), {}, 4, Split::Test));
}

TEST_CASE("frozen model: plateau decays the rate every patience epochs") {
  auto cfg = toy_train(16);
  cfg.freeze_parameters = true;
  cfg.plateau_patience = 5;
  cfg.lr = 1.0;
  const auto r = train_prepared(cfg, toy_samples(8, 2));
  REQUIRE(r.history.size() == 16);
  for (const auto& e : r.history) {
    const double expect = e.epoch <= 6 ? 1.0 : (e.epoch <= 11 ? 0.1 : 0.01);
    CHECK(e.lr == doctest::Approx(expect));
    CHECK(e.val.total_r2() == r.history[0].val.total_r2());
  }
  CHECK(r.best_epoch == 1);
}

TEST_CASE("training: best checkpoint and determinism") {
  const auto samples = toy_samples(12, 3);
  const auto cfg = toy_train(6);
  const auto a = train_prepared(cfg, samples);
  double best = -INFINITY;
  for (const auto& e : a.history) best = std::max(best, e.val.total_r2());
  CHECK(a.checkpoint.best_val_r2 == best);
  CHECK(a.history[a.best_epoch - 1].val.total_r2() == best);
  CHECK(a.checkpoint.epoch == a.best_epoch);
  CHECK(a.history.back().train_loss < a.history.front().train_loss);

  // re-evaluating the checkpoint reproduces its recorded validation score
  const auto val = evaluate(a.checkpoint, samples, Split::Val);
  CHECK(val.total_r2() == doctest::Approx(best).epsilon(1e-9));
  const auto t1 = evaluate(a.checkpoint, samples, Split::Test);
  const auto t2 = evaluate(a.checkpoint, samples, Split::Test);
  CHECK(t1.mae == t2.mae);
  CHECK(t1.total_r2() == t2.total_r2());

  const auto b = train_prepared(cfg, samples);
  CHECK(b.checkpoint.arrays == a.checkpoint.arrays);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
  }
  auto other = cfg;
  other.seed = 10;
  const auto c = train_prepared(other, samples);
  CHECK(c.history[0].train_loss != a.history[0].train_loss);

  auto bad = cfg;
  bad.plateau_factor = 1.0;
  CHECK_THROWS(train_prepared(bad, samples));
  bad = cfg;
  bad.epochs = 0;
  CHECK_THROWS(train_prepared(bad, samples));
  auto no_val = samples;
  std::erase_if(no_val, [](const PreparedSample& s) { return s.split == Split::Val; });
  CHECK_THROWS(train_prepared(cfg, no_val));
}

TEST_CASE("preprocess cache") {
  const auto dir = fs::temp_directory_path() / "earcount_cache_test";
  fs::remove_all(dir);
  RgbImage img(3, 2);
  img.set(1, 1, {1, 2, 3});
  {
    PreprocessCache c(dir);
    CHECK_FALSE(c.get(42));
    c.put(42, img);
    CHECK(*c.get(42) == img);
    CHECK(c.hits() == 1);
    CHECK(c.misses() == 1);
  }
  PreprocessCache again(dir);
  REQUIRE(again.get(42));
  CHECK(*again.get(42) == img);
  const PipelineConfig cfg;
  const auto k1 = preprocess_key(1, BaselineVariant{}, cfg, 64, 16);
  CHECK(k1 != preprocess_key(1, HintsVariant{}, cfg, 64, 16));
  CHECK(k1 != preprocess_key(1, BaselineVariant{}, cfg, 32, 16));
  CHECK(k1 != preprocess_key(2, BaselineVariant{}, cfg, 64, 16));
  fs::remove_all(dir);
}

TEST_CASE("comparison on a small dataset") {
  const Dataset ds = generate_dataset(random_specs(2, 5), 3, {}, 5);
  ComparisonConfig cc;
  cc.base = toy_train(2);
  cc.base.model.input_shape = {3, 64, 16};
  cc.base.repetitions = 2;

  SUBCASE("single group") {
    cc.groups = {{"hints", HintsVariant{}, 4}};
    const auto r = run_comparison(cc, ds);
    CHECK(r.runs.size() == 2);
    CHECK(r.tests.empty());
    CHECK(r.summary.size() == 2);
    REQUIRE(r.manual);
    CHECK(r.manual->n == 4);  // one test ear per hybrid, two faces each
    CHECK(r.runs[0].seed == 9);
    CHECK(r.runs[1].seed == 10);
  }
  SUBCASE("identical groups sit at the null centre") {
    cc.groups = {{"a", BaselineVariant{}, 4}, {"b", BaselineVariant{}, 4}};
    cc.jobs = 2;
    cc.cnn_group = "a";
    const auto r = run_comparison(cc, ds);
    REQUIRE(r.runs.size() == 4);
    CHECK(r.runs[0].test.mae == r.runs[2].test.mae);
    bool found = false;
    for (const auto& t : r.tests) {
      if (t.result.test != "mann-whitney") continue;
      found = true;
      CHECK(t.result.statistic == 2.0);
      CHECK(t.result.p_value == doctest::Approx(1.0));
    }
    CHECK(found);
    const auto dir = fs::temp_directory_path() / "earcount_cmp_test";
    fs::remove_all(dir);
    write_comparison(r, dir, 0xabcULL);
    for (const char* f : {"summary.csv", "runs.csv", "stats.json", "manual_vs_cnn.csv"}) {
      CHECK(fs::exists(dir / f));
    }
    std::ifstream in(dir / "summary.csv");
    std::string first, header;
    std::getline(in, first);
    std::getline(in, header);
    CHECK(first == "# config_hash=" + format_hash(0xabcULL));
    CHECK(header == "group,metric,mean,std,min,median,max");
    fs::remove_all(dir);
  }
  SUBCASE("one repetition is rejected") {
    cc.base.repetitions = 1;
    CHECK_THROWS(run_comparison(cc, ds));
  }
}

TEST_CASE("manual rule on generated ears") {
  std::vector<EarSpec> specs = random_specs(3, 8);
  for (auto& s : specs) s.row_count_sigma = 0;
  const Dataset ds = generate_dataset(specs, 3, {}, 8);
  const auto [m, r2] = manual_metrics(ds, Split::Test);
  CHECK(m == 0.0);
  CHECK(r2 == 1.0);
}
