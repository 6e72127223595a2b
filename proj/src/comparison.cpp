#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>
#include <thread>

#include "earcount/experiment.hpp"
#include "earcount/hash.hpp"
#include "json.hpp"

namespace earcount {

std::vector<GroupSpec> default_groups() {
  return {{"univariate", BaselineVariant{}, 1},
          {"baseline", BaselineVariant{}, 4},
          {"control", ControlVariant{0, 0}, 4},
          {"hints", HintsVariant{}, 4}};
}

std::pair<double, double> manual_metrics(const Dataset& ds, Split split) {
  std::vector<double> est, truth;
  for (const auto* im : ds.in_split(split)) {
    est.push_back(manual_estimate(im->labels.kernels_row_a, im->labels.kernels_row_b,
                                  im->labels.num_rows));
    truth.push_back(im->labels.total_kernels);
  }
  return {mae(est, truth), r_squared(est, truth)};
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct Task {
  std::size_t group;
  int repetition;
};

}  // namespace

ComparisonResult run_comparison(const ComparisonConfig& cfg, const Dataset& ds,
                                PreprocessCache* cache, const LogFn& log) {
  cfg.base.validate();
  if (cfg.groups.empty()) throw std::invalid_argument("comparison: no groups");
  if (cfg.base.repetitions < 2) throw std::invalid_argument("comparison: repetitions must be >= 2");
  std::set<std::string> names;
  for (const auto& g : cfg.groups) {
    if (!names.insert(g.name).second) throw std::invalid_argument("comparison: duplicate group " + g.name);
  }
  auto say = [&](const std::string& msg) {
    if (log) log(msg);
  };

  ComparisonResult result;
  result.control_dots = control_dot_count(ds);
  const int in_w = cfg.base.model.input_shape[1], in_h = cfg.base.model.input_shape[2];

  // one preprocessing pass per distinct variant
  std::vector<PipelineVariant> variants;
  std::map<std::uint64_t, PreparedSet> prepared;
  std::vector<std::uint64_t> group_key;
  for (const auto& g : cfg.groups) {
    const auto v = resolve_variant(g.variant, ds);
    variants.push_back(v);
    const auto key = variant_hash(v);
    group_key.push_back(key);
    if (!prepared.contains(key)) {
      say("preprocessing " + variant_name(v));
      prepared[key] = prepare_samples(ds, cfg.pipeline, v, in_w, in_h, cache, cfg.jobs);
      result.skipped += prepared[key].skipped;
    }
  }

  std::vector<Task> tasks;
  for (std::size_t g = 0; g < cfg.groups.size(); ++g)
    for (int i = 0; i < cfg.base.repetitions; ++i) tasks.push_back({g, i});
  result.runs.resize(tasks.size());
  if (!cfg.checkpoint_dir.empty()) std::filesystem::create_directories(cfg.checkpoint_dir);

  std::mutex log_mu;
  auto run_one = [&](std::size_t t) {
    const Task& task = tasks[t];
    const GroupSpec& g = cfg.groups[task.group];
    TrainConfig tc = cfg.base;
    tc.seed = cfg.base.seed + static_cast<std::uint64_t>(task.repetition);
    tc.variant = variants[task.group];
    tc.model.num_outputs = g.num_outputs;
    // groups that differ in variant or head get independent initialisations;
    // identical specs share one
    tc.model.seed = derive_seed(tc.seed, group_key[task.group],
                                static_cast<std::uint64_t>(g.num_outputs));
    const auto& samples = prepared.at(group_key[task.group]).samples;
    TrainResult tr = train_prepared(tc, samples);

    RunRecord& rec = result.runs[t];
    rec.group = g.name;
    rec.repetition = task.repetition;
    rec.seed = tc.seed;
    rec.best_val_r2 = tr.checkpoint.best_val_r2;
    rec.best_epoch = tr.best_epoch;
    auto model = nn::model_from(tr.checkpoint);
    rec.test = evaluate(model_predictor(model), in_split(samples, Split::Test), g.num_outputs,
                        Split::Test, tc.seed);
    rec.probe = nn::probe_hash(model);
    if (!cfg.checkpoint_dir.empty()) {
      nn::save_checkpoint(tr.checkpoint, cfg.checkpoint_dir /
                                             (g.name + "_r" + std::to_string(task.repetition) + ".ckpt"));
    }
    rec.checkpoint = std::move(tr.checkpoint);
    std::lock_guard lock(log_mu);
    say(g.name + " rep " + std::to_string(task.repetition) + ": test R2 " +
        fmt(rec.test.total_r2()) + ", MAE " + fmt(rec.test.total_mae()));
  };

  const int jobs = std::clamp(cfg.jobs, 1, static_cast<int>(tasks.size()));
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t; (t = next.fetch_add(1)) < tasks.size();) {
      try {
        run_one(t);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  // reduction, in group order
  std::map<std::string, std::vector<double>> r2, err;
  for (const auto& run : result.runs) {
    r2[run.group].push_back(run.test.total_r2());
    err[run.group].push_back(run.test.total_mae());
  }
  for (const auto& g : cfg.groups) {
    result.summary.push_back({g.name, "r2", summarize(r2[g.name])});
    result.summary.push_back({g.name, "mae", summarize(err[g.name])});
  }

  if (cfg.groups.size() >= 2) {
    std::vector<std::string> kw = cfg.kruskal_groups;
    if (kw.empty()) {
      for (const auto& g : cfg.groups) kw.push_back(g.name);
    }
    for (const auto& n : kw) {
      if (!names.contains(n)) throw std::invalid_argument("comparison: unknown group " + n);
    }
    for (const auto* metric : {"r2", "mae"}) {
      auto& values = std::string(metric) == "r2" ? r2 : err;
      if (kw.size() >= 2) {
        std::vector<std::vector<double>> groups;
        for (const auto& n : kw) groups.push_back(values[n]);
        result.tests.push_back({metric, kruskal_wallis_h(groups, kw)});
      }
      for (std::size_t a = 0; a < cfg.groups.size(); ++a)
        for (std::size_t b = a + 1; b < cfg.groups.size(); ++b) {
          const auto& na = cfg.groups[a].name;
          const auto& nb = cfg.groups[b].name;
          result.tests.push_back({metric, mann_whitney_u(values[na], values[nb], na, nb)});
        }
    }
  }

  if (names.contains(cfg.cnn_group) && !ds.in_split(Split::Test).empty()) {
    ManualComparison m;
    m.n = static_cast<long>(ds.in_split(Split::Test).size());
    std::tie(m.manual_mae, m.manual_r2) = manual_metrics(ds, Split::Test);
    m.cnn_group = cfg.cnn_group;
    m.cnn_mae = median(err[cfg.cnn_group]);
    m.cnn_r2 = median(r2[cfg.cnn_group]);
    result.manual = m;
  }
  return result;
}

void write_comparison(const ComparisonResult& result, const std::filesystem::path& dir,
                      std::uint64_t config_hash) {
  std::filesystem::create_directories(dir);
  const std::string header = "# config_hash=" + format_hash(config_hash) + "\n";
  auto open = [&](const std::string& name) {
    std::ofstream f(dir / name);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    return f;
  };

  {
    auto f = open("summary.csv");
    f << header << "group,metric,mean,std,min,median,max\n";
    for (const auto& row : result.summary) {
      f << row.group << ',' << row.metric << ',' << fmt(row.stats.mean) << ',' << fmt(row.stats.std)
        << ',' << fmt(row.stats.min) << ',' << fmt(row.stats.median) << ',' << fmt(row.stats.max)
        << '\n';
    }
  }
  {
    auto f = open("runs.csv");
    f << header << "group,repetition,seed,n_test,best_epoch,best_val_r2,probe_hash";
    for (const char* label : kLabelNames) f << ",r2_" << label << ",mae_" << label;
    f << '\n';
    for (const auto& run : result.runs) {
      f << run.group << ',' << run.repetition << ',' << run.seed << ',' << run.test.n << ','
        << run.best_epoch << ',' << fmt(run.best_val_r2) << ',' << format_hash(run.probe);
      for (std::size_t o = 0; o < kLabelNames.size(); ++o) {
        if (o < run.test.r2.size()) {
          f << ',' << fmt(run.test.r2[o]) << ',' << fmt(run.test.mae[o]);
        } else {
          f << ",,";
        }
      }
      f << '\n';
    }
  }
  {
    nlohmann::ordered_json j;
    j["config_hash"] = format_hash(config_hash);
    j["control_dots"] = result.control_dots;
    j["skipped_images"] = result.skipped;
    j["tests"] = nlohmann::ordered_json::array();
    for (const auto& t : result.tests) {
      nlohmann::ordered_json e;
      e["metric"] = t.metric;
      e["test"] = t.result.test;
      e["groups"] = t.result.names;
      e["statistic"] = t.result.statistic;
      e["p_value"] = t.result.p_value;
      e["exact"] = t.result.exact;
      e["medians"] = t.result.medians;
      j["tests"].push_back(e);
    }
    auto f = open("stats.json");
    f << j.dump(2) << '\n';
  }
  if (result.manual) {
    const auto& m = *result.manual;
    auto f = open("manual_vs_cnn.csv");
    f << header << "method,n,r2,mae\n";
    f << "manual," << m.n << ',' << fmt(m.manual_r2) << ',' << fmt(m.manual_mae) << '\n';
    f << "cnn_" << m.cnn_group << ',' << m.n << ',' << fmt(m.cnn_r2) << ',' << fmt(m.cnn_mae) << '\n';
  }
}

}  // namespace earcount
