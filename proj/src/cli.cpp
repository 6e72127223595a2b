#include "earcount/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "earcount/experiment.hpp"
#include "earcount/png_io.hpp"
#include "earcount/run_config.hpp"
#include "json.hpp"

namespace earcount {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::string out;
  std::string manifest;
  std::string checkpoint;
  std::string variant;
  std::string split = "test";
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  bool dump_stages = false;
  bool oracle_stub = false;
  int limit = 8;
  int output_index = 0;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

RunConfig load(const Options& o) {
  RunConfig rc = load_run_config(o.config);
  if (o.seed) rc.set_seed(*o.seed);
  if (o.jobs) {
    if (*o.jobs < 1) throw UsageError("--jobs must be >= 1");
    rc.jobs = *o.jobs;
  }
  return rc;
}

fs::path out_dir(const Options& o, const RunConfig& rc, const char* fallback) {
  fs::path p = !o.out.empty() ? fs::path(o.out) : rc.output_dir.empty() ? fs::path() : rc.output_dir / fallback;
  if (p.empty()) throw UsageError("no output directory: pass --out or set output_dir");
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw std::runtime_error("cannot create " + p.string() + ": " + ec.message());
  return p;
}

fs::path manifest_path(const Options& o, const RunConfig& rc) {
  fs::path p = !o.manifest.empty() ? fs::path(o.manifest) : rc.manifest;
  if (p.empty()) throw UsageError("no manifest: pass --manifest or set manifest in the config");
  return p;
}

std::string header(const RunConfig& rc) { return "# config_hash=" + format_hash(rc.hash()) + "\n"; }

void log_line(const std::string& s) { std::cerr << s << std::endl; }

std::unique_ptr<PreprocessCache> make_cache(const RunConfig& rc) {
  return std::make_unique<PreprocessCache>(rc.cache_dir);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// ---- synth ------------------------------------------------------------------------

int cmd_synth(const Options& o) {
  const RunConfig rc = load(o);
  const fs::path dir = out_dir(o, rc, "data");
  const auto specs = rc.dataset.resolved_specs(rc.dataset_seed());
  const Dataset ds = generate_dataset(specs, rc.dataset.ears_per_hybrid, rc.dataset.split,
                                      rc.dataset_seed(), rc.jobs);
  const Manifest m = write_dataset(ds, dir);
  {
    std::ofstream meta(dir / "dataset.json");
    nlohmann::ordered_json j;
    j["config_hash"] = format_hash(rc.hash());
    j["seed"] = rc.seed;
    j["hybrids"] = specs.size();
    j["ears_per_hybrid"] = rc.dataset.ears_per_hybrid;
    meta << j.dump(2) << '\n';
  }
  std::map<std::string, int> per_split;
  std::set<std::string> ears;
  for (const auto& r : m.records) {
    ++per_split[to_string(r.split)];
    ears.insert(r.ear_id);
  }
  std::cout << "ears " << ears.size() << ", images " << m.records.size() << " (train "
            << per_split["train"] << ", val " << per_split["val"] << ", test " << per_split["test"]
            << ")\nmanifest " << (dir / "manifest.csv").string() << "\n";
  return kExitOk;
}

// ---- preprocess ---------------------------------------------------------------------

int cmd_preprocess(const Options& o) {
  const RunConfig rc = load(o);
  const fs::path mpath = manifest_path(o, rc);
  const fs::path dir = out_dir(o, rc, "preprocessed");
  const Manifest m = read_manifest(mpath, true);
  PipelineVariant variant = rc.train.variant;
  if (!o.variant.empty()) {
    try {
      variant = parse_variant(o.variant, 0, rc.control_seed());
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (const auto* c = std::get_if<ControlVariant>(&variant); c && c->n_dots == 0) {
    variant = ControlVariant{control_dot_count(m), c->seed};
  }

  std::ofstream report(dir / "points.csv");
  report << header(rc) << "image,points\n";
  std::vector<std::string> failed;
  for (const auto& r : m.records) {
    const fs::path src = mpath.parent_path() / r.image_path;
    const std::string stem = fs::path(r.image_path).stem().string();
    const RgbImage img = read_png_rgb(src);
    try {
      HintStages stages;
      const HintResult res =
          apply_variant(img, rc.pipeline, per_image_variant(variant, image_hash(img)),
                        o.dump_stages ? &stages : nullptr);
      write_png(dir / (stem + ".png"), res.output_image);
      report << stem << ',' << res.hint_points.size() << '\n';
      if (o.dump_stages) {
        // non-hint variants skip the detector; run it for the dump
        if (stages.enhanced.px.size() == 0) {
          detect_kernel_centers(res.masked_image, res.ear_mask, rc.pipeline, &stages);
        }
        write_png(dir / (stem + ".stageb.png"), res.masked_image);
        write_png(dir / (stem + ".stagec.png"), stages.enhanced);
        write_png(dir / (stem + ".staged.png"), stages.thresholded);
        write_png(dir / (stem + ".stagee.png"), stages.morphed);
        write_png(dir / (stem + ".stagef.png"), res.output_image);
      }
    } catch (const NoEarFound&) {
      failed.push_back(r.image_path);
    }
  }
  std::ofstream no_ear(dir / "no_ear.txt");
  no_ear << header(rc);
  for (const auto& f : failed) no_ear << f << '\n';
  std::cout << "variant " << variant_name(variant) << ": " << m.records.size() - failed.size()
            << " images written, " << failed.size() << " without a detectable ear\n";
  return failed.empty() ? kExitOk : kExitRuntime;
}

// ---- train / eval -----------------------------------------------------------------

int cmd_train(const Options& o) {
  const RunConfig rc = load(o);
  const fs::path mpath = manifest_path(o, rc);
  const fs::path dir = out_dir(o, rc, "train");
  const Dataset ds = load_dataset(mpath);
  auto cache = make_cache(rc);
  std::ofstream hist(dir / "history.csv");
  hist << header(rc) << "epoch,train_loss,lr,val_r2_total,val_mae_total\n";
  const TrainResult r = train(rc.train, rc.pipeline, ds, cache.get(), [&](const EpochRecord& e) {
    hist << e.epoch << ',' << e.train_loss << ',' << e.lr << ',' << e.val.total_r2() << ','
         << e.val.total_mae() << '\n';
    log_line("epoch " + std::to_string(e.epoch) + " loss " + fmt(e.train_loss) + " val R2 " +
             fmt(e.val.total_r2()));
  });
  nn::save_checkpoint(r.checkpoint, dir / "model.ckpt");
  auto model = nn::model_from(r.checkpoint);
  std::cout << "best epoch " << r.best_epoch << ", val R2 " << fmt(r.checkpoint.best_val_r2)
            << ", skipped " << r.skipped << " images\ncheckpoint " << (dir / "model.ckpt").string()
            << " probe " << format_hash(nn::probe_hash(model)) << "\n";
  return kExitOk;
}

nlohmann::ordered_json report_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["split"] = to_string(r.split);
  j["n"] = r.n;
  for (std::size_t o = 0; o < r.mae.size(); ++o) {
    j["outputs"][kLabelNames[o]] = {{"mae", r.mae[o]}, {"r2", r.r2[o]}};
  }
  return j;
}

int cmd_eval(const Options& o) {
  const RunConfig rc = load(o);
  const fs::path mpath = manifest_path(o, rc);
  const fs::path dir = out_dir(o, rc, "eval");
  Split split;
  try {
    split = parse_split(o.split);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  MetricsReport report;
  if (o.oracle_stub) {
    const Manifest m = read_manifest(mpath, false);
    std::vector<PreparedSample> samples;
    for (const auto& r : m.records) {
      if (r.split == split) samples.push_back({RgbImage(), r.labels.as_array(), r.ear_id, r.side, r.split});
    }
    std::vector<const PreparedSample*> ptrs;
    for (const auto& s : samples) ptrs.push_back(&s);
    const int outs = rc.train.model.num_outputs;
    report = evaluate(oracle_predictor(outs), ptrs, outs, split, rc.seed);
  } else {
    if (o.checkpoint.empty()) throw UsageError("eval needs --checkpoint or --oracle-stub");
    const nn::Checkpoint ckpt = nn::load_checkpoint(o.checkpoint);
    const Dataset ds = load_dataset(mpath);
    auto cache = make_cache(rc);
    const auto variant = resolve_variant(rc.train.variant, ds);
    const auto prepared = prepare_samples(ds, rc.pipeline, variant, ckpt.config.input_shape[1],
                                          ckpt.config.input_shape[2], cache.get(), rc.jobs);
    report = evaluate(ckpt, prepared.samples, split, rc.seed);
  }
  auto j = report_json(report);
  j["config_hash"] = format_hash(rc.hash());
  std::ofstream(dir / "metrics.json") << j.dump(2) << '\n';
  for (std::size_t i = 0; i < report.mae.size(); ++i) {
    std::cout << kLabelNames[i] << ": MAE " << fmt(report.mae[i]) << ", R2 " << fmt(report.r2[i]) << "\n";
  }
  return kExitOk;
}

// ---- compare ------------------------------------------------------------------------

int cmd_compare(const Options& o) {
  const RunConfig rc = load(o);
  const fs::path mpath = manifest_path(o, rc);
  const fs::path dir = out_dir(o, rc, "compare");
  const Dataset ds = load_dataset(mpath);
  auto cache = make_cache(rc);
  ComparisonConfig cc = rc.comparison();
  cc.checkpoint_dir = dir / "checkpoints";
  const auto result = run_comparison(cc, ds, cache.get(), log_line);
  write_comparison(result, dir, rc.hash());
  std::cout << "group,metric,mean,std,min,median,max\n";
  for (const auto& row : result.summary) {
    std::cout << row.group << ',' << row.metric << ',' << fmt(row.stats.mean) << ','
              << fmt(row.stats.std) << ',' << fmt(row.stats.min) << ',' << fmt(row.stats.median)
              << ',' << fmt(row.stats.max) << "\n";
  }
  for (const auto& t : result.tests) {
    std::cout << t.result.test << " [" << t.metric << "]";
    for (const auto& n : t.result.names) std::cout << ' ' << n;
    std::cout << ": statistic " << fmt(t.result.statistic) << ", p " << t.result.p_value << "\n";
  }
  return kExitOk;
}

// ---- saliency -----------------------------------------------------------------------

RgbImage upscale(const RgbImage& img, int f) {
  RgbImage out(img.width() * f, img.height() * f);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) out.set(x, y, img.at(x / f, y / f));
  return out;
}

void blit(RgbImage& dst, const RgbImage& src, int x0) {
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x) dst.set(x0 + x, y, src.at(x, y));
}

int cmd_saliency(const Options& o) {
  const RunConfig rc = load(o);
  const fs::path mpath = manifest_path(o, rc);
  const fs::path dir = out_dir(o, rc, "saliency");
  Split split;
  try {
    split = parse_split(o.split);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  std::optional<nn::Model<float>> model;
  if (!o.checkpoint.empty()) {
    model.emplace(nn::model_from(nn::load_checkpoint(o.checkpoint)));
  } else {
    nn::ModelConfig mc = rc.train.model;
    mc.zero_head = true;
    model.emplace(mc);
  }
  const auto& shape = model->config().input_shape;
  if (o.output_index < 0 || o.output_index >= model->config().num_outputs) {
    throw UsageError("--output-index out of range");
  }
  const Dataset ds = load_dataset(mpath);
  const std::vector<PipelineVariant> variants = {
      BaselineVariant{}, ControlVariant{control_dot_count(ds), rc.control_seed()}, HintsVariant{}};
  const int factor = std::max(1, kImageWidth / shape[1]);
  int written = 0;
  for (const auto* im : ds.in_split(split)) {
    if (written >= o.limit) break;
    const std::string stem = im->ear_id + "_" + to_string(im->side);
    std::vector<RgbImage> panels;
    try {
      for (const auto& v : variants) {
        const RgbImage input = preprocess_image(im->image, rc.pipeline, v, shape[1], shape[2]);
        const GrayImage sal = saliency_to_gray(image_saliency(*model, input, o.output_index));
        panels.push_back(upscale(input, factor));
        panels.push_back(upscale(gray_to_rgb(sal), factor));
      }
    } catch (const NoEarFound&) {
      log_line(stem + ": no ear found, skipped");
      continue;
    }
    const int pw = panels[0].width();
    RgbImage sheet(pw * static_cast<int>(panels.size()), panels[0].height());
    for (std::size_t i = 0; i < panels.size(); ++i) blit(sheet, panels[i], pw * static_cast<int>(i));
    write_png(dir / (stem + ".saliency.png"), sheet);
    ++written;
  }
  std::cout << written << " saliency sheets (baseline, control, hints; input then map)\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"earcount: maize kernel counting experiments"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "override the config seed");
    sub->add_option("--jobs", o.jobs, "worker threads");
  };
  auto with_manifest = [&](CLI::App* sub) {
    sub->add_option("--manifest", o.manifest, "dataset manifest.csv");
  };

  auto* synth = app.add_subcommand("synth", "render a synthetic dataset");
  common(synth);
  auto* pre = app.add_subcommand("preprocess", "apply a preprocessing variant");
  common(pre);
  with_manifest(pre);
  pre->add_option("--variant", o.variant, "baseline, control or hints");
  pre->add_flag("--dump-stages", o.dump_stages, "write intermediate pipeline stages");
  auto* tr = app.add_subcommand("train", "train one model");
  common(tr);
  with_manifest(tr);
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  common(ev);
  with_manifest(ev);
  ev->add_option("--checkpoint", o.checkpoint, "model checkpoint");
  ev->add_option("--split", o.split, "train, val or test");
  ev->add_flag("--oracle-stub", o.oracle_stub, "score a stub that returns the true labels");
  auto* cmp = app.add_subcommand("compare", "repeated training across groups");
  common(cmp);
  with_manifest(cmp);
  auto* sal = app.add_subcommand("saliency", "saliency maps for the three variants");
  common(sal);
  with_manifest(sal);
  sal->add_option("--checkpoint", o.checkpoint, "model checkpoint (default: untrained, zero head)");
  sal->add_option("--split", o.split, "train, val or test");
  sal->add_option("--limit", o.limit, "maximum number of images");
  sal->add_option("--output-index", o.output_index, "model output to explain");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(o);
    if (pre->parsed()) return cmd_preprocess(o);
    if (tr->parsed()) return cmd_train(o);
    if (ev->parsed()) return cmd_eval(o);
    if (cmp->parsed()) return cmd_compare(o);
    if (sal->parsed()) return cmd_saliency(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace earcount
