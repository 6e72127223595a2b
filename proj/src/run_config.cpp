#include "earcount/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "earcount/hash.hpp"
#include "json.hpp"

namespace earcount {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

// 1-based line of the byte offset.
int line_of(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

class Parser {
 public:
  Parser(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& msg) const {
    std::string dotted;
    for (const auto& p : path) dotted += (dotted.empty() ? "" : ".") + p;
    throw ConfigError(source_ + ":" + std::to_string(locate(path)) + ": " +
                      (dotted.empty() ? "" : dotted + ": ") + msg);
  }

  // Finds the line of the last key in `path` by walking the keys in order.
  int locate(const std::vector<std::string>& path) const {
    std::size_t pos = 0;
    for (const auto& key : path) {
      if (!key.empty() && key.front() == '[') continue;
      const std::string quoted = "\"" + key + "\"";
      std::size_t found = pos;
      while (true) {
        found = text_.find(quoted, found);
        if (found == std::string::npos) return line_of(text_, pos);
        std::size_t after = found + quoted.size();
        while (after < text_.size() && std::isspace(static_cast<unsigned char>(text_[after]))) ++after;
        if (after < text_.size() && text_[after] == ':') break;
        found += quoted.size();
      }
      pos = found;
    }
    return line_of(text_, pos);
  }

  void only_keys(const json& obj, const std::vector<std::string>& path,
                 std::initializer_list<const char*> allowed) const {
    if (!obj.is_object()) fail(path, "expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : obj.items()) {
      if (!ok.contains(k)) {
        auto p = path;
        p.push_back(k);
        fail(p, "unknown key");
      }
    }
  }

  template <typename T>
  void read(const json& obj, const std::vector<std::string>& path, const char* key, T& out) const {
    if (!obj.contains(key)) return;
    auto p = path;
    p.push_back(key);
    try {
      out = obj.at(key).get<T>();
    } catch (const json::exception&) {
      fail(p, "wrong type");
    }
  }

  template <typename T>
  void read_opt(const json& obj, const std::vector<std::string>& path, const char* key,
                std::optional<T>& out) const {
    if (!obj.contains(key) || obj.at(key).is_null()) return;
    T v{};
    read(obj, path, key, v);
    out = v;
  }

 private:
  const std::string& text_;
  std::string source_;
};

using Path = std::vector<std::string>;

Path operator+(Path p, const std::string& k) {
  p.push_back(k);
  return p;
}

MorphOp parse_op(const Parser& ps, const Path& path, const std::string& s) {
  if (s == "erode") return MorphOp::Erode;
  if (s == "dilate") return MorphOp::Dilate;
  if (s == "open") return MorphOp::Open;
  if (s == "close") return MorphOp::Close;
  ps.fail(path, "unknown morphology op '" + s + "'");
}

void parse_pipeline(const Parser& ps, const json& j, PipelineConfig& c) {
  const Path path{"pipeline"};
  ps.only_keys(j, path,
               {"hue_lo", "hue_hi", "sat_min", "val_min", "clahe_cols", "clahe_rows", "clahe_clip",
                "median_radius", "thresh_block", "thresh_c", "morph_element", "morph_sequence",
                "connectivity", "min_component_area", "max_component_area",
                "max_component_fraction", "dot_radius", "dot_color"});
  ps.read(j, path, "hue_lo", c.hue_lo);
  ps.read(j, path, "hue_hi", c.hue_hi);
  ps.read(j, path, "sat_min", c.sat_min);
  ps.read(j, path, "val_min", c.val_min);
  ps.read(j, path, "clahe_cols", c.clahe_cols);
  ps.read(j, path, "clahe_rows", c.clahe_rows);
  ps.read(j, path, "clahe_clip", c.clahe_clip);
  ps.read(j, path, "median_radius", c.median_radius);
  ps.read(j, path, "thresh_block", c.thresh_block);
  ps.read(j, path, "thresh_c", c.thresh_c);
  if (j.contains("morph_element")) {
    const auto& e = j.at("morph_element");
    const Path ep = path + "morph_element";
    ps.only_keys(e, ep, {"shape", "width", "height"});
    std::string shape = "rect";
    int w = 3, h = 3;
    ps.read(e, ep, "shape", shape);
    ps.read(e, ep, "width", w);
    ps.read(e, ep, "height", h);
    if (w < 1 || h < 1 || w % 2 == 0 || h % 2 == 0) ps.fail(ep, "element sides must be odd and positive");
    if (shape == "rect") {
      c.morph_element = StructuringElement::rect(w, h);
    } else if (shape == "cross" && w == h) {
      c.morph_element = StructuringElement::cross(w);
    } else if (shape == "ellipse" && w == h) {
      c.morph_element = StructuringElement::ellipse(w);
    } else {
      ps.fail(ep, "shape must be rect, or cross/ellipse with width == height");
    }
  }
  if (j.contains("morph_sequence")) {
    const Path sp = path + "morph_sequence";
    const auto& seq = j.at("morph_sequence");
    if (!seq.is_array()) ps.fail(sp, "expected an array");
    c.morph_sequence.clear();
    for (const auto& step : seq) {
      ps.only_keys(step, sp, {"op", "iterations"});
      std::string op = "open";
      int it = 1;
      ps.read(step, sp, "op", op);
      ps.read(step, sp, "iterations", it);
      c.morph_sequence.push_back({parse_op(ps, sp, op), it});
    }
  }
  if (j.contains("connectivity")) {
    int conn = 8;
    ps.read(j, path, "connectivity", conn);
    if (conn != 4 && conn != 8) ps.fail(path + "connectivity", "must be 4 or 8");
    c.connectivity = conn == 4 ? Connectivity::Four : Connectivity::Eight;
  }
  ps.read(j, path, "min_component_area", c.min_component_area);
  ps.read_opt(j, path, "max_component_area", c.max_component_area);
  ps.read(j, path, "max_component_fraction", c.max_component_fraction);
  ps.read(j, path, "dot_radius", c.dot_radius);
  if (j.contains("dot_color")) {
    std::array<int, 3> rgb{};
    ps.read(j, path, "dot_color", rgb);
    for (int v : rgb) {
      if (v < 0 || v > 255) ps.fail(path + "dot_color", "components must lie in 0..255");
    }
    c.dot_color = {static_cast<std::uint8_t>(rgb[0]), static_cast<std::uint8_t>(rgb[1]),
                   static_cast<std::uint8_t>(rgb[2])};
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    ps.fail(path, e.what());
  }
}

void parse_model(const Parser& ps, const json& j, nn::ModelConfig& m) {
  const Path path{"model"};
  ps.only_keys(j, path, {"input_shape", "block_channels", "dense_width", "leaky_slope",
                         "dropout_p", "num_outputs", "zero_head"});
  ps.read(j, path, "input_shape", m.input_shape);
  ps.read(j, path, "block_channels", m.block_channels);
  ps.read(j, path, "dense_width", m.dense_width);
  ps.read(j, path, "leaky_slope", m.leaky_slope);
  ps.read(j, path, "dropout_p", m.dropout_p);
  ps.read(j, path, "num_outputs", m.num_outputs);
  ps.read(j, path, "zero_head", m.zero_head);
  if (m.input_shape[0] != 3) ps.fail(path + "input_shape", "images have 3 channels");
  if (m.num_outputs != 1 && m.num_outputs != 4) ps.fail(path + "num_outputs", "must be 1 or 4");
  if (m.dense_width < 1) ps.fail(path + "dense_width", "must be positive");
  if (!(m.dropout_p >= 0.0 && m.dropout_p < 1.0)) ps.fail(path + "dropout_p", "must lie in [0, 1)");
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    ps.fail(path, e.what());
  }
}

PipelineVariant parse_variant_at(const Parser& ps, const Path& path, const std::string& name,
                                 int n_dots) {
  try {
    return parse_variant(name, n_dots, 0);
  } catch (const std::invalid_argument& e) {
    ps.fail(path, e.what());
  }
}

void parse_train(const Parser& ps, const json& j, TrainConfig& t) {
  const Path path{"train"};
  ps.only_keys(j, path, {"epochs", "batch_size", "lr", "plateau_factor", "plateau_patience",
                         "plateau_min_delta", "repetitions", "augment_flips", "init_head_bias",
                         "variant", "control_dots"});
  ps.read(j, path, "epochs", t.epochs);
  ps.read(j, path, "batch_size", t.batch_size);
  ps.read(j, path, "lr", t.lr);
  ps.read(j, path, "plateau_factor", t.plateau_factor);
  ps.read(j, path, "plateau_patience", t.plateau_patience);
  ps.read(j, path, "plateau_min_delta", t.plateau_min_delta);
  ps.read(j, path, "repetitions", t.repetitions);
  ps.read(j, path, "augment_flips", t.augment_flips);
  ps.read(j, path, "init_head_bias", t.init_head_bias);
  std::string variant = "hints";
  int dots = 0;
  ps.read(j, path, "variant", variant);
  ps.read(j, path, "control_dots", dots);
  t.variant = parse_variant_at(ps, path + "variant", variant, dots);
}

EarSpec parse_spec(const Parser& ps, const json& j, const Path& path) {
  ps.only_keys(j, path,
               {"hybrid_id", "num_rows", "kernels_per_row_mean", "kernel_radius", "ear_length",
                "ear_width", "jitter", "hue_center", "noise_sigma", "ear_count_sigma",
                "row_count_sigma", "seed"});
  EarSpec s;
  ps.read(j, path, "hybrid_id", s.hybrid_id);
  ps.read(j, path, "num_rows", s.num_rows);
  ps.read(j, path, "kernels_per_row_mean", s.kernels_per_row_mean);
  ps.read(j, path, "kernel_radius", s.kernel_radius);
  ps.read(j, path, "ear_length", s.ear_length);
  ps.read(j, path, "ear_width", s.ear_width);
  ps.read(j, path, "jitter", s.jitter);
  ps.read(j, path, "hue_center", s.hue_center);
  ps.read(j, path, "noise_sigma", s.noise_sigma);
  ps.read(j, path, "ear_count_sigma", s.ear_count_sigma);
  ps.read(j, path, "row_count_sigma", s.row_count_sigma);
  ps.read(j, path, "seed", s.seed);
  try {
    s.validate();
  } catch (const GenerationError& e) {
    ps.fail(path, e.what());
  }
  return s;
}

void parse_dataset(const Parser& ps, const json& j, DatasetConfig& d) {
  const Path path{"dataset"};
  ps.only_keys(j, path, {"hybrids", "ears_per_hybrid", "split", "specs", "noise_sigma", "jitter",
                         "ear_count_sigma", "row_count_sigma"});
  ps.read(j, path, "hybrids", d.hybrids);
  ps.read(j, path, "ears_per_hybrid", d.ears_per_hybrid);
  if (d.hybrids < 1) ps.fail(path + "hybrids", "must be >= 1");
  if (d.ears_per_hybrid < 3) ps.fail(path + "ears_per_hybrid", "must be >= 3 (one ear per split)");
  if (j.contains("split")) {
    const Path sp = path + "split";
    const auto& s = j.at("split");
    ps.only_keys(s, sp, {"train", "val", "test"});
    ps.read(s, sp, "train", d.split.train);
    ps.read(s, sp, "val", d.split.val);
    ps.read(s, sp, "test", d.split.test);
    if (d.split.train <= 0 || d.split.val <= 0 || d.split.test <= 0 ||
        std::abs(d.split.train + d.split.val + d.split.test - 1.0) > 1e-9) {
      ps.fail(sp, "fractions must be positive and sum to 1");
    }
  }
  if (j.contains("specs")) {
    const auto& specs = j.at("specs");
    if (!specs.is_array()) ps.fail(path + "specs", "expected an array");
    for (std::size_t i = 0; i < specs.size(); ++i) {
      d.specs.push_back(parse_spec(ps, specs[i], path + "specs" + ("[" + std::to_string(i) + "]")));
    }
  }
  ps.read_opt(j, path, "noise_sigma", d.noise_sigma);
  ps.read_opt(j, path, "jitter", d.jitter);
  ps.read_opt(j, path, "ear_count_sigma", d.ear_count_sigma);
  ps.read_opt(j, path, "row_count_sigma", d.row_count_sigma);
}

void parse_comparison(const Parser& ps, const json& j, RunConfig& rc) {
  const Path path{"comparison"};
  ps.only_keys(j, path, {"groups", "kruskal_groups", "cnn_group"});
  if (j.contains("groups")) {
    const Path gp = path + "groups";
    const auto& groups = j.at("groups");
    if (!groups.is_array() || groups.empty()) ps.fail(gp, "expected a non-empty array");
    rc.groups.clear();
    std::set<std::string> seen;
    for (const auto& g : groups) {
      ps.only_keys(g, gp, {"name", "variant", "outputs", "control_dots"});
      GroupSpec spec;
      std::string variant = "hints";
      int dots = 0;
      ps.read(g, gp, "variant", variant);
      spec.name = variant;
      ps.read(g, gp, "name", spec.name);
      ps.read(g, gp, "outputs", spec.num_outputs);
      ps.read(g, gp, "control_dots", dots);
      if (spec.num_outputs != 1 && spec.num_outputs != 4) ps.fail(gp, "outputs must be 1 or 4");
      if (!seen.insert(spec.name).second) ps.fail(gp, "duplicate group name '" + spec.name + "'");
      spec.variant = parse_variant_at(ps, gp, variant, dots);
      rc.groups.push_back(spec);
    }
  }
  ps.read(j, path, "kruskal_groups", rc.kruskal_groups);
  ps.read(j, path, "cnn_group", rc.cnn_group);
  for (const auto& n : rc.kruskal_groups) {
    if (std::none_of(rc.groups.begin(), rc.groups.end(), [&](const auto& g) { return g.name == n; })) {
      ps.fail(path + "kruskal_groups", "unknown group '" + n + "'");
    }
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

ojson variant_json(const PipelineVariant& v) {
  ojson j;
  j["name"] = variant_name(v);
  if (const auto* c = std::get_if<ControlVariant>(&v)) {
    j["n_dots"] = c->n_dots;
    j["seed"] = c->seed;
  }
  return j;
}

}  // namespace

std::vector<EarSpec> DatasetConfig::resolved_specs(std::uint64_t seed) const {
  std::vector<EarSpec> out = specs.empty() ? random_specs(hybrids, seed) : specs;
  for (auto& s : out) {
    if (noise_sigma) s.noise_sigma = *noise_sigma;
    if (jitter) s.jitter = *jitter;
    if (ear_count_sigma) s.ear_count_sigma = *ear_count_sigma;
    if (row_count_sigma) s.row_count_sigma = *row_count_sigma;
  }
  return out;
}

std::uint64_t RunConfig::dataset_seed() const { return derive_seed(seed, 1); }
std::uint64_t RunConfig::control_seed() const { return derive_seed(seed, 2); }

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  train.seed = s;
  train.model.seed = derive_seed(s, 3);
  auto reseed = [&](PipelineVariant& v) {
    if (auto* c = std::get_if<ControlVariant>(&v)) c->seed = control_seed();
  };
  reseed(train.variant);
  for (auto& g : groups) reseed(g.variant);
}

ComparisonConfig RunConfig::comparison() const {
  ComparisonConfig c;
  c.base = train;
  c.pipeline = pipeline;
  c.groups = groups;
  c.kruskal_groups = kruskal_groups;
  c.cnn_group = cnn_group;
  c.jobs = jobs;
  return c;
}

std::string run_config_to_json(const RunConfig& cfg) {
  ojson j;
  j["seed"] = cfg.seed;
  const auto& d = cfg.dataset;
  ojson specs = ojson::array();
  for (const auto& s : d.resolved_specs(cfg.dataset_seed())) {
    specs.push_back({{"hybrid_id", s.hybrid_id}, {"num_rows", s.num_rows},
                     {"kernels_per_row_mean", s.kernels_per_row_mean},
                     {"kernel_radius", s.kernel_radius}, {"ear_length", s.ear_length},
                     {"ear_width", s.ear_width}, {"jitter", s.jitter},
                     {"hue_center", s.hue_center}, {"noise_sigma", s.noise_sigma},
                     {"ear_count_sigma", s.ear_count_sigma},
                     {"row_count_sigma", s.row_count_sigma}, {"seed", s.seed}});
  }
  j["dataset"] = {{"ears_per_hybrid", d.ears_per_hybrid},
                  {"split", {d.split.train, d.split.val, d.split.test}},
                  {"specs", specs}};
  j["pipeline_hash"] = format_hash(cfg.pipeline.hash());
  j["model"] = ojson::parse(nn::model_config_to_json(cfg.train.model));
  const auto& t = cfg.train;
  j["train"] = {{"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"lr", t.lr},
                {"plateau_factor", t.plateau_factor},
                {"plateau_patience", t.plateau_patience},
                {"plateau_min_delta", t.plateau_min_delta},
                {"repetitions", t.repetitions},
                {"augment_flips", t.augment_flips},
                {"init_head_bias", t.init_head_bias},
                {"seed", t.seed},
                {"variant", variant_json(t.variant)}};
  ojson groups = ojson::array();
  for (const auto& g : cfg.groups) {
    groups.push_back({{"name", g.name}, {"variant", variant_json(g.variant)}, {"outputs", g.num_outputs}});
  }
  j["comparison"] = {{"groups", groups}, {"kruskal_groups", cfg.kruskal_groups},
                     {"cnn_group", cfg.cnn_group}};
  return j.dump();
}

std::uint64_t RunConfig::hash() const {
  return Fnv1a().add(std::string_view(run_config_to_json(*this))).value();
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir,
                           const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ":" + std::to_string(line_of(text, e.byte == 0 ? 0 : e.byte - 1)) +
                      ": malformed JSON: " + e.what());
  }
  const Parser ps(text, source);
  ps.only_keys(root, {}, {"seed", "output_dir", "manifest", "cache_dir", "jobs", "dataset",
                          "pipeline", "model", "train", "comparison"});
  if (!root.contains("seed")) ps.fail({}, "'seed' is required (no clock-based seeding)");

  RunConfig rc;
  std::uint64_t seed = 0;
  ps.read(root, {}, "seed", seed);
  std::string out, manifest, cache;
  ps.read(root, {}, "output_dir", out);
  ps.read(root, {}, "manifest", manifest);
  ps.read(root, {}, "cache_dir", cache);
  ps.read(root, {}, "jobs", rc.jobs);
  if (rc.jobs < 1) ps.fail({"jobs"}, "must be >= 1");
  rc.output_dir = resolve(base_dir, out);
  rc.manifest = resolve(base_dir, manifest);
  rc.cache_dir = resolve(base_dir, cache);

  if (root.contains("dataset")) parse_dataset(ps, root.at("dataset"), rc.dataset);
  if (root.contains("pipeline")) parse_pipeline(ps, root.at("pipeline"), rc.pipeline);
  if (root.contains("model")) parse_model(ps, root.at("model"), rc.train.model);
  if (root.contains("train")) parse_train(ps, root.at("train"), rc.train);
  if (root.contains("comparison")) parse_comparison(ps, root.at("comparison"), rc);
  try {
    rc.train.validate();
  } catch (const std::invalid_argument& e) {
    ps.fail({"train"}, e.what());
  }
  rc.set_seed(seed);
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path(), path.string());
}

}  // namespace earcount
