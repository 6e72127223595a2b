#include "earcount/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "earcount/hash.hpp"
#include "earcount/png_io.hpp"

namespace earcount {

namespace {

constexpr double kSuperellipsePower = 4.0;
constexpr Rgb kBackground{10, 10, 14};

struct Rgbf {
  double r = 0, g = 0, b = 0;
};

// Fully saturated-to-`sat` colour of value 1 for `hue` degrees.
Rgbf hue_color(double hue, double sat) {
  const double h = std::fmod(std::fmod(hue, 360.0) + 360.0, 360.0) / 60.0;
  const double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
  Rgbf c;
  switch (static_cast<int>(h)) {
    case 0: c = {1, x, 0}; break;
    case 1: c = {x, 1, 0}; break;
    case 2: c = {0, 1, x}; break;
    case 3: c = {0, x, 1}; break;
    case 4: c = {x, 0, 1}; break;
    default: c = {1, 0, x}; break;
  }
  // desaturate towards white at constant value
  c.r = 1.0 - sat * (1.0 - c.r);
  c.g = 1.0 - sat * (1.0 - c.g);
  c.b = 1.0 - sat * (1.0 - c.b);
  return c;
}

struct Canvas {
  int w, h;
  std::vector<Rgbf> px;
  BinaryMask ear;

  Canvas(int width, int height)
      : w(width), h(height),
        px(static_cast<std::size_t>(width) * height,
           Rgbf{kBackground.r / 255.0, kBackground.g / 255.0, kBackground.b / 255.0}),
        ear(width, height, false) {}

  void paint(int x, int y, Rgbf c, double value) {
    px[static_cast<std::size_t>(y) * w + x] = {c.r * value, c.g * value, c.b * value};
    ear.px(y, x) = true;
  }
};

struct Kernel {
  double cx, cy;  // continuous canvas coordinates
  double rx, ry;
};

}  // namespace

void EarSpec::validate() const {
  auto check = [](bool ok, const std::string& what) {
    if (!ok) throw GenerationError(what);
  };
  check(num_rows >= 2 && num_rows % 2 == 0, "num_rows must be even and >= 2");
  check(kernels_per_row_mean >= 1.0, "kernels_per_row_mean must be >= 1");
  check(jitter >= 0.0 && jitter < 0.5, "jitter must lie in [0, 0.5)");
  check(kernel_radius > 0.0, "kernel_radius must be positive");
  check(noise_sigma >= 0.0 && ear_count_sigma >= 0.0 && row_count_sigma >= 0.0,
        "spreads must be non-negative");
  check(hybrid_id.find(',') == std::string::npos, "hybrid_id must not contain commas");
  check(ear_length > 0.0 && ear_length <= kCanvasWidth - 64.0,
        "ear_length does not fit the canvas");
  check(ear_width > 0.0 && ear_width <= kCanvasHeight - 24.0,
        "ear_width does not fit the canvas");
}

std::string to_string(Side s) { return s == Side::Front ? "front" : "back"; }

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Side parse_side(const std::string& s) {
  if (s == "front") return Side::Front;
  if (s == "back") return Side::Back;
  throw ManifestError("unknown side '" + s + "'");
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ManifestError("unknown split '" + s + "'");
}

std::pair<int, int> counted_rows(int num_rows) {
  const int visible = num_rows / 2;
  const int a = std::max(0, visible / 2 - 1);
  return {a, a + 1};
}

std::pair<EarSample, EarSample> generate_ear(const EarSpec& spec, std::uint64_t ear_seed) {
  spec.validate();
  std::mt19937_64 rng(derive_seed(spec.seed, ear_seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto centered = [&] { return unit(rng) - 0.5; };

  const int n_ear = std::max(
      1, static_cast<int>(std::lround(spec.kernels_per_row_mean + spec.ear_count_sigma * normal(rng))));
  std::vector<int> row_counts(spec.num_rows);
  for (auto& n : row_counts) {
    const double jittered = n_ear + (spec.row_count_sigma > 0 ? spec.row_count_sigma * normal(rng) : 0.0);
    n = std::max(1, static_cast<int>(std::lround(jittered)));
  }

  EarLabels labels;
  labels.num_rows = spec.num_rows;
  for (int n : row_counts) labels.total_kernels += n;
  const auto [row_a, row_b] = counted_rows(spec.num_rows);
  labels.kernels_row_a = row_counts[row_a];
  labels.kernels_row_b = row_counts[row_b];

  const double cx = kCanvasWidth / 2.0 + 40.0 * centered();
  const double cy = kCanvasHeight / 2.0 + 8.0 * centered();
  const double half_len = spec.ear_length / 2.0;
  const double half_wid = spec.ear_width / 2.0;
  const int visible_rows = spec.num_rows / 2;
  const double pitch = spec.ear_width / visible_rows;

  const Rgbf groove = hue_color(spec.hue_center, 0.85);

  auto render_face = [&](int face) {
    Canvas canvas(kCanvasWidth, kCanvasHeight);
    // body
    for (int y = 0; y < canvas.h; ++y) {
      const double dy = (y + 0.5 - cy) / half_wid;
      if (std::abs(dy) >= 1.0) continue;
      const double extent =
          half_len * std::pow(1.0 - std::pow(std::abs(dy), kSuperellipsePower), 1.0 / kSuperellipsePower);
      const double shade = 0.8 + 0.2 * std::sqrt(1.0 - dy * dy);
      for (int x = 0; x < canvas.w; ++x) {
        if (std::abs(x + 0.5 - cx) < extent) canvas.paint(x, y, groove, 0.32 * shade);
      }
    }
    // kernels
    std::vector<Kernel> kernels;
    for (int i = 0; i < visible_rows; ++i) {
      const int row = face * visible_rows + i;
      const int count = row_counts[row];
      const double row_y = cy - half_wid + (i + 0.5) * pitch;
      const double dy = (row_y - cy) / half_wid;
      const double extent =
          half_len * std::pow(1.0 - std::pow(std::abs(dy), kSuperellipsePower), 1.0 / kSuperellipsePower) -
          0.15 * pitch;
      const double spacing = 2.0 * extent / count;
      const double rx = std::min(spec.kernel_radius, 0.44 * spacing);
      const double ry = std::min(spec.kernel_radius, 0.42 * pitch);
      for (int j = 0; j < count; ++j) {
        Kernel k{cx - extent + (j + 0.5) * spacing + spec.jitter * spacing * centered(),
                 row_y + spec.jitter * pitch * centered(), rx, ry};
        kernels.push_back(k);
      }
    }
    for (const auto& k : kernels) {
      const Rgbf color = hue_color(spec.hue_center + 6.0 * centered(), 0.8 + 0.1 * unit(rng));
      const double value = 0.86 + 0.14 * unit(rng);
      const double shade = 0.8 + 0.2 * std::sqrt(std::max(0.0, 1.0 - std::pow((k.cy - cy) / half_wid, 2)));
      const int x0 = std::max(0, static_cast<int>(std::floor(k.cx - k.rx)));
      const int x1 = std::min(canvas.w - 1, static_cast<int>(std::ceil(k.cx + k.rx)));
      const int y0 = std::max(0, static_cast<int>(std::floor(k.cy - k.ry)));
      const int y1 = std::min(canvas.h - 1, static_cast<int>(std::ceil(k.cy + k.ry)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const double ux = (x + 0.5 - k.cx) / k.rx, uy = (y + 0.5 - k.cy) / k.ry;
          const double d2 = ux * ux + uy * uy;
          if (d2 >= 1.0) continue;
          canvas.paint(x, y, color, value * shade * (0.5 + 0.5 * std::sqrt(1.0 - d2)));
        }
      }
    }

    RgbImage img(kCanvasWidth, kCanvasHeight);
    for (int y = 0; y < canvas.h; ++y) {
      for (int x = 0; x < canvas.w; ++x) {
        const Rgbf& c = canvas.px[static_cast<std::size_t>(y) * canvas.w + x];
        auto q = [&](double v) {
          const double n = spec.noise_sigma > 0 ? spec.noise_sigma * normal(rng) : 0.0;
          return static_cast<std::uint8_t>(std::clamp(std::floor(v * 255.0 + n + 0.5), 0.0, 255.0));
        };
        img.set(x, y, {q(c.r), q(c.g), q(c.b)});
      }
    }

    const CropWindow win = ear_crop_window(canvas.ear, kImageWidth, kImageHeight);
    EarSample s;
    s.image = resample(img, win, kBackground);
    s.ear_mask = resample(canvas.ear, win);
    s.labels = labels;
    s.hybrid_id = spec.hybrid_id;
    s.side = face == 0 ? Side::Front : Side::Back;
    double radius_sum = 0.0;
    for (const auto& k : kernels) {
      s.true_centers.push_back(win.to_target({k.cx - 0.5, k.cy - 0.5}));
      radius_sum += std::min(k.rx / win.scale_x, k.ry / win.scale_y);
    }
    s.kernel_radius = kernels.empty() ? 0.0 : radius_sum / kernels.size();
    return s;
  };

  return {render_face(0), render_face(1)};
}

std::vector<EarSpec> random_specs(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::array<int, 4> rows{12, 14, 16, 18};
  std::vector<EarSpec> specs;
  for (int i = 0; i < count; ++i) {
    EarSpec s;
    char id[16];
    std::snprintf(id, sizeof id, "H%02d", i);
    s.hybrid_id = id;
    s.num_rows = rows[static_cast<std::size_t>(unit(rng) * rows.size()) % rows.size()];
    s.kernels_per_row_mean = 26.0 + 16.0 * unit(rng);
    s.ear_length = 820.0 + 120.0 * unit(rng);
    s.ear_width = 190.0 + 40.0 * unit(rng);
    s.hue_center = 38.0 + 14.0 * unit(rng);
    s.seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    specs.push_back(s);
  }
  return specs;
}

std::vector<const DatasetImage*> Dataset::in_split(Split s) const {
  std::vector<const DatasetImage*> out;
  for (const auto& img : images)
    if (img.split == s) out.push_back(&img);
  return out;
}

std::vector<Split> stratified_split(const std::vector<std::string>& hybrid_of_ear,
                                    SplitFractions fractions, std::uint64_t seed) {
  const std::size_t n = hybrid_of_ear.size();
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> by_hybrid;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, fresh] = by_hybrid.try_emplace(hybrid_of_ear[i]);
    if (fresh) order.push_back(hybrid_of_ear[i]);
    it->second.push_back(i);
  }

  std::vector<Split> out(n, Split::Train);
  std::array<long, 3> assigned{0, 0, 0};
  std::vector<std::size_t> pool;
  for (std::size_t h = 0; h < order.size(); ++h) {
    auto ears = by_hybrid[order[h]];
    if (ears.size() < 3) {
      throw GenerationError("hybrid " + order[h] + " has fewer than 3 ears");
    }
    std::mt19937_64 rng(derive_seed(seed, h));
    std::shuffle(ears.begin(), ears.end(), rng);
    for (int s = 0; s < 3; ++s) {
      out[ears[s]] = static_cast<Split>(s);
      ++assigned[s];
    }
    pool.insert(pool.end(), ears.begin() + 3, ears.end());
  }
  std::mt19937_64 rng(derive_seed(seed, 0xffffULL));
  std::shuffle(pool.begin(), pool.end(), rng);

  const double total = fractions.train + fractions.val + fractions.test;
  const long target_train = std::lround(n * fractions.train / total);
  const long target_val = std::lround(n * fractions.val / total);
  const std::array<long, 3> target{target_train, target_val,
                                   static_cast<long>(n) - target_train - target_val};
  for (std::size_t idx : pool) {
    int best = 0;
    for (int s = 1; s < 3; ++s) {
      if (target[s] - assigned[s] > target[best] - assigned[best]) best = s;
    }
    out[idx] = static_cast<Split>(best);
    ++assigned[best];
  }
  return out;
}

Dataset generate_dataset(const std::vector<EarSpec>& specs, int ears_per_spec,
                         SplitFractions fractions, std::uint64_t seed, int jobs) {
  if (ears_per_spec < 3) throw GenerationError("ears_per_spec must be >= 3");
  if (specs.empty()) throw GenerationError("no ear specs");
  const std::size_t n_ears = specs.size() * static_cast<std::size_t>(ears_per_spec);

  std::vector<std::string> hybrid_of_ear;
  for (const auto& s : specs)
    for (int e = 0; e < ears_per_spec; ++e) hybrid_of_ear.push_back(s.hybrid_id);
  const std::vector<Split> splits = stratified_split(hybrid_of_ear, fractions, seed);

  std::vector<std::pair<EarSample, EarSample>> ears(n_ears);
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < n_ears; i += stride) {
      const std::size_t h = i / ears_per_spec, e = i % ears_per_spec;
      ears[i] = generate_ear(specs[h], derive_seed(seed, h, e));
    }
  };
  const std::size_t n_threads = std::max(1, jobs);
  if (n_threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work, t, n_threads);
    for (auto& t : pool) t.join();
  }

  Dataset ds;
  for (std::size_t i = 0; i < n_ears; ++i) {
    char ear_id[64];
    std::snprintf(ear_id, sizeof ear_id, "%s_E%02zu", specs[i / ears_per_spec].hybrid_id.c_str(),
                  i % ears_per_spec);
    for (EarSample* s : {&ears[i].first, &ears[i].second}) {
      ds.images.push_back({std::move(s->image), s->labels, s->hybrid_id, ear_id, s->side,
                           splits[i]});
    }
  }
  return ds;
}

RgbImage apply_flips(const RgbImage& img, bool flip_h, bool flip_v) {
  RgbImage out = flip_h ? flip_horizontal(img) : img;
  return flip_v ? flip_vertical(out) : out;
}

RgbImage augment_flips(const RgbImage& img, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  const bool h = coin(rng);
  const bool v = coin(rng);
  return apply_flips(img, h, v);
}

void write_manifest(const Manifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ManifestError("cannot write " + path.string());
  out << kManifestHeader << '\n';
  for (const auto& r : m.records) {
    for (const std::string* field : {&r.image_path, &r.ear_id, &r.hybrid_id}) {
      if (field->find_first_of(",\n") != std::string::npos) {
        throw ManifestError("manifest field contains a separator: " + *field);
      }
    }
    out << r.image_path << ',' << r.ear_id << ',' << r.hybrid_id << ',' << to_string(r.side)
        << ',' << to_string(r.split) << ',' << r.labels.total_kernels << ','
        << r.labels.num_rows << ',' << r.labels.kernels_row_a << ',' << r.labels.kernels_row_b
        << '\n';
  }
  if (!out) throw ManifestError("failed writing " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path, bool check_images) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ManifestError("cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader) {
    throw ManifestError(path.string() + ":1: bad manifest header");
  }
  Manifest m;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string tok; std::getline(ss, tok, ',');) f.push_back(tok);
    if (f.size() != 9) throw ManifestError(where + "expected 9 fields");
    ManifestRecord r;
    r.image_path = f[0];
    r.ear_id = f[1];
    r.hybrid_id = f[2];
    try {
      r.side = parse_side(f[3]);
      r.split = parse_split(f[4]);
      std::array<int, 4> v{};
      for (int i = 0; i < 4; ++i) {
        std::size_t used = 0;
        v[i] = std::stoi(f[5 + i], &used);
        if (used != f[5 + i].size() || v[i] < 0) throw ManifestError("bad count");
      }
      r.labels = {v[0], v[1], v[2], v[3]};
    } catch (const ManifestError& e) {
      throw ManifestError(where + e.what());
    } catch (const std::exception&) {
      throw ManifestError(where + "malformed count");
    }
    if (check_images && !std::filesystem::exists(path.parent_path() / r.image_path)) {
      throw ManifestError(where + "missing image " + r.image_path);
    }
    m.records.push_back(std::move(r));
  }
  return m;
}

Manifest write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  Manifest m;
  for (const auto& img : ds.images) {
    const std::string rel = "images/" + img.ear_id + "_" + to_string(img.side) + ".png";
    write_png(dir / rel, img.image);
    m.records.push_back({rel, img.ear_id, img.hybrid_id, img.side, img.split, img.labels});
  }
  write_manifest(m, dir / "manifest.csv");
  return m;
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  const Manifest m = read_manifest(manifest_path, true);
  Dataset ds;
  for (const auto& r : m.records) {
    ds.images.push_back({read_png_rgb(manifest_path.parent_path() / r.image_path), r.labels,
                         r.hybrid_id, r.ear_id, r.side, r.split});
  }
  return ds;
}

void check_manifest_invariants(const Manifest& m) {
  std::map<std::string, Split> split_of_ear;
  std::map<std::string, std::set<Split>> splits_of_hybrid;
  for (const auto& r : m.records) {
    auto [it, fresh] = split_of_ear.try_emplace(r.ear_id, r.split);
    if (!fresh && it->second != r.split) {
      throw ManifestError("ear " + r.ear_id + " spans two splits");
    }
    splits_of_hybrid[r.hybrid_id].insert(r.split);
  }
  for (const auto& [hybrid, splits] : splits_of_hybrid) {
    if (splits.size() != 3) throw ManifestError("hybrid " + hybrid + " missing from a split");
  }
}

}  // namespace earcount
