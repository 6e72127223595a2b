#include "earcount/hinting.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

#include "earcount/hash.hpp"

namespace earcount {

void PipelineConfig::validate() const {
  auto check = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  check(hue_lo >= 0.0 && hue_lo < 360.0 && hue_hi >= 0.0 && hue_hi < 360.0,
        "hue bounds must lie in [0, 360)");
  check(thresh_block >= 3 && thresh_block % 2 == 1, "thresh_block must be odd and >= 3");
  check(median_radius >= 1, "median_radius must be >= 1");
  check(clahe_cols >= 1 && clahe_rows >= 1 && clahe_clip > 0.0, "invalid CLAHE parameters");
  check(min_component_area >= 0, "min_component_area must be >= 0");
  check(!max_component_area || min_component_area <= *max_component_area,
        "min_component_area must not exceed max_component_area");
  check(max_component_fraction > 0.0, "max_component_fraction must be positive");
  check(dot_radius >= 0, "dot_radius must be >= 0");
  check(morph_element.px.rows() % 2 == 1 && morph_element.px.cols() % 2 == 1,
        "morphology element must have odd dimensions");
}

std::uint64_t PipelineConfig::hash() const {
  Fnv1a h;
  h.add(hue_lo).add(hue_hi).add(sat_min).add(val_min);
  h.add(clahe_cols).add(clahe_rows).add(clahe_clip).add(median_radius);
  h.add(thresh_block).add(thresh_c);
  h.add<std::int64_t>(morph_element.px.rows()).add<std::int64_t>(morph_element.px.cols());
  for (Eigen::Index i = 0; i < morph_element.px.size(); ++i) h.add<int>(morph_element.px.data()[i]);
  for (const auto& s : morph_sequence) h.add(static_cast<int>(s.op)).add(s.iterations);
  h.add(static_cast<int>(connectivity));
  h.add(min_component_area).add(max_component_area.value_or(-1)).add(max_component_fraction);
  h.add(dot_radius).add(dot_color.r).add(dot_color.g).add(dot_color.b);
  return h.value();
}

std::string variant_name(const PipelineVariant& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, BaselineVariant>) return "baseline";
        if constexpr (std::is_same_v<T, ControlVariant>) return "control";
        return "hints";
      },
      v);
}

PipelineVariant parse_variant(const std::string& name, int n_dots, std::uint64_t seed) {
  if (name == "baseline") return BaselineVariant{};
  if (name == "control") {
    if (n_dots < 0) throw std::invalid_argument("control n_dots must be >= 0");
    return ControlVariant{n_dots, seed};
  }
  if (name == "hints") return HintsVariant{};
  throw std::invalid_argument("unknown pipeline variant '" + name + "'");
}

std::uint64_t variant_hash(const PipelineVariant& v) {
  Fnv1a h;
  h.add<std::uint64_t>(v.index());
  if (const auto* c = std::get_if<ControlVariant>(&v)) h.add(c->n_dots).add(c->seed);
  return h.value();
}

Segmentation segment_ear(const RgbImage& img, const PipelineConfig& cfg) {
  const BinaryMask gate = hue_range_mask(img, cfg.hue_lo, cfg.hue_hi, cfg.sat_min, cfg.val_min);
  const LabelMap lm = connected_components(gate, Connectivity::Eight);
  if (lm.components.empty()) throw NoEarFound();
  BinaryMask ear = largest_component(lm);
  RgbImage masked = apply_mask(img, ear);
  return {std::move(ear), std::move(masked)};
}

std::vector<Point2d> detect_kernel_centers(const RgbImage& masked, const BinaryMask& ear_mask,
                                           const PipelineConfig& cfg, HintStages* stages) {
  GrayImage gray = to_gray(masked);
  gray = clahe(gray, {cfg.clahe_cols, cfg.clahe_rows, cfg.clahe_clip, 256});
  gray = median_filter(gray, cfg.median_radius);

  BinaryMask bin = adaptive_threshold(gray, cfg.thresh_block, cfg.thresh_c);
  bin = mask_and(bin, ear_mask);
  BinaryMask thresholded = bin;
  for (const auto& step : cfg.morph_sequence) {
    bin = morphology(bin, step.op, cfg.morph_element, step.iterations);
  }

  const long max_area = cfg.max_component_area.value_or(static_cast<long>(
      cfg.max_component_fraction * static_cast<double>(ear_mask.count())));
  const LabelMap lm = connected_components(bin, cfg.connectivity);
  std::vector<Point2d> centers;
  for (const auto& c : lm.components) {
    if (c.area >= cfg.min_component_area && c.area <= max_area) centers.push_back(c.centroid);
  }
  if (stages) *stages = {std::move(gray), std::move(thresholded), std::move(bin)};
  return centers;
}

namespace {

// Stamps dots, keeping every pixel outside `box` as it was.
RgbImage stamp_within(const RgbImage& img, std::span<const Point2d> points, const Box& box,
                      const PipelineConfig& cfg) {
  RgbImage out = draw_dots(img, points, cfg.dot_radius, cfg.dot_color);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (x < box.x0 || x > box.x1 || y < box.y0 || y > box.y1) out.set(x, y, img.at(x, y));
    }
  }
  return out;
}

}  // namespace

HintResult apply_variant(const RgbImage& img, const PipelineConfig& cfg,
                         const PipelineVariant& variant, HintStages* stages) {
  Segmentation seg = segment_ear(img, cfg);
  HintResult result{std::move(seg.ear_mask), std::move(seg.masked_image), {}, {}};
  const Box box = bounding_box(result.ear_mask);

  if (const auto* control = std::get_if<ControlVariant>(&variant)) {
    std::mt19937_64 rng(control->seed);
    std::uniform_real_distribution<double> ux(box.x0, box.x1);
    std::uniform_real_distribution<double> uy(box.y0, box.y1);
    result.hint_points.reserve(control->n_dots);
    for (int i = 0; i < control->n_dots; ++i) {
      const double x = ux(rng);
      const double y = uy(rng);
      result.hint_points.push_back({x, y});
    }
  } else if (std::holds_alternative<HintsVariant>(variant)) {
    result.hint_points =
        detect_kernel_centers(result.masked_image, result.ear_mask, cfg, stages);
  }

  result.output_image = result.hint_points.empty()
                            ? result.masked_image
                            : stamp_within(result.masked_image, result.hint_points, box, cfg);
  return result;
}

}  // namespace earcount
