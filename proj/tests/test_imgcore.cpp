#include "doctest.h"

#include <filesystem>
#include <random>

#include "earcount/imgcore.hpp"
#include "earcount/png_io.hpp"
#include "oracles.hpp"

using namespace earcount;

TEST_CASE("rgb_to_hsv reference colours") {
  auto h = rgb_to_hsv(Rgb{255, 0, 0});
  CHECK(h.h == doctest::Approx(0.0));
  CHECK(h.s == doctest::Approx(1.0));
  CHECK(h.v == doctest::Approx(1.0));
  h = rgb_to_hsv(Rgb{255, 255, 0});
  CHECK(h.h == doctest::Approx(60.0));
  CHECK(h.s == doctest::Approx(1.0));
  h = rgb_to_hsv(Rgb{128, 128, 128});
  CHECK(h.h == doctest::Approx(0.0));
  CHECK(h.s == doctest::Approx(0.0));
  CHECK(h.v == doctest::Approx(128.0 / 255.0));
  h = rgb_to_hsv(Rgb{0, 0, 255});
  CHECK(h.h == doctest::Approx(240.0));
}

TEST_CASE("hsv round trip on random colours") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> u(0, 255);
  for (int i = 0; i < 2000; ++i) {
    const Rgb c{static_cast<std::uint8_t>(u(rng)), static_cast<std::uint8_t>(u(rng)),
                static_cast<std::uint8_t>(u(rng))};
    const Rgb back = hsv_to_rgb(rgb_to_hsv(c));
    CHECK(back.r == c.r);
    CHECK(back.g == c.g);
    CHECK(back.b == c.b);
  }
}

TEST_CASE("hue_range_mask") {
  RgbImage red(4, 3, Rgb{255, 0, 0});
  CHECK(hue_range_mask(red, 20, 70, 0, 0).count() == 0);
  RgbImage yellow(4, 3, Rgb{255, 255, 0});
  CHECK(hue_range_mask(yellow, 20, 70, 0, 0).count() == 12);
  RgbImage pair(2, 1);
  pair.set(0, 0, {255, 255, 0});
  pair.set(1, 0, {0, 0, 255});
  const auto m = hue_range_mask(pair, 20, 70, 0, 0);
  CHECK(m.at(0, 0));
  CHECK_FALSE(m.at(1, 0));
  // wrapping range picks red
  CHECK(hue_range_mask(red, 350, 10, 0, 0).count() == 12);
}

TEST_CASE("connected components: connectivity and empty mask") {
  BinaryMask empty(5, 5);
  CHECK(connected_components(empty).components.empty());
  BinaryMask diag(4, 4);
  diag.px(1, 1) = true;
  diag.px(2, 2) = true;
  CHECK(connected_components(diag, Connectivity::Eight).components.size() == 1);
  CHECK(connected_components(diag, Connectivity::Four).components.size() == 2);
}

TEST_CASE("connected components match flood fill on random masks") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int w = 1 + static_cast<int>(rng() % 16), h = 1 + static_cast<int>(rng() % 16);
    const auto m = oracle::random_mask(w, h, 0.45, rng);
    for (bool eight : {false, true}) {
      const auto lm = connected_components(m, eight ? Connectivity::Eight : Connectivity::Four);
      const auto [lab, count] = oracle::flood_fill_labels(m, eight);
      REQUIRE(static_cast<int>(lm.components.size()) == count);
      std::vector<long> area(count + 1, 0);
      std::vector<double> sx(count + 1, 0), sy(count + 1, 0);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          CHECK(lm.labels(y, x) == lab[y * w + x]);
          area[lab[y * w + x]]++;
          sx[lab[y * w + x]] += x;
          sy[lab[y * w + x]] += y;
        }
      for (const auto& c : lm.components) {
        CHECK(c.area == area[c.label]);
        CHECK(c.centroid.x == doctest::Approx(sx[c.label] / area[c.label]).epsilon(1e-15));
        CHECK(c.centroid.y == doctest::Approx(sy[c.label] / area[c.label]).epsilon(1e-15));
      }
    }
  }
}

TEST_CASE("largest component and tie break") {
  BinaryMask m(10, 3);
  for (int x = 0; x < 5; ++x) m.px(0, x) = true;  // area 5
  for (int x = 0; x < 9; ++x) m.px(2, x) = true;  // area 9
  auto big = largest_component(connected_components(m));
  CHECK(big.count() == 9);
  CHECK(big.at(0, 2));

  BinaryMask tie(10, 3);
  for (int x = 0; x < 7; ++x) {
    tie.px(0, x) = true;
    tie.px(2, x) = true;
  }
  auto first = largest_component(connected_components(tie));
  CHECK(first.at(0, 0));
  CHECK_FALSE(first.at(0, 2));
  CHECK_THROWS_AS(largest_component(connected_components(BinaryMask(3, 3))), ImageError);
}

TEST_CASE("clahe: constant image stays constant") {
  for (int v : {0, 17, 128, 255}) {
    GrayImage g(40, 24, static_cast<std::uint8_t>(v));
    const auto out = clahe(g);
    const auto first = out.px(0, 0);
    CHECK((out.px == first).all());
  }
}

TEST_CASE("clahe: two-level quadrant image matches the reference") {
  GrayImage g(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) g.px(y, x) = ((x < 32) == (y < 32)) ? 50 : 200;
  const auto out = clahe(g, {2, 2, 2.0, 256});
  CHECK(out == oracle::clahe(g, 2, 2, 2.0, 256));
}

TEST_CASE("clahe matches the reference on random images, output in range") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const int w = 8 + static_cast<int>(rng() % 40), h = 8 + static_cast<int>(rng() % 40);
    const auto g = oracle::random_gray(w, h, rng, trial % 2 ? 256 : 8);
    const ClaheParams p{1 + static_cast<int>(rng() % 5), 1 + static_cast<int>(rng() % 5),
                        0.5 + static_cast<double>(rng() % 40) / 10.0, trial % 3 ? 256 : 64};
    CHECK(clahe(g, p) == oracle::clahe(g, p.grid_cols, p.grid_rows, p.clip_limit, p.bins));
  }
}

TEST_CASE("median filter") {
  GrayImage constant(9, 7, 33);
  CHECK(median_filter(constant, 1) == constant);
  GrayImage spot(9, 7, 0);
  spot.px(3, 4) = 255;
  CHECK(median_filter(spot, 1) == GrayImage(9, 7, 0));
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = oracle::random_gray(32, 32, rng);
    const int r = 1 + trial % 3;
    CHECK(median_filter(g, r) == oracle::median(g, r));
  }
}

TEST_CASE("adaptive threshold follows value > mean - c") {
  GrayImage constant(12, 9, 90);
  CHECK(adaptive_threshold(constant, 5, 5.0).count() == 12 * 9);
  CHECK(adaptive_threshold(constant, 5, -5.0).count() == 0);
  GrayImage ramp(40, 20);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 40; ++x) ramp.px(y, x) = static_cast<std::uint8_t>(x * 6 + y);
  CHECK(adaptive_threshold(ramp, 7, 0.0) == oracle::mean_threshold(ramp, 7, 0.0));
  CHECK(adaptive_threshold(ramp, 15, 2.0) == oracle::mean_threshold(ramp, 15, 2.0));
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = oracle::random_gray(31, 23, rng);
    CHECK(adaptive_threshold(g, 3 + 2 * (trial % 6), trial - 15.0) ==
          oracle::mean_threshold(g, 3 + 2 * (trial % 6), trial - 15.0));
  }
  CHECK_THROWS(adaptive_threshold(ramp, 4, 0.0));
}

TEST_CASE("median and threshold commute with horizontal flip") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = oracle::random_gray(25, 17, rng);
    CHECK(median_filter(flip_horizontal(g), 2) == flip_horizontal(median_filter(g, 2)));
    CHECK(adaptive_threshold(flip_horizontal(g), 9, 3.0) ==
          flip_horizontal(adaptive_threshold(g, 9, 3.0)));
  }
}

TEST_CASE("mask_and") {
  std::mt19937_64 rng(12);
  const auto x = oracle::random_mask(10, 8, 0.5, rng);
  CHECK(mask_and(x, BinaryMask(10, 8, true)) == x);
  CHECK(mask_and(x, BinaryMask(10, 8, false)).count() == 0);
  CHECK(mask_and(x, x) == x);
  CHECK_THROWS(mask_and(x, BinaryMask(8, 10)));
}

TEST_CASE("morphology basics") {
  BinaryMask dot(7, 7);
  dot.px(3, 3) = true;
  const auto e = StructuringElement::rect(3, 3);
  CHECK(morphology(dot, MorphOp::Erode, e).count() == 0);
  const auto d = morphology(dot, MorphOp::Dilate, e);
  CHECK(d.count() == 9);
  for (int y = 2; y <= 4; ++y)
    for (int x = 2; x <= 4; ++x) CHECK(d.at(x, y));
}

TEST_CASE("morphology idempotence and duality on random masks") {
  std::mt19937_64 rng(13);
  const StructuringElement elements[] = {StructuringElement::rect(3, 3),
                                         StructuringElement::cross(3),
                                         StructuringElement::ellipse(5),
                                         StructuringElement::rect(5, 3)};
  for (int trial = 0; trial < 200; ++trial) {
    const auto& el = elements[trial % 4];
    auto m = oracle::random_mask(20, 16, 0.5, rng);
    const auto open = morphology(m, MorphOp::Open, el);
    const auto close = morphology(m, MorphOp::Close, el);
    CHECK(morphology(open, MorphOp::Open, el) == open);
    CHECK(morphology(close, MorphOp::Close, el) == close);
    // duality needs background beyond the border, so clear a margin
    for (int y = 0; y < m.height(); ++y)
      for (int x = 0; x < m.width(); ++x)
        if (x < el.rx() || y < el.ry() || x >= m.width() - el.rx() || y >= m.height() - el.ry())
          m.px(y, x) = false;
    const auto lhs = morphology(m, MorphOp::Erode, el);
    const auto rhs = mask_not(morphology(mask_not(m), MorphOp::Dilate, el.reflected()));
    // compare away from the border, where the complement is all foreground
    bool equal = true;
    for (int y = el.ry(); y < m.height() - el.ry(); ++y)
      for (int x = el.rx(); x < m.width() - el.rx(); ++x) equal &= lhs.at(x, y) == rhs.at(x, y);
    CHECK(equal);
  }
}

TEST_CASE("draw_dots") {
  RgbImage img(10, 10, Rgb{1, 2, 3});
  CHECK(draw_dots(img, {}, 2, {0, 0, 255}) == img);
  const Point2d p[] = {{5, 5}};
  const auto one = draw_dots(img, p, 0, {0, 0, 255});
  int changed = 0;
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) changed += !(one.at(x, y) == img.at(x, y));
  CHECK(changed == 1);
  CHECK(one.at(5, 5) == Rgb{0, 0, 255});
  const Point2d corner[] = {{0, 0}};
  const auto q = draw_dots(img, corner, 2, {0, 0, 255});
  changed = 0;
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) changed += !(q.at(x, y) == img.at(x, y));
  CHECK(changed == 6);  // (0,0) (1,0) (2,0) (0,1) (1,1) (0,2)
  CHECK(dot_mask(10, 10, corner, 2).count() == 6);
}

TEST_CASE("crop_resize centres the ear") {
  RgbImage big(1024, 256);
  BinaryMask mask(1024, 256);
  for (int y = 28; y < 228; ++y)
    for (int x = 12; x < 1012; ++x) {
      if (std::pow((x - 512.0) / 500.0, 2) + std::pow((y - 128.0) / 100.0, 2) <= 1.0) {
        big.set(x, y, {200, 180, 30});
        mask.px(y, x) = true;
      }
    }
  // centred mask, exact 2x downscale
  CHECK(crop_resize(big, 512, 128, mask).width() == 512);

  RgbImage off(1024, 256);
  BinaryMask offm(1024, 256);
  for (int y = 0; y < 256; ++y)
    for (int x = 0; x < 1024; ++x) {
      if (std::pow((x - 400.0) / 300.0, 2) + std::pow((y - 100.0) / 60.0, 2) <= 1.0) {
        off.set(x, y, {200, 180, 30});
        offm.px(y, x) = true;
      }
    }
  const auto win = ear_crop_window(offm, 512, 128);
  const auto out_mask = resample(offm, win);
  const auto lm = connected_components(out_mask);
  REQUIRE(lm.components.size() == 1);
  CHECK(std::abs(lm.components[0].centroid.x - 255.5) <= 1.0);
  CHECK(std::abs(lm.components[0].centroid.y - 63.5) <= 1.0);
  CHECK_THROWS(crop_resize(off, 512, 128, BinaryMask(1024, 256)));
}

TEST_CASE("png round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "earcount_png_test";
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(14);
  RgbImage img(13, 7);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 13; ++x)
      img.set(x, y, {static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()),
                     static_cast<std::uint8_t>(rng())});
  write_png(dir / "a.png", img);
  CHECK(read_png_rgb(dir / "a.png") == img);
  const auto g = oracle::random_gray(9, 5, rng);
  write_png(dir / "g.png", g);
  CHECK(read_png_gray(dir / "g.png") == g);
  const auto m = oracle::random_mask(11, 6, 0.5, rng);
  write_png(dir / "m.png", m);
  CHECK(read_png_mask(dir / "m.png") == m);
  const auto gm = read_png_gray(dir / "m.png");
  CHECK(gm.px.maxCoeff() == 255);
  CHECK_THROWS(read_png_rgb(dir / "missing.png"));
  std::filesystem::remove_all(dir);
}
