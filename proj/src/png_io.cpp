#include "earcount/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>

namespace earcount {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw ImageError("cannot open " + path.string());
  return f;
}

struct ErrorSink {
  std::string message;
};

[[noreturn]] void on_png_error(png_structp png, png_const_charp msg) {
  static_cast<ErrorSink*>(png_get_error_ptr(png))->message = msg;
  png_longjmp(png, 1);
}
void on_png_warning(png_structp, png_const_charp) {}

// Decodes any PNG into 8-bit samples with `channels` channels (1 or 3).
struct Decoded {
  int width = 0, height = 0;
  std::vector<std::uint8_t> samples;
};

Decoded decode(const std::filesystem::path& path, int channels) {
  FilePtr file = open_file(path, "rb");
  ErrorSink sink;
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &sink, on_png_error, on_png_warning);
  if (!png) throw ImageError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  Decoded out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    throw ImageError(path.string() + ": " + sink.message);
  }
  {
    png_init_io(png, file.get());
    png_read_info(png, info);
    const auto color = png_get_color_type(png, info);
    const auto depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    const bool is_gray = (color & PNG_COLOR_MASK_COLOR) == 0;
    if (channels == 3 && is_gray) png_set_gray_to_rgb(png);
    if (channels == 1 && !is_gray) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    png_read_update_info(png, info);

    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    const std::size_t stride = png_get_rowbytes(png, info);
    if (stride != static_cast<std::size_t>(out.width) * channels) {
      png_error(png, "unexpected row layout");
    }
    out.samples.resize(stride * out.height);
    rows.resize(out.height);
    for (int y = 0; y < out.height; ++y) rows[y] = out.samples.data() + stride * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  return out;
}

void encode(const std::filesystem::path& path, int width, int height, int color_type, int depth,
            const std::vector<std::uint8_t>& packed, std::size_t stride) {
  FilePtr file = open_file(path, "wb");
  ErrorSink sink;
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, &sink, on_png_error, on_png_warning);
  if (!png) throw ImageError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};

  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(packed.data() + stride * y);
  }
  if (setjmp(png_jmpbuf(png))) {
    throw ImageError(path.string() + ": " + sink.message);
  }
  png_init_io(png, file.get());
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_NONE | PNG_FILTER_SUB | PNG_FILTER_UP);
  png_set_IHDR(png, info, width, height, depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
}

}  // namespace

RgbImage read_png_rgb(const std::filesystem::path& path) {
  Decoded d = decode(path, 3);
  RgbImage img(d.width, d.height);
  std::copy(d.samples.begin(), d.samples.end(), img.data().begin());
  return img;
}

GrayImage read_png_gray(const std::filesystem::path& path) {
  Decoded d = decode(path, 1);
  GrayImage img(d.width, d.height);
  std::copy(d.samples.begin(), d.samples.end(), img.px.data());
  return img;
}

BinaryMask read_png_mask(const std::filesystem::path& path) {
  const GrayImage g = read_png_gray(path);
  return BinaryMask(Raster<bool>(g.px > 0));
}

void write_png(const std::filesystem::path& path, const RgbImage& img) {
  std::vector<std::uint8_t> bytes(img.data().begin(), img.data().end());
  encode(path, img.width(), img.height(), PNG_COLOR_TYPE_RGB, 8, bytes,
         static_cast<std::size_t>(img.width()) * 3);
}

void write_png(const std::filesystem::path& path, const GrayImage& img) {
  std::vector<std::uint8_t> bytes(img.px.data(), img.px.data() + img.px.size());
  encode(path, img.width(), img.height(), PNG_COLOR_TYPE_GRAY, 8, bytes,
         static_cast<std::size_t>(img.width()));
}

void write_png(const std::filesystem::path& path, const BinaryMask& mask) {
  const std::size_t stride = (static_cast<std::size_t>(mask.width()) + 7) / 8;
  std::vector<std::uint8_t> bits(stride * mask.height(), 0);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.px(y, x)) bits[stride * y + x / 8] |= static_cast<std::uint8_t>(0x80 >> (x % 8));
    }
  }
  encode(path, mask.width(), mask.height(), PNG_COLOR_TYPE_GRAY, 1, bits, stride);
}

}  // namespace earcount
