#pragma once

#include <filesystem>

#include "earcount/imgcore.hpp"

namespace earcount {

// PNG encoding is byte-stable: fixed zlib level and filter, no timestamps.

RgbImage read_png_rgb(const std::filesystem::path& path);
GrayImage read_png_gray(const std::filesystem::path& path);
/// Any non-zero sample reads as foreground.
BinaryMask read_png_mask(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const RgbImage& img);
void write_png(const std::filesystem::path& path, const GrayImage& img);
/// 1-bit greyscale; foreground decodes to 255 at 8 bits.
void write_png(const std::filesystem::path& path, const BinaryMask& mask);

}  // namespace earcount
