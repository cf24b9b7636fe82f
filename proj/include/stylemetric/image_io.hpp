#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace stylemetric {

/// 8-bit interleaved RGB raster, row-major, origin top-left.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t& at(int x, int y, int c) {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  bool empty() const { return width == 0 || height == 0; }
};

/// Reads PNG or JPEG (detected from the file signature) into RGB.
/// Throws IoError on unreadable or unsupported files.
RgbImage read_image(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const RgbImage& image);
/// Writes a single-channel image (one byte per pixel).
void write_png_gray(const std::filesystem::path& path, int width, int height,
                    const std::vector<std::uint8_t>& gray);

/// Center crop to the largest square, then bilinear resample to side x side.
RgbImage crop_and_resize(const RgbImage& src, int side);

}  // namespace stylemetric
