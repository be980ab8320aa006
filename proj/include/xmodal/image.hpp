#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace xmodal {

// 8-bit RGB raster, row-major, channels interleaved.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h);  // all black

  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width + x) * 3;
  }
  std::uint8_t* pixel(int x, int y) { return data.data() + offset(x, y); }
  const std::uint8_t* pixel(int x, int y) const { return data.data() + offset(x, y); }
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);

  bool operator==(const RgbImage&) const = default;
};

// Binary PPM (P6, maxval 255).
std::string encode_ppm(const RgbImage& image);
RgbImage decode_ppm(const std::string& bytes);
void write_ppm(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_ppm(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_png(const std::filesystem::path& path);

// Dispatches on extension (.ppm or .png).
RgbImage read_image(const std::filesystem::path& path);

// Exact sub-rectangle copy. Throws DataError when the rectangle leaves the image.
RgbImage crop(const RgbImage& image, int offset_x, int offset_y, int crop_w, int crop_h);

RgbImage hflip(const RgbImage& image);

// Corner-aligned bilinear resampling to a square target; output rounded
// half away from zero.
RgbImage resize_bilinear(const RgbImage& image, int target_side);

}  // namespace xmodal
