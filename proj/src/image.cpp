#include "xmodal/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "xmodal/errors.hpp"

namespace xmodal {

RgbImage::RgbImage(int w, int h) : width(w), height(h) {
  if (w < 0 || h < 0) throw DataError("negative image extent");
  data.assign(static_cast<std::size_t>(w) * h * 3, 0);
}

void RgbImage::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  auto* p = pixel(x, y);
  p[0] = r;
  p[1] = g;
  p[2] = b;
}

std::string encode_ppm(const RgbImage& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) +
                    "\n255\n";
  out.append(reinterpret_cast<const char*>(image.data.data()), image.data.size());
  return out;
}

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_header_token(const std::string& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    const char c = bytes[pos];
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  return bytes.substr(start, pos - start);
}

int parse_header_int(const std::string& token) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(token, &used);
    if (used != token.size()) throw DataError("bad PPM header value '" + token + "'");
    return v;
  } catch (const std::logic_error&) {
    throw DataError("bad PPM header value '" + token + "'");
  }
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

RgbImage decode_ppm(const std::string& bytes) {
  std::size_t pos = 0;
  if (next_header_token(bytes, pos) != "P6") throw DataError("not a binary PPM (P6)");
  const int w = parse_header_int(next_header_token(bytes, pos));
  const int h = parse_header_int(next_header_token(bytes, pos));
  const int maxval = parse_header_int(next_header_token(bytes, pos));
  if (w <= 0 || h <= 0) throw DataError("PPM with empty extent");
  if (maxval != 255) throw DataError("only 8-bit PPM (maxval 255) is supported");
  ++pos;  // single whitespace byte after maxval
  RgbImage image(w, h);
  if (bytes.size() < pos + image.data.size()) throw DataError("truncated PPM payload");
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), image.data.size(),
              image.data.begin());
  return image;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const std::string bytes = encode_ppm(image);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

RgbImage read_ppm(const std::filesystem::path& path) { return decode_ppm(slurp(path)); }

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw DataError(std::string("PNG: ") + msg); }
void png_warn(png_structp, png_const_charp) {}

}  // namespace

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw DataError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  try {
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < image.height; ++y) {
      png_write_row(png, const_cast<png_bytep>(image.pixel(0, y)));
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
}

RgbImage read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw DataError("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  RgbImage image;
  try {
    png_init_io(png, file.get());
    png_read_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int color = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
      png_set_expand_gray_1_2_4_to_8(png);
      png_set_gray_to_rgb(png);
    }
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    image = RgbImage(w, h);
    for (int y = 0; y < h; ++y) png_read_row(png, image.pixel(0, y), nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

RgbImage read_image(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".png" || ext == ".PNG") return read_png(path);
  return read_ppm(path);
}

RgbImage crop(const RgbImage& image, int offset_x, int offset_y, int crop_w, int crop_h) {
  if (offset_x < 0 || offset_y < 0 || crop_w < 1 || crop_h < 1 ||
      offset_x + crop_w > image.width || offset_y + crop_h > image.height) {
    throw DataError("crop rectangle out of bounds");
  }
  RgbImage out(crop_w, crop_h);
  for (int y = 0; y < crop_h; ++y) {
    const auto* src = image.pixel(offset_x, offset_y + y);
    std::copy_n(src, static_cast<std::size_t>(crop_w) * 3, out.pixel(0, y));
  }
  return out;
}

RgbImage hflip(const RgbImage& image) {
  RgbImage out(image.width, image.height);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const auto* s = image.pixel(image.width - 1 - x, y);
      out.set(x, y, s[0], s[1], s[2]);
    }
  }
  return out;
}

RgbImage resize_bilinear(const RgbImage& image, int target_side) {
  if (image.width < 1 || image.height < 1 || target_side < 1) {
    throw DataError("resize needs non-empty source and target");
  }
  if (image.width == target_side && image.height == target_side) return image;

  // Corner-aligned: output pixel 0 maps to source 0, the last to source extent-1.
  auto source_coord = [target_side](int i, int extent) {
    if (target_side == 1) return 0.0;
    return static_cast<double>(i) * (extent - 1) / (target_side - 1);
  };

  RgbImage out(target_side, target_side);
  for (int y = 0; y < target_side; ++y) {
    const double sy = source_coord(y, image.height);
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double fy = sy - y0;
    for (int x = 0; x < target_side; ++x) {
      const double sx = source_coord(x, image.width);
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double fx = sx - x0;
      const auto* p00 = image.pixel(x0, y0);
      const auto* p01 = image.pixel(x1, y0);
      const auto* p10 = image.pixel(x0, y1);
      const auto* p11 = image.pixel(x1, y1);
      auto* dst = out.pixel(x, y);
      for (int c = 0; c < 3; ++c) {
        const double top = p00[c] + fx * (p01[c] - p00[c]);
        const double bottom = p10[c] + fx * (p11[c] - p10[c]);
        const double v = top + fy * (bottom - top);
        dst[c] = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
      }
    }
  }
  return out;
}

}  // namespace xmodal
