#pragma once

#include <png.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "thermvis/error.hpp"
#include "thermvis/image.hpp"

namespace thermvis {

/// Reads an 8-bit PNG (any color type is converted to gray) as a uint8 image.
inline GrayImage read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw DataError("cannot read PNG '" + path.string() + "': " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw DataError("cannot decode PNG '" + path.string() + "': " + msg);
  }
  const int h = static_cast<int>(image.height);
  const int w = static_cast<int>(image.width);
  GrayImage out(h, w, ValueRange::UInt8);
  auto dst = out.pixels();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = buffer[i];
  return out;
}

/// Writes an 8-bit single-channel PNG. Normalized images are denormalized first.
inline void write_png(const std::filesystem::path& path, const GrayImage& img) {
  const GrayImage u8 = img.range() == ValueRange::UInt8 ? img : denormalize(img);
  std::vector<std::uint8_t> buffer(u8.size());
  auto src = u8.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    buffer[i] = static_cast<std::uint8_t>(std::lround(std::clamp(src[i], 0.0, 255.0)));
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(u8.width());
  image.height = static_cast<png_uint_32>(u8.height());
  image.format = PNG_FORMAT_GRAY;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, buffer.data(), 0,
                               nullptr)) {
    throw DataError("cannot write PNG '" + path.string() + "': " + image.message);
  }
}

}  // namespace thermvis
