#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace slidemil::preprocess {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kWhite{255, 255, 255};

/// 8-bit interleaved RGB raster. Stands in for a slide at desk scale.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(std::size_t width, std::size_t height, Rgb fill = kWhite);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  bool empty() const noexcept { return width_ == 0 || height_ == 0; }

  Rgb at(std::size_t x, std::size_t y) const noexcept {
    const std::uint8_t* p = &pixels_[3 * (y * width_ + x)];
    return {p[0], p[1], p[2]};
  }
  void set(std::size_t x, std::size_t y, Rgb c) noexcept {
    std::uint8_t* p = &pixels_[3 * (y * width_ + x)];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }

  std::span<const std::uint8_t> bytes() const noexcept { return pixels_; }
  std::span<std::uint8_t> bytes() noexcept { return pixels_; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Box-filter downsample by an integer factor. Edge blocks average the pixels
/// they actually cover; output is ceil(w/f) × ceil(h/f).
RgbImage downsample(const RgbImage& img, std::size_t factor);

std::vector<unsigned char> encode_png(const RgbImage& img);
std::vector<unsigned char> encode_png_gray(std::span<const std::uint8_t> gray, std::size_t width, std::size_t height);
RgbImage decode_png(std::span<const unsigned char> bytes);

std::vector<unsigned char> encode_ppm(const RgbImage& img);
RgbImage decode_ppm(std::span<const unsigned char> bytes);

/// Reads PNG or binary PPM (P6), sniffed from the file header.
RgbImage read_image(const std::filesystem::path& path);
/// Format chosen by extension (.ppm, otherwise PNG). Atomic.
void write_image(const std::filesystem::path& path, const RgbImage& img);

}  // namespace slidemil::preprocess
