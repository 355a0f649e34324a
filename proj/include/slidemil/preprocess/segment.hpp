#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "slidemil/preprocess/image.hpp"

namespace slidemil::preprocess {

using Histogram = std::array<std::uint64_t, 256>;

/// Otsu threshold t: class 0 is {v ≤ t}, class 1 is {v > t}. Maximizes the
/// between-class variance using exact integer arithmetic; ties go to the lowest
/// t. Throws DegenerateError when fewer than two bins are occupied.
std::uint8_t otsu_threshold(const Histogram& histogram);

enum class Channel { saturation, luminance };

Channel parse_channel(const std::string& name);
std::string to_string(Channel channel);

/// Per-pixel 8-bit value in which tissue is high: HSV saturation, or inverted
/// luminance (255 − Y) so darker pixels score higher.
std::vector<std::uint8_t> channel_values(const RgbImage& img, Channel channel);

Histogram histogram_of(const std::vector<std::uint8_t>& values);

/// Binary tissue raster, possibly at a coarser grid than its source slide.
struct TissueMask {
  std::size_t width = 0;   // mask raster
  std::size_t height = 0;
  std::size_t source_width = 0;  // slide pixels
  std::size_t source_height = 0;
  std::size_t downsample = 1;    // slide pixels per mask pixel
  std::uint8_t threshold = 0;
  Channel channel = Channel::saturation;
  std::vector<std::uint8_t> bits;  // 1 = tissue, row-major

  bool at(std::size_t x, std::size_t y) const noexcept { return bits[y * width + x] != 0; }
  std::size_t tissue_pixels() const noexcept;
  double tissue_fraction() const noexcept;
  /// 0/255 grayscale PNG.
  std::vector<unsigned char> to_png() const;
};

struct SegmentOptions {
  Channel channel = Channel::saturation;
  std::size_t downsample = 1;
  bool smooth = true;  // 3×3 median on the binary mask
};

/// Otsu segmentation of `img`. An image whose channel is identically zero
/// (e.g. pure white under saturation) has no tissue and yields an empty mask;
/// any other single-valued channel is degenerate and throws.
TissueMask segment_tissue(const RgbImage& img, const SegmentOptions& options = {});

/// 3×3 binary median with replicated borders.
std::vector<std::uint8_t> median3x3(const std::vector<std::uint8_t>& bits, std::size_t width, std::size_t height);

}  // namespace slidemil::preprocess
