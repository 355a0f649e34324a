#include "slidemil/preprocess/segment.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>

#include "slidemil/common/error.hpp"

namespace slidemil::preprocess {

std::uint8_t otsu_threshold(const Histogram& hist) {
  using boost::multiprecision::cpp_int;

  int occupied = 0;
  std::uint64_t total = 0;
  cpp_int total_sum = 0;
  for (int v = 0; v < 256; ++v) {
    if (hist[v] == 0) continue;
    ++occupied;
    total += hist[v];
    total_sum += cpp_int(hist[v]) * v;
  }
  if (occupied < 2) throw DegenerateError("histogram has fewer than two occupied bins");

  // σ_B²(t) · N² = (N·S0 − T·w0)² / (w0·w1); the N² factor is common to all t.
  cpp_int best_num = -1;
  cpp_int best_den = 1;
  int best_t = 0;
  std::uint64_t w0 = 0;
  cpp_int s0 = 0;
  for (int t = 0; t < 255; ++t) {
    w0 += hist[t];
    s0 += cpp_int(hist[t]) * t;
    const std::uint64_t w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    const cpp_int diff = cpp_int(total) * s0 - total_sum * w0;
    const cpp_int num = diff * diff;
    const cpp_int den = cpp_int(w0) * w1;
    if (best_num < 0 || num * best_den > best_num * den) {
      best_num = num;
      best_den = den;
      best_t = t;
    }
  }
  return static_cast<std::uint8_t>(best_t);
}

Channel parse_channel(const std::string& name) {
  if (name == "saturation") return Channel::saturation;
  if (name == "luminance") return Channel::luminance;
  throw ValidationError("expected 'saturation' or 'luminance', got '" + name + "'", "channel");
}

std::string to_string(Channel channel) { return channel == Channel::saturation ? "saturation" : "luminance"; }

std::vector<std::uint8_t> channel_values(const RgbImage& img, Channel channel) {
  std::vector<std::uint8_t> out(img.width() * img.height());
  auto px = img.bytes();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const unsigned r = px[3 * i], g = px[3 * i + 1], b = px[3 * i + 2];
    if (channel == Channel::saturation) {
      const unsigned hi = std::max({r, g, b});
      const unsigned lo = std::min({r, g, b});
      out[i] = hi == 0 ? 0 : static_cast<std::uint8_t>((255 * (hi - lo) + hi / 2) / hi);
    } else {
      const unsigned y = (299 * r + 587 * g + 114 * b + 500) / 1000;
      out[i] = static_cast<std::uint8_t>(255 - y);
    }
  }
  return out;
}

Histogram histogram_of(const std::vector<std::uint8_t>& values) {
  Histogram h{};
  for (auto v : values) ++h[v];
  return h;
}

std::size_t TissueMask::tissue_pixels() const noexcept {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

double TissueMask::tissue_fraction() const noexcept {
  return bits.empty() ? 0.0 : static_cast<double>(tissue_pixels()) / static_cast<double>(bits.size());
}

std::vector<unsigned char> TissueMask::to_png() const {
  std::vector<std::uint8_t> gray(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) gray[i] = bits[i] ? 255 : 0;
  return encode_png_gray(gray, width, height);
}

std::vector<std::uint8_t> median3x3(const std::vector<std::uint8_t>& bits, std::size_t width, std::size_t height) {
  std::vector<std::uint8_t> out(bits.size());
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      int count = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        const std::size_t yy = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(y) + dy, 0,
                                                          static_cast<std::ptrdiff_t>(height) - 1);
        for (int dx = -1; dx <= 1; ++dx) {
          const std::size_t xx = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(x) + dx, 0,
                                                            static_cast<std::ptrdiff_t>(width) - 1);
          count += bits[yy * width + xx] != 0;
        }
      }
      out[y * width + x] = count >= 5 ? 1 : 0;
    }
  }
  return out;
}

TissueMask segment_tissue(const RgbImage& img, const SegmentOptions& options) {
  if (img.empty()) throw InputError("image has zero size");
  const RgbImage small = downsample(img, options.downsample);
  const auto values = channel_values(small, options.channel);
  const Histogram hist = histogram_of(values);

  TissueMask mask;
  mask.width = small.width();
  mask.height = small.height();
  mask.source_width = img.width();
  mask.source_height = img.height();
  mask.downsample = options.downsample;
  mask.channel = options.channel;
  mask.bits.assign(values.size(), 0);

  const auto occupied = std::count_if(hist.begin(), hist.end(), [](std::uint64_t c) { return c > 0; });
  if (occupied < 2) {
    if (hist[0] > 0) return mask;  // nothing above zero: no tissue
    throw DegenerateError("image " + to_string(options.channel) + " channel is constant; cannot separate tissue");
  }
  mask.threshold = otsu_threshold(hist);
  for (std::size_t i = 0; i < values.size(); ++i) mask.bits[i] = values[i] > mask.threshold ? 1 : 0;
  if (options.smooth) mask.bits = median3x3(mask.bits, mask.width, mask.height);
  return mask;
}

}  // namespace slidemil::preprocess
