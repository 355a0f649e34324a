#include <doctest.h>

#include <cmath>
#include <random>

#include "../support/oracles.hpp"
#include "slidemil/common/error.hpp"
#include "slidemil/common/log.hpp"
#include "slidemil/preprocess/tiling.hpp"
#include "slidemil/synth/slide.hpp"

using namespace slidemil;
using namespace slidemil::preprocess;

namespace {

TissueMask full_mask(std::size_t w, std::size_t h, std::size_t ds) {
  TissueMask m;
  m.source_width = w;
  m.source_height = h;
  m.downsample = ds;
  m.width = (w + ds - 1) / ds;
  m.height = (h + ds - 1) / ds;
  m.bits.assign(m.width * m.height, 1);
  return m;
}

synth::SlideGeometry two_blobs() {
  synth::SlideGeometry g;
  g.width = 640;
  g.height = 480;
  g.blobs = {{180, 200, 120, 90}, {470, 300, 110, 140}};
  g.noise = 6;
  g.seed = 5;
  return g;
}

}  // namespace

TEST_CASE("otsu equals the exhaustive rational oracle") {
  Rng rng(17);
  for (int t = 0; t < 300; ++t) {
    Histogram h{};
    std::normal_distribution<double> a(40 + 60 * uniform01(rng), 3 + 20 * uniform01(rng));
    std::normal_distribution<double> b(140 + 100 * uniform01(rng), 3 + 20 * uniform01(rng));
    const int n = 50 + static_cast<int>(uniform01(rng) * 5000);
    for (int i = 0; i < n; ++i) {
      const double v = uniform01(rng) < 0.4 ? a(rng) : b(rng);
      h[static_cast<std::size_t>(std::clamp(std::lround(v), 0L, 255L))]++;
    }
    if (std::count_if(h.begin(), h.end(), [](auto c) { return c > 0; }) < 2) continue;
    CHECK(otsu_threshold(h) == oracle::otsu_exhaustive(h));
  }
}

TEST_CASE("otsu edge cases") {
  Histogram spikes{};
  spikes[10] = 500;
  spikes[200] = 300;
  const int t = otsu_threshold(spikes);
  CHECK(t >= 10);
  CHECK(t < 200);
  CHECK(t == oracle::otsu_exhaustive(spikes));

  Histogram single{};
  single[77] = 1000;
  CHECK_THROWS_AS(otsu_threshold(single), DegenerateError);
  CHECK_THROWS_AS(otsu_threshold(Histogram{}), DegenerateError);
}

TEST_CASE("segmentation of uniform images") {
  const auto empty = segment_tissue(RgbImage(64, 48));
  CHECK(empty.tissue_pixels() == 0);
  CHECK(empty.width == 64);
  CHECK_THROWS_AS(segment_tissue(RgbImage(16, 16, Rgb{200, 100, 150})), DegenerateError);
}

TEST_CASE("ellipse mask area within 2% of ground truth") {
  synth::SlideGeometry g;
  g.width = 400;
  g.height = 300;
  g.blobs = {{200, 150, 130, 90}};
  g.noise = 8;
  g.seed = 2;
  const auto slide = synth::generate_slide_image(g);
  const double truth = static_cast<double>(slide.mask.tissue_pixels());
  CHECK(std::fabs(truth - M_PI * 130 * 90) / (M_PI * 130 * 90) < 0.01);
  const auto mask = segment_tissue(slide.image);
  CHECK(std::fabs(static_cast<double>(mask.tissue_pixels()) - truth) / truth < 0.02);

  const auto coarse = segment_tissue(slide.image, {Channel::saturation, 4, true});
  CHECK(coarse.width == 100);
  CHECK(coarse.height == 75);
  CHECK(std::fabs(coarse.tissue_fraction() - slide.mask.tissue_fraction()) < 0.02);
}

TEST_CASE("pen marks: saturation excludes them, luminance does not") {
  synth::SlideGeometry g;
  g.width = 400;
  g.height = 300;
  g.blobs = {{150, 150, 100, 80}};
  g.pens = {{260, 40, 380, 260, 14}};
  g.noise = 6;
  g.seed = 3;
  const auto slide = synth::generate_slide_image(g);
  std::size_t pen = 0, sat_on_pen = 0, lum_on_pen = 0;
  const auto sat = segment_tissue(slide.image, {Channel::saturation, 1, true});
  const auto lum = segment_tissue(slide.image, {Channel::luminance, 1, true});
  for (std::size_t y = 0; y < g.height; ++y) {
    for (std::size_t x = 0; x < g.width; ++x) {
      if (!synth::inside(g.pens[0], x + 0.5, y + 0.5)) continue;
      ++pen;
      sat_on_pen += sat.at(x, y);
      lum_on_pen += lum.at(x, y);
    }
  }
  CHECK(pen > 1000);
  CHECK(sat_on_pen < pen / 20);
  CHECK(lum_on_pen > pen * 9 / 10);
  CHECK(sat.bits != lum.bits);
}

TEST_CASE("median smoothing removes isolated pixels") {
  std::vector<std::uint8_t> bits(25, 0);
  bits[12] = 1;
  const auto out = median3x3(bits, 5, 5);
  CHECK(std::count(out.begin(), out.end(), 1) == 0);
  std::vector<std::uint8_t> full(25, 1);
  full[12] = 0;
  const auto filled = median3x3(full, 5, 5);
  CHECK(std::count(filled.begin(), filled.end(), 1) == 25);
}

TEST_CASE("tiling grid arithmetic") {
  CHECK(tile_regions(full_mask(8192, 8192, 64), {4096, 0.15, false}).entries.size() == 4);
  const auto one = tile_regions(full_mask(8191, 4096, 1), {4096, 0.15, false});
  REQUIRE(one.entries.size() == 1);
  CHECK(one.entries[0] == RegionEntry{0, 0, 1.0});

  const auto warnings = log::warning_count();
  const auto small = full_mask(1000, 900, 1);
  CHECK(tile_regions(small, {4096, 0.15, false}).entries.empty());
  CHECK(log::warning_count() == warnings + 1);
  const auto padded = tile_regions(small, {4096, 0.0, true});
  REQUIRE(padded.entries.size() == 1);
  CHECK(padded.entries[0].tissue_fraction == doctest::Approx(1000.0 * 900 / (4096.0 * 4096)));
  CHECK_THROWS_AS(tile_regions(small, {0, 0.15, false}), ValidationError);
}

TEST_CASE("tiling matches a brute-force pixel-count oracle") {
  const auto slide = synth::generate_slide_image(two_blobs());
  for (std::int64_t size : {32, 50, 64, 100}) {
    for (double min_frac : {0.0, 0.15, 0.5, 0.9}) {
      const auto m = tile_regions(slide.mask, {size, min_frac, false}, "s");
      std::vector<RegionEntry> expected;
      for (std::int64_t y = 0; y + size <= 480; y += size) {
        for (std::int64_t x = 0; x + size <= 640; x += size) {
          const double f = oracle::count_tile(slide.mask, x, y, size);
          if (f >= min_frac) expected.push_back({x, y, f});
        }
      }
      REQUIRE(m.entries.size() == expected.size());
      for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(m.entries[i].x == expected[i].x);
        CHECK(m.entries[i].y == expected[i].y);
        CHECK(m.entries[i].tissue_fraction == doctest::Approx(expected[i].tissue_fraction).epsilon(1e-15));
      }
    }
  }
}

TEST_CASE("tiling invariants") {
  const auto slide = synth::generate_slide_image(two_blobs());
  const auto mask = segment_tissue(slide.image);
  std::size_t previous = 0;
  for (double f : {0.9, 0.6, 0.3, 0.15, 0.0}) {
    const auto m = tile_regions(mask, {40, f, false});
    CHECK(m.entries.size() >= previous);
    previous = m.entries.size();
    for (const auto& e : m.entries) {
      CHECK(e.tissue_fraction >= f);
      CHECK(e.x % 40 == 0);
      CHECK(e.y % 40 == 0);
    }
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
      for (std::size_t j = i + 1; j < m.entries.size(); ++j) {
        const auto& a = m.entries[i];
        const auto& b = m.entries[j];
        const bool overlap = a.x < b.x + 40 && b.x < a.x + 40 && a.y < b.y + 40 && b.y < a.y + 40;
        CHECK_FALSE(overlap);
      }
    }
    CHECK(static_cast<double>(m.entries.size()) * 40 * 40 <= 640.0 * 480);
  }
  CHECK(manifest_to_csv(tile_regions(segment_tissue(slide.image), {40, 0.15, false}, "a")) ==
        manifest_to_csv(tile_regions(segment_tissue(slide.image), {40, 0.15, false}, "a")));
}

TEST_CASE("manifest CSV round trip") {
  RegionManifest m{"slide-7", 256, 0.15, {{0, 0, 0.25}, {256, 0, 1.0 / 3.0}, {512, 256, 0.999}}};
  CHECK(manifest_from_csv(manifest_to_csv(m)).entries == m.entries);
  CHECK(manifest_from_csv(manifest_to_csv(m)).slide_id == "slide-7");
  CHECK(manifest_from_csv(manifest_to_csv(m)).region_size == 256);
}

TEST_CASE("pad to a single region") {
  RgbImage img(100, 60, Rgb{10, 20, 30});
  const auto out = pad_to_single_region(img, 256);
  CHECK(out.width() == 256);
  CHECK(out.height() == 256);
  const std::size_t ox = 78, oy = 98;
  std::size_t white = 0, copied = 0;
  for (std::size_t y = 0; y < 256; ++y) {
    for (std::size_t x = 0; x < 256; ++x) {
      const bool inside = x >= ox && x < ox + 100 && y >= oy && y < oy + 60;
      const Rgb c = out.at(x, y);
      if (inside) copied += c == Rgb{10, 20, 30};
      else white += c == kWhite;
    }
  }
  CHECK(copied == 6000);
  CHECK(white == 256 * 256 - 6000);
  RgbImage square(64, 64, Rgb{1, 2, 3});
  CHECK(pad_to_single_region(square, 64) == square);
  CHECK_THROWS_AS(pad_to_single_region(RgbImage(300, 10), 256), ValidationError);
}

TEST_CASE("TMA-sized image padded to one 4096 region") {
  RgbImage tma(1000, 1000, Rgb{200, 120, 170});
  const auto out = pad_to_single_region(tma, 4096);
  CHECK(out.width() == 4096);
  CHECK(out.at(1548, 1548) == Rgb{200, 120, 170});
  CHECK(out.at(1547, 1548) == kWhite);
  CHECK(out.at(2547, 2547) == Rgb{200, 120, 170});
  CHECK(out.at(2548, 2547) == kWhite);
}

TEST_CASE("image codecs round trip") {
  RgbImage img(17, 9);
  Rng rng(1);
  for (std::size_t y = 0; y < 9; ++y)
    for (std::size_t x = 0; x < 17; ++x)
      img.set(x, y, Rgb{static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng())});
  CHECK(decode_png(encode_png(img)) == img);
  CHECK(decode_ppm(encode_ppm(img)) == img);
  auto bad = encode_ppm(img);
  bad.resize(bad.size() - 5);
  CHECK_THROWS_AS(decode_ppm(bad), InputError);
  CHECK(downsample(img, 1) == img);
  CHECK(make_thumbnail(RgbImage(640, 128), 64).width() == 10);
}

TEST_CASE("channel names") {
  CHECK(parse_channel("luminance") == Channel::luminance);
  CHECK(to_string(Channel::saturation) == "saturation");
  CHECK_THROWS_AS(parse_channel("hue"), ValidationError);
}
