#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "slidemil/common/error.hpp"
#include "slidemil/common/log.hpp"
#include "slidemil/common/rng.hpp"
#include "slidemil/heatmap/heatmap.hpp"

using namespace slidemil;
using namespace slidemil::heatmap;
using preprocess::RegionEntry;

namespace {

// Regions on a cols×rows grid of `size`-pixel cells, with random holes.
RegionManifest grid_manifest(Rng& rng, std::size_t cols, std::size_t rows, std::int64_t size) {
  RegionManifest m;
  m.slide_id = "slide";
  m.region_size = size;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      if (rng() % 4 != 0)
        m.entries.push_back({static_cast<std::int64_t>(c) * size, static_cast<std::int64_t>(r) * size,
                             uniform01(rng)});
  if (m.entries.empty()) m.entries.push_back({0, 0, 1.0});
  return m;
}

RgbImage noise_image(Rng& rng, std::size_t w, std::size_t h) {
  RgbImage img(w, h);
  for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(rng() % 256);
  return img;
}

// Pixel-by-pixel reference: a pixel belongs to the region whose square
// contains its top-left slide coordinate.
RgbImage reference_render(const RgbImage& thumb, const RegionManifest& m, const std::vector<double>& att,
                          std::size_t scale, double alpha) {
  const double lo = *std::min_element(att.begin(), att.end());
  const double hi = *std::max_element(att.begin(), att.end());
  RgbImage out = thumb;
  for (std::size_t y = 0; y < thumb.height(); ++y) {
    for (std::size_t x = 0; x < thumb.width(); ++x) {
      const auto sx = static_cast<std::int64_t>(x * scale), sy = static_cast<std::int64_t>(y * scale);
      for (std::size_t i = 0; i < m.entries.size(); ++i) {
        const auto& e = m.entries[i];
        if (sx < e.x || sx >= e.x + m.region_size || sy < e.y || sy >= e.y + m.region_size) continue;
        const double v = hi > lo ? (att[i] - lo) / (hi - lo) : 0.0;
        const auto k = static_cast<int>(std::floor(v * 255.0 + 0.5));
        const int col[3] = {k, 0, 255 - k};
        const Rgb p = thumb.at(x, y);
        const int pix[3] = {p.r, p.g, p.b};
        std::uint8_t o[3];
        for (int c = 0; c < 3; ++c)
          o[c] = static_cast<std::uint8_t>(std::floor((1 - alpha) * pix[c] + alpha * col[c] + 0.5));
        out.set(x, y, {o[0], o[1], o[2]});
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("colormap and normalization") {
  const auto map = blue_red_colormap();
  CHECK(map.size() == 256);
  CHECK(map[0] == Rgb{0, 0, 255});
  CHECK(map[255] == Rgb{255, 0, 0});

  Rng rng(1);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> att(1 + rng() % 60);
    for (double& a : att) a = uniform01(rng) * std::pow(10.0, static_cast<double>(rng() % 7) - 6);
    const auto norm = normalize_attention(att, {});
    const auto mn = std::min_element(att.begin(), att.end()) - att.begin();
    const auto mx = std::max_element(att.begin(), att.end()) - att.begin();
    CHECK(colormap_index(norm[mn]) == 0);
    if (att[mx] > att[mn]) CHECK(colormap_index(norm[mx]) == 255);
    for (double v : norm) CHECK((v >= 0.0 && v <= 1.0));
  }

  const auto warnings = log::warning_count();
  const std::vector<double> flat(7, 0.2);
  const auto norm = normalize_attention(flat, {});
  CHECK(std::all_of(norm.begin(), norm.end(), [](double v) { return v == 0.0; }));
  CHECK(log::warning_count() == warnings + 1);

  HeatmapSpec pct;
  pct.normalization = Normalization::percentile;
  pct.percentile_low = 10;
  pct.percentile_high = 90;
  std::vector<double> outlier(11);
  for (std::size_t i = 0; i < 11; ++i) outlier[i] = static_cast<double>(i);
  outlier[10] = 1000;
  const auto clipped = normalize_attention(outlier, pct);
  CHECK(clipped[0] == 0.0);
  CHECK(clipped[9] == 1.0);
  CHECK(clipped[10] == 1.0);
  CHECK(clipped[5] == doctest::Approx(4.0 / 8.0));

  HeatmapSpec bad;
  bad.alpha = 1.5;
  CHECK_THROWS_AS(validate(bad), ValidationError);
  bad = {};
  bad.scale = 0;
  CHECK_THROWS_AS(validate(bad), ValidationError);
}

TEST_CASE("rendering matches the per-pixel reference") {
  Rng rng(7);
  for (int t = 0; t < 60; ++t) {
    const std::size_t scale = 1 + rng() % 8, cells = 1 + rng() % 5;
    const std::int64_t size = static_cast<std::int64_t>(scale * (1 + rng() % 4));
    const auto m = grid_manifest(rng, cells, cells, size);
    // The thumbnail may be a little larger or smaller than the tiled area.
    const std::size_t w = cells * static_cast<std::size_t>(size) / scale + rng() % 3;
    const std::size_t h = cells * static_cast<std::size_t>(size) / scale - (rng() % 2 && cells > 1 ? 1 : 0);
    const auto thumb = noise_image(rng, w, h);
    std::vector<double> att(m.entries.size());
    for (double& a : att) a = uniform01(rng);
    HeatmapSpec spec;
    spec.scale = scale;
    spec.alpha = static_cast<double>(rng() % 11) / 10;
    const auto out = render_heatmap(thumb, m, att, spec);
    CHECK(out == reference_render(thumb, m, att, scale, spec.alpha));

    // Blend order is irrelevant.
    std::vector<std::size_t> perm(att.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    auto m2 = m;
    std::vector<double> att2(att.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
      m2.entries[i] = m.entries[perm[i]];
      att2[i] = att[perm[i]];
    }
    CHECK(render_heatmap(thumb, m2, att2, spec) == out);
  }
}

TEST_CASE("rendering edge cases") {
  RegionManifest m;
  m.region_size = 64;
  m.entries = {{0, 0, 1.0}, {64, 0, 1.0}, {0, 64, 1.0}};
  const RgbImage thumb(4, 4);
  HeatmapSpec spec;
  spec.scale = 32;

  // Uniform attention: every region gets the same tint, the rest stays white.
  const auto uni = render_heatmap(thumb, m, std::vector<double>(3, 0.3), spec);
  const Rgb tint{128, 128, 255};
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) CHECK(uni.at(x, y) == (x >= 2 && y >= 2 ? preprocess::kWhite : tint));

  RegionManifest one;
  one.region_size = 64;
  one.entries = {{0, 0, 1.0}};
  spec.alpha = 1.0;
  const auto top = render_heatmap(thumb, one, std::vector<double>{1.0}, spec);
  // A lone region is constant attention, so it sits at the bottom color.
  CHECK(top.at(0, 0) == Rgb{0, 0, 255});
  const auto two = render_heatmap(thumb, m, std::vector<double>{1.0, 0.0, 0.0}, spec);
  CHECK(two.at(0, 0) == Rgb{255, 0, 0});
  CHECK(two.at(2, 0) == Rgb{0, 0, 255});

  CHECK_THROWS_AS(render_heatmap(thumb, m, std::vector<double>{1.0}, spec), DimensionError);
  CHECK_THROWS_AS(render_heatmap(thumb, RegionManifest{}, std::vector<double>{}, spec), InputError);

  const auto csv = attention_csv(m, std::vector<double>{0.5, 0.25, 0.25});
  CHECK(csv == "slide_id,x,y,raw,normalized\n,0,0,0.5,1\n,64,0,0.25,0\n,0,64,0.25,0\n");
}

TEST_CASE("attention summary") {
  RegionManifest m;
  m.entries = {{0, 0, 1.0}, {4096, 0, 0.8}, {0, 4096, 0.2}, {4096, 4096, 0.4}};
  const auto eq = attention_summary(m, std::vector<double>(4, 0.25));
  CHECK(eq.tissue_regions == 2);
  CHECK(eq.background_regions == 2);
  CHECK(eq.score == 0.0);
  CHECK_FALSE(eq.confounded());

  const auto conf = attention_summary(m, std::vector<double>{0.1, 0.1, 0.5, 0.3});
  CHECK(*conf.score == doctest::Approx(0.3));
  CHECK(conf.confounded());
  const auto j = nlohmann::json::parse(summary_to_json(conf));
  CHECK(j["confounded"] == true);

  RegionManifest full;
  full.entries = {{0, 0, 1.0}, {4096, 0, 0.9}};
  const auto f = attention_summary(full, std::vector<double>{0.5, 0.5});
  CHECK_FALSE(f.background_mean);
  CHECK_FALSE(f.score);
  CHECK(nlohmann::json::parse(summary_to_json(f))["background_mean"].is_null());

  // Mask fractions override the manifest's.
  preprocess::TissueMask mask;
  mask.width = mask.source_width = 8;
  mask.height = mask.source_height = 4;
  mask.bits.assign(32, 0);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 4; x < 8; ++x) mask.bits[y * 8 + x] = 1;
  RegionManifest small;
  small.region_size = 4;
  small.entries = {{0, 0, 1.0}, {4, 0, 0.0}};
  const auto s = attention_summary(small, std::vector<double>{0.9, 0.1}, &mask);
  CHECK(*s.background_mean == 0.9);
  CHECK(*s.tissue_mean == 0.1);
}

TEST_CASE("top fraction and Jaccard") {
  std::vector<double> att(25);
  for (std::size_t i = 0; i < att.size(); ++i) att[i] = static_cast<double>((i * 7) % 25);
  const auto top = top_fraction_regions(att, 0.1);
  CHECK(top.size() == 3);
  for (std::size_t i : top) CHECK(att[i] >= 22);
  CHECK(top_fraction_regions(std::vector<double>(10, 1.0), 0.2) == std::vector<std::size_t>{0, 1});
  CHECK(top_fraction_regions(att, 0.0).empty());
  CHECK(top_fraction_regions(att, 1.0).size() == 25);

  CHECK(jaccard({1, 2, 3}, {2, 3, 4}) == 0.5);
  CHECK(jaccard({}, {}) == 1.0);
  CHECK(jaccard({1}, {}) == 0.0);
  CHECK(jaccard({3, 1, 1}, {1, 3}) == 1.0);
}
