#include "slidemil/heatmap/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "slidemil/common/error.hpp"
#include "slidemil/common/files.hpp"
#include "slidemil/common/log.hpp"

namespace slidemil::heatmap {

Colormap blue_red_colormap() {
  Colormap map{};
  for (std::size_t i = 0; i < map.size(); ++i) {
    map[i] = Rgb{static_cast<std::uint8_t>(i), 0, static_cast<std::uint8_t>(255 - i)};
  }
  return map;
}

void validate(const HeatmapSpec& spec) {
  if (!(spec.alpha >= 0.0 && spec.alpha <= 1.0)) throw ValidationError("alpha must be in [0, 1]", "alpha");
  if (spec.scale == 0) throw ValidationError("scale must be positive", "scale");
  if (spec.normalization == Normalization::percentile &&
      !(spec.percentile_low >= 0.0 && spec.percentile_low < spec.percentile_high && spec.percentile_high <= 100.0)) {
    throw ValidationError("percentiles must satisfy 0 <= low < high <= 100", "percentile");
  }
}

namespace {

double percentile(std::vector<double> sorted, double p) {
  std::sort(sorted.begin(), sorted.end());
  const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

void check_lengths(const RegionManifest& manifest, std::span<const double> attention) {
  if (manifest.entries.empty()) throw InputError("manifest for slide '" + manifest.slide_id + "' is empty");
  if (attention.size() != manifest.entries.size()) {
    throw DimensionError("attention has " + std::to_string(attention.size()) + " values but the manifest has " +
                         std::to_string(manifest.entries.size()) + " regions");
  }
}

}  // namespace

std::vector<double> normalize_attention(std::span<const double> attention, const HeatmapSpec& spec) {
  std::vector<double> v(attention.begin(), attention.end());
  if (v.empty()) return v;
  if (spec.normalization == Normalization::percentile) {
    const double lo = percentile(v, spec.percentile_low);
    const double hi = percentile(v, spec.percentile_high);
    for (double& x : v) x = std::clamp(x, lo, hi);
  }
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  const double lo = *mn, hi = *mx;
  if (!(hi > lo)) {
    log::warn("constant attention; rendering every region at the bottom of the colormap");
    std::fill(v.begin(), v.end(), 0.0);
    return v;
  }
  for (double& x : v) x = x == hi ? 1.0 : (x - lo) / (hi - lo);
  return v;
}

std::size_t colormap_index(double normalized) {
  return static_cast<std::size_t>(std::lround(std::clamp(normalized, 0.0, 1.0) * 255.0));
}

RgbImage render_heatmap(const RgbImage& thumbnail, const RegionManifest& manifest, std::span<const double> attention,
                        const HeatmapSpec& spec) {
  validate(spec);
  check_lengths(manifest, attention);
  const auto norm = normalize_attention(attention, spec);
  RgbImage out = thumbnail;
  const auto s = static_cast<std::int64_t>(spec.scale);
  const auto w = static_cast<std::int64_t>(out.width());
  const auto h = static_cast<std::int64_t>(out.height());
  auto blend = [a = spec.alpha](std::uint8_t pix, std::uint8_t col) {
    return static_cast<std::uint8_t>(std::lround((1.0 - a) * pix + a * col));
  };
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    const Rgb c = spec.colormap[colormap_index(norm[i])];
    // Footprints are [x/s, (x+size)/s), so neighbouring regions never share a pixel.
    const std::int64_t x0 = std::max<std::int64_t>(0, e.x / s), x1 = std::min(w, (e.x + manifest.region_size) / s);
    const std::int64_t y0 = std::max<std::int64_t>(0, e.y / s), y1 = std::min(h, (e.y + manifest.region_size) / s);
    for (std::int64_t y = y0; y < y1; ++y) {
      for (std::int64_t x = x0; x < x1; ++x) {
        const Rgb p = out.at(x, y);
        out.set(x, y, Rgb{blend(p.r, c.r), blend(p.g, c.g), blend(p.b, c.b)});
      }
    }
  }
  return out;
}

std::string attention_csv(const RegionManifest& manifest, std::span<const double> attention, const HeatmapSpec& spec) {
  check_lengths(manifest, attention);
  const auto norm = normalize_attention(attention, spec);
  std::ostringstream out;
  out << "slide_id,x,y,raw,normalized\n";
  for (std::size_t i = 0; i < attention.size(); ++i) {
    const auto& e = manifest.entries[i];
    out << manifest.slide_id << ',' << e.x << ',' << e.y << ',' << format_double(attention[i]) << ','
        << format_double(norm[i]) << '\n';
  }
  return out.str();
}

AttentionSummary attention_summary(const RegionManifest& manifest, std::span<const double> attention,
                                   const preprocess::TissueMask* mask) {
  check_lengths(manifest, attention);
  AttentionSummary s;
  double tissue = 0.0, background = 0.0;
  for (std::size_t i = 0; i < attention.size(); ++i) {
    const auto& e = manifest.entries[i];
    const double frac =
        mask ? preprocess::region_tissue_fraction(*mask, e.x, e.y, manifest.region_size) : e.tissue_fraction;
    if (frac < 0.5) {
      ++s.background_regions;
      background += attention[i];
    } else {
      ++s.tissue_regions;
      tissue += attention[i];
    }
  }
  if (s.tissue_regions) s.tissue_mean = tissue / static_cast<double>(s.tissue_regions);
  if (s.background_regions) s.background_mean = background / static_cast<double>(s.background_regions);
  if (s.tissue_mean && s.background_mean) s.score = *s.background_mean - *s.tissue_mean;
  return s;
}

std::string summary_to_json(const AttentionSummary& s) {
  nlohmann::ordered_json j;
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  j["tissue_regions"] = s.tissue_regions;
  j["background_regions"] = s.background_regions;
  j["tissue_mean"] = opt(s.tissue_mean);
  j["background_mean"] = opt(s.background_mean);
  j["confounding_score"] = opt(s.score);
  j["confounded"] = s.confounded();
  return j.dump(2) + "\n";
}

std::vector<std::size_t> top_fraction_regions(std::span<const double> attention, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ValidationError("fraction must be in [0, 1]", "fraction");
  std::vector<std::size_t> idx(attention.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return attention[a] > attention[b]; });
  const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(attention.size()) - 1e-9));
  idx.resize(std::min(k, idx.size()));
  std::sort(idx.begin(), idx.end());
  return idx;
}

double jaccard(std::vector<std::size_t> a, std::vector<std::size_t> b) {
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  if (a.empty() && b.empty()) return 1.0;
  std::vector<std::size_t> both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
  return static_cast<double>(both.size()) / static_cast<double>(a.size() + b.size() - both.size());
}

}  // namespace slidemil::heatmap
