#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slidemil/preprocess/image.hpp"
#include "slidemil/preprocess/segment.hpp"
#include "slidemil/preprocess/tiling.hpp"

namespace slidemil::heatmap {

using preprocess::RegionManifest;
using preprocess::Rgb;
using preprocess::RgbImage;

enum class Normalization { minmax, percentile };

using Colormap = std::array<Rgb, 256>;

/// Linear blue (index 0) to red (index 255) ramp.
Colormap blue_red_colormap();

struct HeatmapSpec {
  Normalization normalization = Normalization::minmax;
  double percentile_low = 1.0;  // percentile mode: clip to [low, high] percentiles first
  double percentile_high = 99.0;
  Colormap colormap = blue_red_colormap();
  double alpha = 0.5;
  std::size_t scale = 64;  // slide pixels per thumbnail pixel
};

void validate(const HeatmapSpec& spec);

/// Per-slide normalization of raw attention to [0, 1]. Constant input maps to
/// all zeros (with a warning).
std::vector<double> normalize_attention(std::span<const double> attention, const HeatmapSpec& spec);

/// Colormap index of a normalized value: round(v * 255).
std::size_t colormap_index(double normalized);

/// Tints each region's footprint on `thumbnail` by its normalized attention.
/// Pixels outside every region are left untouched.
RgbImage render_heatmap(const RgbImage& thumbnail, const RegionManifest& manifest, std::span<const double> attention,
                        const HeatmapSpec& spec = {});

/// CSV columns: slide_id,x,y,raw,normalized.
std::string attention_csv(const RegionManifest& manifest, std::span<const double> attention,
                          const HeatmapSpec& spec = {});

struct AttentionSummary {
  std::size_t tissue_regions = 0;      // tissue fraction ≥ 0.5
  std::size_t background_regions = 0;  // tissue fraction < 0.5
  std::optional<double> tissue_mean;
  std::optional<double> background_mean;
  std::optional<double> score;  // background_mean - tissue_mean, when both exist
  bool confounded() const noexcept { return score && *score > 0.0; }
};

/// Mean raw attention on background-dominated versus tissue-dominated regions.
/// Tissue fractions come from `mask` when given, else from the manifest.
AttentionSummary attention_summary(const RegionManifest& manifest, std::span<const double> attention,
                                   const preprocess::TissueMask* mask = nullptr);

std::string summary_to_json(const AttentionSummary& summary);

/// Indices of the ceil(fraction * N) highest-attention regions, ascending.
/// Ties go to the lower index.
std::vector<std::size_t> top_fraction_regions(std::span<const double> attention, double fraction = 0.1);

/// |A ∩ B| / |A ∪ B| of two index sets; 1 when both are empty.
double jaccard(std::vector<std::size_t> a, std::vector<std::size_t> b);

}  // namespace slidemil::heatmap
