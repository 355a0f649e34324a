#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "slidemil/preprocess/image.hpp"
#include "slidemil/preprocess/segment.hpp"

namespace slidemil::preprocess {

struct RegionEntry {
  std::int64_t x = 0;
  std::int64_t y = 0;
  double tissue_fraction = 0.0;
  friend bool operator==(const RegionEntry&, const RegionEntry&) = default;
};

struct RegionManifest {
  std::string slide_id;
  std::int64_t region_size = 4096;
  double min_tissue_fraction = 0.15;
  std::vector<RegionEntry> entries;
  friend bool operator==(const RegionManifest&, const RegionManifest&) = default;
};

struct TileOptions {
  std::int64_t region_size = 4096;
  double min_tissue_fraction = 0.15;
  /// When the region is larger than the slide in both dimensions, emit one
  /// region at (0,0) as if the slide were padded with background.
  bool pad_small = false;
};

/// Tissue fraction of the square [x, x+size) × [y, y+size) in slide pixels,
/// measured on the mask raster. Pixels outside the slide count as background.
double region_tissue_fraction(const TissueMask& mask, std::int64_t x, std::int64_t y, std::int64_t size);

/// Grid anchored at (0,0); only full tiles; row-major order; a tile is kept iff
/// its tissue fraction ≥ min_tissue_fraction.
RegionManifest tile_regions(const TissueMask& mask, const TileOptions& options, std::string slide_id = {});

/// Centres `img` on a white region_size² canvas (the small-image / TMA path).
RgbImage pad_to_single_region(const RgbImage& img, std::size_t region_size);

/// Box-downsampled thumbnail at 1/`divisor` scale.
RgbImage make_thumbnail(const RgbImage& img, std::size_t divisor = 64);

/// CSV columns: slide_id,x,y,region_size,tissue_fraction.
std::string manifest_to_csv(const RegionManifest& manifest);
RegionManifest manifest_from_csv(const std::string& text);
void write_manifest(const std::filesystem::path& path, const RegionManifest& manifest);
RegionManifest read_manifest(const std::filesystem::path& path);

}  // namespace slidemil::preprocess
