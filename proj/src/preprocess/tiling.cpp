#include "slidemil/preprocess/tiling.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "slidemil/common/error.hpp"
#include "slidemil/common/files.hpp"
#include "slidemil/common/log.hpp"

namespace slidemil::preprocess {

double region_tissue_fraction(const TissueMask& mask, std::int64_t x, std::int64_t y, std::int64_t size) {
  if (size <= 0) throw ValidationError("must be >= 1", "region_size");
  const auto ds = static_cast<std::int64_t>(mask.downsample);
  const std::int64_t mx0 = x / ds, my0 = y / ds;
  const std::int64_t mx1 = (x + size + ds - 1) / ds, my1 = (y + size + ds - 1) / ds;
  const std::int64_t cx1 = std::min<std::int64_t>(mx1, static_cast<std::int64_t>(mask.width));
  const std::int64_t cy1 = std::min<std::int64_t>(my1, static_cast<std::int64_t>(mask.height));
  std::uint64_t tissue = 0;
  for (std::int64_t my = my0; my < cy1; ++my)
    for (std::int64_t mx = mx0; mx < cx1; ++mx) tissue += mask.at(mx, my);
  const double area = static_cast<double>((mx1 - mx0) * (my1 - my0));
  return static_cast<double>(tissue) / area;
}

RegionManifest tile_regions(const TissueMask& mask, const TileOptions& options, std::string slide_id) {
  if (options.region_size < 1) throw ValidationError("must be >= 1", "region_size");
  if (!(options.min_tissue_fraction >= 0.0 && options.min_tissue_fraction <= 1.0))
    throw ValidationError("must lie in [0, 1]", "min_tissue_fraction");

  RegionManifest m;
  m.slide_id = std::move(slide_id);
  m.region_size = options.region_size;
  m.min_tissue_fraction = options.min_tissue_fraction;

  const auto w = static_cast<std::int64_t>(mask.source_width);
  const auto h = static_cast<std::int64_t>(mask.source_height);
  const std::int64_t cols = w / options.region_size;
  const std::int64_t rows = h / options.region_size;
  if (cols == 0 || rows == 0) {
    if (options.pad_small && options.region_size > w && options.region_size > h) {
      const double f = region_tissue_fraction(mask, 0, 0, options.region_size);
      if (f >= options.min_tissue_fraction) m.entries.push_back({0, 0, f});
      return m;
    }
    log::warn("slide '" + m.slide_id + "' (" + std::to_string(w) + "x" + std::to_string(h) +
              ") holds no full " + std::to_string(options.region_size) + "px region; manifest is empty");
    return m;
  }
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < cols; ++c) {
      const std::int64_t x = c * options.region_size, y = r * options.region_size;
      const double f = region_tissue_fraction(mask, x, y, options.region_size);
      if (f >= options.min_tissue_fraction) m.entries.push_back({x, y, f});
    }
  }
  return m;
}

RgbImage pad_to_single_region(const RgbImage& img, std::size_t region_size) {
  if (img.width() > region_size || img.height() > region_size)
    throw ValidationError("image exceeds the region size; tile it instead", "region_size");
  RgbImage out(region_size, region_size, kWhite);
  const std::size_t ox = (region_size - img.width()) / 2;
  const std::size_t oy = (region_size - img.height()) / 2;
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x) out.set(ox + x, oy + y, img.at(x, y));
  return out;
}

RgbImage make_thumbnail(const RgbImage& img, std::size_t divisor) { return downsample(img, divisor); }

std::string manifest_to_csv(const RegionManifest& manifest) {
  std::ostringstream out;
  out << "slide_id,x,y,region_size,tissue_fraction\n";
  for (const auto& e : manifest.entries)
    out << manifest.slide_id << ',' << e.x << ',' << e.y << ',' << manifest.region_size << ','
        << format_double(e.tissue_fraction) << '\n';
  return out.str();
}

namespace {

template <typename T>
T parse_number(const std::string& s, const char* what) {
  T v{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw InputError(std::string("bad ") + what + " value '" + s + "'");
  return v;
}

}  // namespace

RegionManifest manifest_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) !=
                                     std::vector<std::string>{"slide_id", "x", "y", "region_size", "tissue_fraction"})
    throw InputError("region manifest: unexpected header");
  RegionManifest m;
  m.min_tissue_fraction = 0.0;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto f = split_csv_line(line);
    if (f.size() != 5) throw InputError("region manifest: expected 5 columns");
    const auto size = parse_number<std::int64_t>(f[3], "region_size");
    if (first) {
      m.slide_id = f[0];
      m.region_size = size;
      first = false;
    } else if (f[0] != m.slide_id || size != m.region_size) {
      throw InputError("region manifest mixes slides or region sizes");
    }
    m.entries.push_back({parse_number<std::int64_t>(f[1], "x"), parse_number<std::int64_t>(f[2], "y"),
                         parse_number<double>(f[4], "tissue_fraction")});
  }
  if (!m.entries.empty()) {
    m.min_tissue_fraction = m.entries.front().tissue_fraction;
    for (const auto& e : m.entries) m.min_tissue_fraction = std::min(m.min_tissue_fraction, e.tissue_fraction);
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const RegionManifest& manifest) {
  write_text_atomic(path, manifest_to_csv(manifest));
}

RegionManifest read_manifest(const std::filesystem::path& path) { return manifest_from_csv(read_text(path)); }

}  // namespace slidemil::preprocess
