#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slidemil/common/error.hpp"
#include "slidemil/nn/matrix.hpp"

namespace slidemil::bagio {

/// Binary outcome. Numeric value is the model's class index.
enum class Label : std::uint8_t { invalid = 0, effective = 1 };

std::string to_string(Label label);
/// Accepts "effective"/"invalid" or "1"/"0".
Label parse_label(const std::string& text);

struct RegionCoord {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t region_size = 4096;
  friend bool operator==(const RegionCoord&, const RegionCoord&) = default;
};

/// One slide: N region embeddings of dimension D plus their coordinates.
struct FeatureBag {
  std::string slide_id;
  std::string patient_id;
  std::optional<Label> label;
  nn::Matrix features;  // N×D
  std::vector<RegionCoord> coords;

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }
  friend bool operator==(const FeatureBag&, const FeatureBag&) = default;
};

void validate(const FeatureBag& bag);

enum class BagErrorCode { bad_magic, version_mismatch, truncated, size_overflow, malformed };

class BagIoError : public InputError {
 public:
  BagIoError(BagErrorCode code, const std::string& msg) : InputError(msg), code_(code) {}
  BagErrorCode code() const noexcept { return code_; }

 private:
  BagErrorCode code_;
};

/// .fbag layout, little-endian:
///   "FBAG" + version digit '1'
///   u32 len + slide_id bytes, u32 len + patient_id bytes
///   u8 label (0 invalid, 1 effective, 255 unlabeled)
///   u64 N, u64 D
///   N × (i64 x, i64 y, i64 region_size)
///   N×D f32 features, row-major
/// Features are widened to double on read; values that are exactly
/// representable in f32 survive a round trip bit-for-bit.
std::vector<unsigned char> encode_bag(const FeatureBag& bag);
FeatureBag decode_bag(std::span<const unsigned char> bytes);

void write_bag(const std::filesystem::path& path, const FeatureBag& bag);
FeatureBag read_bag(const std::filesystem::path& path);

/// Imports region rows from CSV with header
///   slide_id,patient_id,label,x,y,<D feature columns>
/// Rows are grouped into bags by slide_id in order of first appearance.
/// An empty label field means unlabeled.
std::vector<FeatureBag> import_csv(const std::string& text, std::int64_t region_size = 4096);

}  // namespace slidemil::bagio
