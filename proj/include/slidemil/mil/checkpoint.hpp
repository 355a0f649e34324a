#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "slidemil/mil/model.hpp"

namespace slidemil::mil {

/// Checkpoint layout (little-endian):
///   "MILCKPT" | u32 version=1 | u64 D | u64 L | u8 has_instance_classifier
///   then each tensor of MilModelParams::tensors() as u64 rows, u64 cols,
///   rows·cols f64 row-major.
std::vector<unsigned char> encode_checkpoint(const MilModelParams& params);
MilModelParams decode_checkpoint(std::span<const unsigned char> bytes);

void write_checkpoint(const std::filesystem::path& path, const MilModelParams& params);
MilModelParams read_checkpoint(const std::filesystem::path& path);

}  // namespace slidemil::mil
