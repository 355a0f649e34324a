#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace slidemil {

/// Writes `bytes` to a sibling temp file and renames it over `path`, so an
/// interrupted write never leaves a partial file under the final name.
void write_file_atomic(const std::filesystem::path& path, std::span<const unsigned char> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Splits one CSV line on commas. Quoting is not supported; ids must not
/// contain commas.
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace slidemil
