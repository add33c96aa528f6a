#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace graindeck {

/// Writes `contents` to a sibling temp file and renames it over `path`.
/// Parent directories are created as needed.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Reads a whole file; throws DataError when it cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Formats with 6 significant digits and parses back, so that JSON output
/// carries at most 6 significant digits.
double round_sig6(double value);

}  // namespace graindeck
