#pragma once

#include <filesystem>

#include "graindeck/image.hpp"

namespace graindeck {

/// Decodes a PNG/JPEG file into RGB. Throws DataError naming the file when
/// it cannot be decoded.
Image read_image(const std::filesystem::path& path);

/// Reads an 8-bit grayscale image (colour files are converted) without
/// binarizing.
Mask read_gray(const std::filesystem::path& path);

/// Writes an RGB image as PNG. The file appears atomically.
void write_png(const std::filesystem::path& path, const Image& image);

/// Writes a single-channel map as 8-bit grayscale PNG, scaling 0/1 masks to
/// 0/255 when `binary` is set.
void write_png(const std::filesystem::path& path, const Mask& mask, bool binary = true);

}  // namespace graindeck
