#pragma once

#include <string>

#include "swinforge/colorframe.hpp"

namespace swinforge {

// Decodes a PNG into 8-bit RGB. Palette and grayscale images are expanded,
// 16-bit channels reduced, alpha stripped.
RgbImage read_png_rgb8(const std::string& path);

void write_png_rgb8(const std::string& path, const RgbImage& img);

}  // namespace swinforge
