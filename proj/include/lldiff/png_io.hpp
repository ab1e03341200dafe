#pragma once

#include <string>

#include "lldiff/image.hpp"

namespace lldiff {

// Reads an 8- or 16-bit PNG (gray, gray+alpha, RGB or RGBA; alpha dropped,
// gray expanded) and tags it srgb. Linearization is always explicit.
Image load_png(const std::string& path);

// Writes RGB PNG; bit_depth 8 or 16. Values are quantized with
// round-to-nearest from the [0,1] float image. Writes are deterministic
// (no timestamp chunks).
void save_png(const Image& img, const std::string& path, int bit_depth = 8);

}  // namespace lldiff
