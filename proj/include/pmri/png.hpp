#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pmri/types.hpp"

namespace pmri {

/// Linear window [0, max] to 0..255, clipped. No gamma.
std::vector<std::uint8_t> window_gray8(const RealImage& image, double max);

/// 8-bit grayscale PNG (filter 0 on every row).
std::string encode_png_gray8(const std::vector<std::uint8_t>& pixels, int width, int height);

}  // namespace pmri
