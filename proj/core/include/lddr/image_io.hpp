#pragma once

#include <string>
#include <string_view>

#include "lddr/tensor.hpp"

namespace lddr {

/// Decodes binary (P5/P6) or ASCII (P2/P3) PGM/PPM, 8- or 16-bit, into a
/// 1- or 3-channel tensor with values scaled to [0, 1].
Tensor decode_pnm(std::string_view bytes);

/// Encodes a 1-channel tensor as P5 or a 3-channel tensor as P6 with maxval 255.
/// Values are clamped to [0, 1] and rounded to the nearest level.
std::string encode_pnm(const Tensor& image);

Tensor load_image(const std::string& path);
void save_image(const Tensor& image, const std::string& path);

}  // namespace lddr
