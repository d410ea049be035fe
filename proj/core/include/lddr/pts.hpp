#pragma once

#include <string>
#include <string_view>

#include "lddr/shape.hpp"

namespace lddr {

/// Parses the landmark annotation format
///   version: 1
///   n_points: 68
///   {
///   x y
///   ...
///   }
/// Coordinates are kept as written. Throws ParseError carrying the line number.
Shape parse_pts(std::string_view text);

/// Inverse of parse_pts; coordinates use shortest round-trip formatting.
std::string serialize_pts(const Shape& shape);

Shape read_pts(const std::string& path);
void write_pts(const Shape& shape, const std::string& path);

}  // namespace lddr
