#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lddr/shape.hpp"

namespace lddr {

/// One manifest entry with paths resolved against the manifest's directory.
struct Sample {
  std::string id;  // image file stem
  std::string image_path;
  std::string pts_path;  // empty for predict-only entries
  FaceBox box;
  std::optional<Shape> shape;
};

/// Reads `image<TAB>pts<TAB>x<TAB>y<TAB>w<TAB>h` lines. Blank lines and lines
/// starting with '#' are skipped; a pts field of "-" marks a predict-only entry.
/// Every referenced file must exist and annotations must share one landmark count.
std::vector<Sample> load_manifest(const std::string& path);

struct ManifestEntry {
  std::string image_path;
  std::string pts_path;  // "-" or empty when unannotated
  FaceBox box;
};

std::string format_manifest(std::span<const ManifestEntry> entries);

/// Intersects `box` with the image rectangle [0, width) x [0, height).
FaceBox clip_box(const FaceBox& box, int width, int height);

}  // namespace lddr
