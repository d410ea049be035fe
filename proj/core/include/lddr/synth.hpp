#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lddr/manifest.hpp"
#include "lddr/shape.hpp"
#include "lddr/tensor.hpp"

namespace lddr {

/// Parameters of the procedural face generator. Every sample is a pure
/// function of (spec, index).
struct SynthSpec {
  std::uint64_t seed = 0;
  int count = 1;
  int image_size = 160;
  double min_scale = 0.85;
  double max_scale = 1.15;
  double max_rotation_deg = 12.0;
  double max_shift = 0.06;   // fraction of image size
  double expression = 1.0;   // multiplier on the expression ranges
  double box_jitter = 0.05;  // fraction of box size
  double noise = 0.02;       // per-pixel Gaussian noise stddev

  /// Throws InputError for count < 1 or non-finite / inverted ranges.
  void validate() const;
};

struct SynthFace {
  Tensor image;  // 3 channels
  Shape shape;   // 68 points, image coordinates
  FaceBox box;
};

/// The 68-point template in face-local units (half face width = 1, y down).
Shape synth_template();

SynthFace synth_face(const SynthSpec& spec, std::size_t index);

struct SynthOutput {
  std::string manifest_path;
  std::vector<ManifestEntry> entries;  // paths relative to the output directory
};

/// Writes images/face_NNNNN.ppm, annotations/face_NNNNN.pts and manifest.tsv
/// under `out_dir`. Byte-identical for identical specs.
SynthOutput synth_generate(const SynthSpec& spec, const std::string& out_dir, int threads = 1);

}  // namespace lddr
