#pragma once

#include <cstdint>
#include <vector>

#include "lddr/rng.hpp"
#include "lddr/shape.hpp"
#include "lddr/tensor.hpp"

namespace lddr {

/// A face already warped into the canonical frame, with its landmarks.
struct CanonicalSample {
  Tensor image;
  Shape shape;
};

/// Horizontal mirror x -> (width - 1) - x with left/right landmark reindexing.
CanonicalSample flip_sample(const CanonicalSample& sample);

/// Rotation by `degrees` (counter-clockwise in image coordinates) about `center`.
Shape rotate_shape(const Shape& shape, double degrees, Point center);
/// Inverse-mapped bilinear rotation with edge replication.
Tensor rotate_image(const Tensor& image, double degrees, Point center);

/// Geometric centre of an image's pixel grid.
Point image_center(const Tensor& image) noexcept;

struct AugmentConfig {
  bool flip = true;
  int rotations = 1;  // rotated copies, alternating between original and mirrored sources
  double max_rotation_deg = 15.0;

  friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;
};

/// Returns {original, mirrored, rotated copies...}. Rotated copy j is drawn from the
/// original when j is even and from the mirror when j is odd, with a uniform angle in
/// [-max_rotation_deg, max_rotation_deg]. Deterministic in `seed`.
std::vector<CanonicalSample> augment(const CanonicalSample& sample, std::uint64_t seed,
                                     const AugmentConfig& config = {});

struct PerturbConfig {
  double min_scale = 0.9;
  double max_scale = 1.1;
  double max_translation = 0.05 * kCanonicalSize;

  friend bool operator==(const PerturbConfig&, const PerturbConfig&) = default;
};

/// Random similarity about the shape's centroid: uniform scale, uniform translation
/// in a disc of radius max_translation.
Shape perturb_shape(const Shape& shape, Rng& rng, const PerturbConfig& config = {});

}  // namespace lddr
