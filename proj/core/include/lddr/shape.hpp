#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lddr/engine.hpp"
#include "lddr/tensor.hpp"

namespace lddr {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

/// Ordered landmark coordinates.
class Shape {
 public:
  Shape() = default;
  explicit Shape(std::vector<Point> points) : points_(std::move(points)) {}

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  Point& operator[](std::size_t i) noexcept { return points_[i]; }
  const Point& operator[](std::size_t i) const noexcept { return points_[i]; }
  std::span<const Point> points() const noexcept { return points_; }
  std::vector<Point>& points() noexcept { return points_; }

  /// Interleaved x0, y0, x1, y1, ...
  std::vector<double> flatten() const;
  static Shape unflatten(std::span<const double> xy);

  bool all_finite() const noexcept;

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  std::vector<Point> points_;
};

inline constexpr int kLandmarks68 = 68;
inline constexpr double kCanonicalSize = 224.0;

/// Coordinate-wise mean. Throws InputError when empty or landmark counts differ.
Shape mean_shape(std::span<const Shape> shapes);

/// Mean Euclidean distance between corresponding points.
double mean_point_error(const Shape& a, const Shape& b);

struct FaceBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  friend bool operator==(const FaceBox&, const FaceBox&) = default;
};

/// Axis-aligned map from a face box in image pixels to the canonical square.
class FaceFrame {
 public:
  explicit FaceFrame(FaceBox box, double canonical_size = kCanonicalSize);

  const FaceBox& box() const noexcept { return box_; }
  double canonical_size() const noexcept { return size_; }

  Point to_canonical(Point p) const noexcept;
  Point from_canonical(Point p) const noexcept;
  Shape to_canonical(const Shape& s) const;
  Shape from_canonical(const Shape& s) const;

 private:
  FaceBox box_;
  double size_;
};

/// Bilinear sample at (x, y) with edge replication; writes `image.channels()` values.
void sample_bilinear(const Tensor& image, double x, double y, double* out) noexcept;

/// Resamples the face box region of `image` onto a canonical_size^2 grid.
Tensor warp_to_canonical(const Tensor& image, const FaceFrame& frame);

/// size x size window whose top-left corner is center - floor(size / 2),
/// bilinearly sampled with edge replication outside the image.
Tensor extract_patch(const Tensor& image, Point center, int size);

/// Extracts a `size` window and resamples it to `output_size` pixels square.
Tensor extract_patch(const Tensor& image, Point center, int size, int output_size);

struct PatchSchedule {
  std::vector<int> sizes{92, 68, 42, 21};

  /// Strictly decreasing positive sizes; throws ConfigError otherwise.
  void validate() const;

  friend bool operator==(const PatchSchedule&, const PatchSchedule&) = default;
};

/// Relative patch extents the default sizes approximate on a 224 face.
inline constexpr double kPatchRatios[4] = {0.4, 0.3, 0.2, 0.1};

/// `stage` is 1-based. Throws InputError when out of range.
int patch_size_for_stage(const PatchSchedule& schedule, int stage);

/// Landmark-major concatenation of exactly `landmarks` descriptors.
struct ShapeIndexedFeature {
  std::vector<double> values;
};

ShapeIndexedFeature assemble_features(std::span<const Descriptor> descriptors,
                                      std::size_t landmarks);

/// 0-based left/right correspondence used when mirroring a shape.
/// Only the 68-point markup is registered; other counts throw ConfigError.
std::vector<int> flip_index_map(int landmarks);

}  // namespace lddr
