#include "lddr/augment.hpp"

#include <cmath>
#include <numbers>

#include "lddr/error.hpp"

namespace lddr {

CanonicalSample flip_sample(const CanonicalSample& sample) {
  const Tensor& src = sample.image;
  Tensor image(src.height(), src.width(), src.channels());
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      auto px = src.pixel(y, src.width() - 1 - x);
      std::copy(px.begin(), px.end(), image.data().begin() + image.offset(y, x));
    }
  }
  const auto map = flip_index_map(static_cast<int>(sample.shape.size()));
  const double axis = src.width() - 1;
  std::vector<Point> pts(sample.shape.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Point& p = sample.shape[static_cast<std::size_t>(map[i])];
    pts[i] = {axis - p.x, p.y};
  }
  return {std::move(image), Shape(std::move(pts))};
}

Shape rotate_shape(const Shape& shape, double degrees, Point center) {
  if (degrees == 0.0) return shape;
  const double t = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(t);
  const double s = std::sin(t);
  std::vector<Point> pts;
  pts.reserve(shape.size());
  for (const auto& p : shape.points()) {
    const double dx = p.x - center.x;
    const double dy = p.y - center.y;
    pts.push_back({center.x + c * dx - s * dy, center.y + s * dx + c * dy});
  }
  return Shape(std::move(pts));
}

Tensor rotate_image(const Tensor& image, double degrees, Point center) {
  if (degrees == 0.0) return image;
  const double t = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(t);
  const double s = std::sin(t);
  Tensor out(image.height(), image.width(), image.channels());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const double dx = x - center.x;
      const double dy = y - center.y;
      // Inverse rotation maps output pixels back into the source.
      const double sx = center.x + c * dx + s * dy;
      const double sy = center.y - s * dx + c * dy;
      sample_bilinear(image, sx, sy, out.data().data() + out.offset(y, x));
    }
  }
  return out;
}

Point image_center(const Tensor& image) noexcept {
  return {(image.width() - 1) / 2.0, (image.height() - 1) / 2.0};
}

std::vector<CanonicalSample> augment(const CanonicalSample& sample, std::uint64_t seed,
                                     const AugmentConfig& config) {
  if (config.rotations < 0) throw ConfigError("augment: rotation count must be >= 0");
  if (!(config.max_rotation_deg >= 0.0)) throw ConfigError("augment: max rotation must be >= 0");
  std::vector<CanonicalSample> out;
  out.push_back(sample);
  if (config.flip) out.push_back(flip_sample(sample));
  Rng rng(seed);
  const Point center = image_center(sample.image);
  for (int j = 0; j < config.rotations; ++j) {
    const CanonicalSample& src = (config.flip && j % 2 == 1) ? out[1] : out[0];
    const double angle = rng.uniform(-config.max_rotation_deg, config.max_rotation_deg);
    out.push_back({rotate_image(src.image, angle, center), rotate_shape(src.shape, angle, center)});
  }
  return out;
}

Shape perturb_shape(const Shape& shape, Rng& rng, const PerturbConfig& config) {
  if (shape.empty()) return shape;
  Point centroid;
  for (const auto& p : shape.points()) {
    centroid.x += p.x;
    centroid.y += p.y;
  }
  centroid.x /= static_cast<double>(shape.size());
  centroid.y /= static_cast<double>(shape.size());
  const double scale = rng.uniform(config.min_scale, config.max_scale);
  const double radius = config.max_translation * std::sqrt(rng.uniform());
  const double angle = 2.0 * std::numbers::pi * rng.uniform();
  const double tx = radius * std::cos(angle);
  const double ty = radius * std::sin(angle);
  std::vector<Point> pts;
  pts.reserve(shape.size());
  for (const auto& p : shape.points()) {
    pts.push_back({centroid.x + scale * (p.x - centroid.x) + tx,
                   centroid.y + scale * (p.y - centroid.y) + ty});
  }
  return Shape(std::move(pts));
}

}  // namespace lddr
