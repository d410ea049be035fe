#include "lddr/shape.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "lddr/error.hpp"

namespace lddr {

std::vector<double> Shape::flatten() const {
  std::vector<double> out;
  out.reserve(points_.size() * 2);
  for (const auto& p : points_) {
    out.push_back(p.x);
    out.push_back(p.y);
  }
  return out;
}

Shape Shape::unflatten(std::span<const double> xy) {
  if (xy.size() % 2 != 0) throw InputError("shape vector must have even length");
  std::vector<Point> pts(xy.size() / 2);
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {xy[2 * i], xy[2 * i + 1]};
  return Shape(std::move(pts));
}

bool Shape::all_finite() const noexcept {
  return std::all_of(points_.begin(), points_.end(),
                     [](const Point& p) { return std::isfinite(p.x) && std::isfinite(p.y); });
}

Shape mean_shape(std::span<const Shape> shapes) {
  if (shapes.empty()) throw InputError("mean_shape: no shapes");
  const std::size_t n = shapes.front().size();
  std::vector<Point> sum(n);
  for (const auto& s : shapes) {
    if (s.size() != n) {
      throw InputError("mean_shape: mixed landmark counts " + std::to_string(n) + " and " +
                       std::to_string(s.size()));
    }
    for (std::size_t i = 0; i < n; ++i) {
      sum[i].x += s[i].x;
      sum[i].y += s[i].y;
    }
  }
  const double count = static_cast<double>(shapes.size());
  for (auto& p : sum) {
    p.x /= count;
    p.y /= count;
  }
  return Shape(std::move(sum));
}

double mean_point_error(const Shape& a, const Shape& b) {
  if (a.size() != b.size() || a.empty()) {
    throw InputError("mean_point_error: landmark counts differ or are zero");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += std::hypot(a[i].x - b[i].x, a[i].y - b[i].y);
  return total / static_cast<double>(a.size());
}

FaceFrame::FaceFrame(FaceBox box, double canonical_size) : box_(box), size_(canonical_size) {
  if (!(box.w > 0.0) || !(box.h > 0.0)) {
    throw InputError("face box must have positive width and height");
  }
  if (!(canonical_size > 0.0)) throw InputError("canonical size must be positive");
}

Point FaceFrame::to_canonical(Point p) const noexcept {
  return {(p.x - box_.x) * size_ / box_.w, (p.y - box_.y) * size_ / box_.h};
}

Point FaceFrame::from_canonical(Point p) const noexcept {
  return {box_.x + p.x * box_.w / size_, box_.y + p.y * box_.h / size_};
}

Shape FaceFrame::to_canonical(const Shape& s) const {
  std::vector<Point> pts;
  pts.reserve(s.size());
  for (const auto& p : s.points()) pts.push_back(to_canonical(p));
  return Shape(std::move(pts));
}

Shape FaceFrame::from_canonical(const Shape& s) const {
  std::vector<Point> pts;
  pts.reserve(s.size());
  for (const auto& p : s.points()) pts.push_back(from_canonical(p));
  return Shape(std::move(pts));
}

void sample_bilinear(const Tensor& image, double x, double y, double* out) noexcept {
  const int w = image.width();
  const int h = image.height();
  const int c = image.channels();
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  if (fx == 0.0 && fy == 0.0) {
    auto px = image.pixel(y0, x0);
    std::copy(px.begin(), px.end(), out);
    return;
  }
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  auto p00 = image.pixel(y0, x0);
  auto p01 = image.pixel(y0, x1);
  auto p10 = image.pixel(y1, x0);
  auto p11 = image.pixel(y1, x1);
  for (int k = 0; k < c; ++k) {
    const double top = p00[k] + (p01[k] - p00[k]) * fx;
    const double bottom = p10[k] + (p11[k] - p10[k]) * fx;
    out[k] = top + (bottom - top) * fy;
  }
}

Tensor warp_to_canonical(const Tensor& image, const FaceFrame& frame) {
  const int n = static_cast<int>(std::lround(frame.canonical_size()));
  Tensor out(n, n, image.channels());
  for (int v = 0; v < n; ++v) {
    for (int u = 0; u < n; ++u) {
      const Point src = frame.from_canonical({static_cast<double>(u), static_cast<double>(v)});
      sample_bilinear(image, src.x, src.y, out.data().data() + out.offset(v, u));
    }
  }
  return out;
}

Tensor extract_patch(const Tensor& image, Point center, int size) {
  return extract_patch(image, center, size, size);
}

Tensor extract_patch(const Tensor& image, Point center, int size, int output_size) {
  if (size < 1 || output_size < 1) throw InputError("patch size must be positive");
  if (size > static_cast<int>(kCanonicalSize)) {
    throw InputError("patch size " + std::to_string(size) + " exceeds the canonical face size");
  }
  Tensor out(output_size, output_size, image.channels());
  const double x0 = center.x - size / 2;
  const double y0 = center.y - size / 2;
  const double step = static_cast<double>(size) / output_size;
  for (int i = 0; i < output_size; ++i) {
    for (int j = 0; j < output_size; ++j) {
      // Resampled pixels are centred within their source cells.
      const double dx = size == output_size ? j : (j + 0.5) * step - 0.5;
      const double dy = size == output_size ? i : (i + 0.5) * step - 0.5;
      sample_bilinear(image, x0 + dx, y0 + dy, out.data().data() + out.offset(i, j));
    }
  }
  return out;
}

void PatchSchedule::validate() const {
  if (sizes.empty()) throw ConfigError("patch schedule is empty");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 1) throw ConfigError("patch sizes must be positive");
    if (i > 0 && sizes[i] >= sizes[i - 1]) {
      throw ConfigError("patch sizes must be strictly decreasing");
    }
  }
}

int patch_size_for_stage(const PatchSchedule& schedule, int stage) {
  if (stage < 1 || stage > static_cast<int>(schedule.sizes.size())) {
    throw InputError("stage " + std::to_string(stage) + " outside schedule of length " +
                     std::to_string(schedule.sizes.size()));
  }
  return schedule.sizes[static_cast<std::size_t>(stage - 1)];
}

ShapeIndexedFeature assemble_features(std::span<const Descriptor> descriptors,
                                      std::size_t landmarks) {
  if (descriptors.size() != landmarks) {
    throw InputError("assemble_features: expected " + std::to_string(landmarks) +
                     " descriptors, got " + std::to_string(descriptors.size()));
  }
  ShapeIndexedFeature f;
  f.values.reserve(landmarks * kDescriptorSize);
  for (std::size_t l = 0; l < descriptors.size(); ++l) {
    const auto& d = descriptors[l].values;
    if (d.size() != static_cast<std::size_t>(kDescriptorSize)) {
      throw InputError("descriptor " + std::to_string(l) + " has " + std::to_string(d.size()) +
                       " values");
    }
    f.values.insert(f.values.end(), d.begin(), d.end());
  }
  return f;
}

std::vector<int> flip_index_map(int landmarks) {
  if (landmarks != kLandmarks68) {
    throw ConfigError("no flip correspondence registered for " + std::to_string(landmarks) +
                      " landmarks");
  }
  // 1-based mirror pairs of the 68-point markup; unlisted indices are fixed.
  static constexpr std::array<std::array<int, 2>, 29> kPairs{{
      {1, 17}, {2, 16}, {3, 15}, {4, 14}, {5, 13}, {6, 12}, {7, 11}, {8, 10},  // jaw
      {18, 27}, {19, 26}, {20, 25}, {21, 24}, {22, 23},                        // brows
      {32, 36}, {33, 35},                                                      // nostrils
      {37, 46}, {38, 45}, {39, 44}, {40, 43}, {41, 48}, {42, 47},              // eyes
      {49, 55}, {50, 54}, {51, 53}, {56, 60}, {57, 59},                        // outer lip
      {61, 65}, {62, 64}, {66, 68},                                            // inner lip
  }};
  std::vector<int> map(kLandmarks68);
  for (int i = 0; i < kLandmarks68; ++i) map[i] = i;
  for (const auto& [a, b] : kPairs) {
    map[a - 1] = b - 1;
    map[b - 1] = a - 1;
  }
  return map;
}

}  // namespace lddr
