#include "lddr/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "binary_io.hpp"
#include "lddr/error.hpp"
#include "lddr/image_io.hpp"
#include "lddr/parallel.hpp"
#include "lddr/pts.hpp"
#include "lddr/rng.hpp"

namespace lddr {

namespace fs = std::filesystem;

void SynthSpec::validate() const {
  if (count < 1) throw InputError("synth: count must be >= 1");
  if (image_size < 32) throw InputError("synth: image size must be >= 32");
  for (double v : {min_scale, max_scale, max_rotation_deg, max_shift, expression, box_jitter, noise}) {
    if (!std::isfinite(v) || v < 0.0) throw InputError("synth: ranges must be finite and >= 0");
  }
  if (!(min_scale > 0.0) || max_scale < min_scale) throw InputError("synth: bad scale range");
  if (max_scale > 1.3 || max_shift > 0.08 || max_rotation_deg > 20.0) {
    throw InputError("synth: geometry ranges would push landmarks out of the image");
  }
}

Shape synth_template() {
  std::vector<Point> p(68);
  // Jaw 1..17: lower half-ellipse from ear level through the chin.
  for (int i = 0; i < 17; ++i) {
    const double phi = std::numbers::pi - i * std::numbers::pi / 16.0;
    p[i] = {std::cos(phi), -0.25 + 1.35 * std::sin(phi)};
  }
  // Brows 18..22 (outer to inner) and mirrored 23..27 (inner to outer).
  for (int k = 0; k < 5; ++k) {
    const double x = -0.8 + 0.15 * k;
    const double y = -0.55 - 0.12 * std::sin(std::numbers::pi * (k + 0.5) / 5.0);
    p[17 + k] = {x, y};
    p[26 - k] = {-x, y};
  }
  // Nose bridge 28..31 and nostrils 32..36.
  for (int k = 0; k < 4; ++k) p[27 + k] = {0.0, -0.35 + k * (0.5 / 3.0)};
  p[31] = {-0.22, 0.28};
  p[32] = {-0.11, 0.30};
  p[33] = {0.0, 0.31};
  p[34] = {0.11, 0.30};
  p[35] = {0.22, 0.28};
  // Eyes 37..42 and 43..48.
  const std::array<Point, 6> eye{{{-0.59, -0.30},
                                  {-0.48, -0.36},
                                  {-0.36, -0.36},
                                  {-0.25, -0.30},
                                  {-0.36, -0.24},
                                  {-0.48, -0.24}}};
  for (int k = 0; k < 6; ++k) p[36 + k] = eye[k];
  p[42] = {0.25, -0.30};
  p[43] = {0.36, -0.36};
  p[44] = {0.48, -0.36};
  p[45] = {0.59, -0.30};
  p[46] = {0.48, -0.24};
  p[47] = {0.36, -0.24};
  // Outer lip 49..60.
  const std::array<Point, 12> lip{{{-0.40, 0.62},
                                   {-0.26, 0.55},
                                   {-0.10, 0.52},
                                   {0.00, 0.54},
                                   {0.10, 0.52},
                                   {0.26, 0.55},
                                   {0.40, 0.62},
                                   {0.27, 0.72},
                                   {0.12, 0.77},
                                   {0.00, 0.78},
                                   {-0.12, 0.77},
                                   {-0.27, 0.72}}};
  for (int k = 0; k < 12; ++k) p[48 + k] = lip[k];
  // Inner lip 61..68.
  const std::array<Point, 8> inner{{{-0.32, 0.62},
                                    {-0.12, 0.59},
                                    {0.00, 0.60},
                                    {0.12, 0.59},
                                    {0.32, 0.62},
                                    {0.12, 0.65},
                                    {0.00, 0.66},
                                    {-0.12, 0.65}}};
  for (int k = 0; k < 8; ++k) p[60 + k] = inner[k];
  return Shape(std::move(p));
}

namespace {

struct Rgb {
  double r, g, b;
};

Rgb scaled(Rgb c, double f) { return {c.r * f, c.g * f, c.b * f}; }

bool inside(std::span<const Point> poly, double x, double y) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point& a = poly[i];
    const Point& b = poly[j];
    if ((a.y > y) != (b.y > y) && x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x) in = !in;
  }
  return in;
}

double segment_distance(Point a, Point b, double x, double y) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((x - a.x) * dx + (y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(x - (a.x + t * dx), y - (a.y + t * dy));
}

double polyline_distance(std::span<const Point> pts, double x, double y, bool closed) {
  double best = 1e300;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    best = std::min(best, segment_distance(pts[i], pts[i + 1], x, y));
  }
  if (closed && pts.size() > 2) best = std::min(best, segment_distance(pts.back(), pts.front(), x, y));
  return best;
}

std::vector<Point> range(const Shape& s, int first, int last) {
  return {s.points().begin() + first, s.points().begin() + last + 1};
}

// Face-local landmark layout after expression deformation.
struct FaceLayout {
  Shape local;
  std::vector<Point> head, brow_l, brow_r, eye_l, eye_r, bridge, nostrils, outer_lip, inner_lip;
  Point eye_l_center, eye_r_center;
  double eye_open = 1.0;
};

FaceLayout layout(Rng& rng, double expression) {
  Shape s = synth_template();
  auto& p = s.points();
  const double mouth_open = expression * rng.uniform(0.0, 0.12);
  const double smile = expression * rng.uniform(-0.06, 0.06);
  const double brow_raise = expression * rng.uniform(-0.05, 0.08);
  const double eye_open = 1.0 + expression * rng.uniform(-0.4, 0.3);
  const double jaw_width = 1.0 + expression * rng.uniform(-0.08, 0.08);
  const double chin_drop = expression * rng.uniform(-0.06, 0.06);
  const double nose_len = expression * rng.uniform(-0.04, 0.04);

  for (int i = 0; i < 17; ++i) {
    p[i].x *= jaw_width;
    if (p[i].y > 0.0) p[i].y += chin_drop * p[i].y + mouth_open * 0.5 * std::max(0.0, p[i].y - 0.4);
  }
  for (int i = 17; i < 27; ++i) p[i].y -= brow_raise;
  for (int i = 28; i < 36; ++i) p[i].y += nose_len * (i >= 31 ? 1.0 : (i - 27) / 4.0);
  for (int e = 0; e < 2; ++e) {
    Point c;
    for (int k = 0; k < 6; ++k) {
      c.x += p[36 + 6 * e + k].x / 6.0;
      c.y += p[36 + 6 * e + k].y / 6.0;
    }
    for (int k = 0; k < 6; ++k) p[36 + 6 * e + k].y = c.y + (p[36 + 6 * e + k].y - c.y) * eye_open;
  }
  for (int i : {48, 54, 60, 64}) p[i].y -= smile;
  for (int i : {49, 53, 61, 63}) p[i].y -= 0.5 * smile;
  for (int i = 55; i < 60; ++i) p[i].y += mouth_open;
  for (int i = 65; i < 68; ++i) p[i].y += mouth_open;

  FaceLayout f;
  f.local = s;
  f.eye_open = eye_open;
  f.head = range(s, 0, 16);
  for (int k = 0; k <= 16; ++k) {
    const double phi = k * std::numbers::pi / 16.0;
    f.head.push_back({jaw_width * std::cos(phi), -0.25 - 1.05 * std::sin(phi)});
  }
  f.brow_l = range(s, 17, 21);
  f.brow_r = range(s, 22, 26);
  f.bridge = range(s, 27, 30);
  f.nostrils = range(s, 31, 35);
  f.eye_l = range(s, 36, 41);
  f.eye_r = range(s, 42, 47);
  f.outer_lip = range(s, 48, 59);
  f.inner_lip = range(s, 60, 67);
  for (int k = 0; k < 6; ++k) {
    f.eye_l_center.x += f.eye_l[k].x / 6.0;
    f.eye_l_center.y += f.eye_l[k].y / 6.0;
    f.eye_r_center.x += f.eye_r[k].x / 6.0;
    f.eye_r_center.y += f.eye_r[k].y / 6.0;
  }
  return f;
}

Rgb shade(const FaceLayout& f, double u, double v, Rgb skin, Rgb background) {
  if (!inside(f.head, u, v)) return background;
  Rgb c = scaled(skin, 1.0 - 0.12 * (u * u) - 0.05 * std::max(0.0, v));
  if (polyline_distance(f.local.points().subspan(0, 17), u, v, false) < 0.03) c = scaled(c, 0.8);
  if (polyline_distance(f.brow_l, u, v, false) < 0.045 ||
      polyline_distance(f.brow_r, u, v, false) < 0.045) {
    return {0.25, 0.17, 0.11};
  }
  for (const auto* eye : {&f.eye_l, &f.eye_r}) {
    const Point& centre = eye == &f.eye_l ? f.eye_l_center : f.eye_r_center;
    if (polyline_distance(*eye, u, v, true) < 0.014) return {0.12, 0.08, 0.07};
    if (inside(*eye, u, v)) {
      const double r = std::hypot(u - centre.x, v - centre.y);
      if (r < 0.03) return {0.03, 0.03, 0.04};
      if (r < 0.065) return {0.22, 0.32, 0.38};
      return {0.93, 0.92, 0.88};
    }
  }
  if (inside(f.inner_lip, u, v)) return {0.22, 0.06, 0.07};
  if (inside(f.outer_lip, u, v)) return {0.72, 0.30, 0.30};
  if (polyline_distance(f.nostrils, u, v, false) < 0.025) return scaled(c, 0.5);
  if (polyline_distance(f.bridge, u, v, false) < 0.02) return scaled(c, 0.82);
  if (u > 0.0 && u < 0.12 && v > -0.2 && v < 0.28 && u < 0.12 * (v + 0.2) / 0.48) {
    return scaled(c, 0.9);
  }
  return c;
}

}  // namespace

SynthFace synth_face(const SynthSpec& spec, std::size_t index) {
  spec.validate();
  Rng rng = Rng::derive(spec.seed, index);
  const int size = spec.image_size;
  const double scale = rng.uniform(spec.min_scale, spec.max_scale);
  const double theta = rng.uniform(-spec.max_rotation_deg, spec.max_rotation_deg) *
                       std::numbers::pi / 180.0;
  const double tx = rng.uniform(-spec.max_shift, spec.max_shift) * size;
  const double ty = rng.uniform(-spec.max_shift, spec.max_shift) * size;
  const double half_width = 0.27 * size * scale;
  const double cx = size / 2.0 + tx;
  const double cy = size / 2.0 - 0.06 * size + ty;
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  const FaceLayout face = layout(rng, spec.expression);

  const double tone = rng.uniform(0.75, 1.05);
  const Rgb skin{0.86 * tone, 0.66 * tone, 0.52 * tone};
  const double bg_level = rng.uniform(0.15, 0.55);
  const double bg_slope = rng.uniform(-0.2, 0.2);

  SynthFace out;
  std::vector<Point> pts;
  for (const auto& q : face.local.points()) {
    pts.push_back({cx + half_width * (ct * q.x - st * q.y), cy + half_width * (st * q.x + ct * q.y)});
  }
  out.shape = Shape(std::move(pts));

  out.image = Tensor(size, size, 3);
  constexpr double kSub[2] = {-0.25, 0.25};
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      Rgb acc{0, 0, 0};
      for (double sy : kSub) {
        for (double sx : kSub) {
          const double dx = (x + sx - cx) / half_width;
          const double dy = (y + sy - cy) / half_width;
          const double u = ct * dx + st * dy;
          const double v = -st * dx + ct * dy;
          const double b = std::clamp(bg_level + bg_slope * (x + sx) / size, 0.0, 1.0);
          const Rgb c = shade(face, u, v, skin, {b, b * 0.95, b * 0.9});
          acc.r += c.r / 4.0;
          acc.g += c.g / 4.0;
          acc.b += c.b / 4.0;
        }
      }
      double* px = out.image.data().data() + out.image.offset(y, x);
      px[0] = std::clamp(acc.r + spec.noise * rng.normal(), 0.0, 1.0);
      px[1] = std::clamp(acc.g + spec.noise * rng.normal(), 0.0, 1.0);
      px[2] = std::clamp(acc.b + spec.noise * rng.normal(), 0.0, 1.0);
    }
  }

  // Detector-like box: jittered square around the landmarks, always containing them.
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  for (const auto& p : out.shape.points()) {
    x0 = std::min(x0, p.x);
    y0 = std::min(y0, p.y);
    x1 = std::max(x1, p.x);
    y1 = std::max(y1, p.y);
  }
  const double side =
      std::max(x1 - x0, y1 - y0) * 1.15 * (1.0 + rng.uniform(-spec.box_jitter, spec.box_jitter));
  const double bx = (x0 + x1) / 2.0 + rng.uniform(-spec.box_jitter, spec.box_jitter) * side;
  const double by = (y0 + y1) / 2.0 + rng.uniform(-spec.box_jitter, spec.box_jitter) * side;
  double left = std::min(bx - side / 2.0, x0 - 1.0);
  double top = std::min(by - side / 2.0, y0 - 1.0);
  double right = std::max(bx + side / 2.0, x1 + 1.0);
  double bottom = std::max(by + side / 2.0, y1 + 1.0);
  out.box = clip_box({left, top, right - left, bottom - top}, size, size);
  return out;
}

SynthOutput synth_generate(const SynthSpec& spec, const std::string& out_dir, int threads) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  if (!ec) fs::create_directories(fs::path(out_dir) / "annotations", ec);
  if (ec) throw IoError("cannot create '" + out_dir + "': " + ec.message());

  SynthOutput out;
  out.entries.resize(static_cast<std::size_t>(spec.count));
  parallel_for(out.entries.size(), threads, [&](std::size_t i) {
    char name[32];
    std::snprintf(name, sizeof name, "face_%05zu", i);
    const SynthFace face = synth_face(spec, i);
    ManifestEntry e;
    e.image_path = std::string("images/") + name + ".ppm";
    e.pts_path = std::string("annotations/") + name + ".pts";
    e.box = face.box;
    save_image(face.image, (fs::path(out_dir) / e.image_path).string());
    write_pts(face.shape, (fs::path(out_dir) / e.pts_path).string());
    out.entries[i] = std::move(e);
  });
  out.manifest_path = (fs::path(out_dir) / "manifest.tsv").string();
  detail::write_file(out.manifest_path, format_manifest(out.entries));
  return out;
}

}  // namespace lddr
