#include "lddr/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "lddr/error.hpp"

namespace lddr {

const char* to_string(NmeProtocol p) noexcept {
  switch (p) {
    case NmeProtocol::interpupil68: return "interpupil68";
    case NmeProtocol::interpupil49: return "interpupil49";
    case NmeProtocol::eye_nose_3pt: return "eye_nose_3pt";
    case NmeProtocol::facesize: return "facesize";
  }
  return "unknown";
}

NmeProtocol parse_protocol(std::string_view name) {
  for (auto p : {NmeProtocol::interpupil68, NmeProtocol::interpupil49, NmeProtocol::eye_nose_3pt,
                 NmeProtocol::facesize}) {
    if (name == to_string(p)) return p;
  }
  throw ConfigError("unknown NME protocol '" + std::string(name) + "'");
}

const std::array<int, 49>& inner49_indices() noexcept {
  static const std::array<int, 49> idx = [] {
    std::array<int, 49> out{};
    std::size_t k = 0;
    for (int i = 17; i < 68; ++i) {
      if (i == 60 || i == 64) continue;
      out[k++] = i;
    }
    return out;
  }();
  return idx;
}

namespace {

Point centroid(const Shape& s, int first, int count) {
  Point c;
  for (int i = first; i < first + count; ++i) {
    c.x += s[static_cast<std::size_t>(i)].x;
    c.y += s[static_cast<std::size_t>(i)].y;
  }
  return {c.x / count, c.y / count};
}

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

Shape subset(const Shape& s, std::span<const int> idx) {
  std::vector<Point> pts;
  pts.reserve(idx.size());
  for (int i : idx) pts.push_back(s[static_cast<std::size_t>(i)]);
  return Shape(std::move(pts));
}

}  // namespace

double nme(const Shape& pred, const Shape& gt, NmeProtocol protocol, std::optional<FaceBox> box) {
  if (pred.size() != gt.size()) {
    throw InputError("nme: prediction has " + std::to_string(pred.size()) +
                     " landmarks, ground truth " + std::to_string(gt.size()));
  }
  double norm = 0.0;
  const Shape* p = &pred;
  const Shape* g = &gt;
  Shape p49, g49;
  switch (protocol) {
    case NmeProtocol::interpupil68:
      if (gt.size() != 68) throw InputError("interpupil68 needs 68-point shapes");
      norm = distance(centroid(gt, 36, 6), centroid(gt, 42, 6));
      break;
    case NmeProtocol::interpupil49:
      if (gt.size() == 68) {
        p49 = subset(pred, inner49_indices());
        g49 = subset(gt, inner49_indices());
        p = &p49;
        g = &g49;
      } else if (gt.size() != 49) {
        throw InputError("interpupil49 needs 68- or 49-point shapes");
      }
      // Eyes occupy 49-point positions 19..24 and 25..30.
      norm = distance(centroid(*g, 19, 6), centroid(*g, 25, 6));
      break;
    case NmeProtocol::eye_nose_3pt: {
      if (gt.size() != 3) throw InputError("eye_nose_3pt needs 3-point shapes");
      const Point mid{(gt[0].x + gt[1].x) / 2.0, (gt[0].y + gt[1].y) / 2.0};
      norm = distance(gt[2], mid);
      break;
    }
    case NmeProtocol::facesize:
      if (!box) throw InputError("facesize normalisation needs a face box");
      norm = std::sqrt(std::max(0.0, box->w) * std::max(0.0, box->h));
      break;
  }
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw MetricError(std::string("degenerate ") + to_string(protocol) + " normaliser");
  }
  return mean_point_error(*p, *g) / norm;
}

NmeResult evaluate_nme(std::span<const Shape> preds, std::span<const Shape> gts,
                       NmeProtocol protocol, std::span<const FaceBox> boxes) {
  if (preds.size() != gts.size()) throw InputError("evaluate_nme: list lengths differ");
  if (!boxes.empty() && boxes.size() != gts.size()) {
    throw InputError("evaluate_nme: box list length differs");
  }
  NmeResult r;
  r.protocol = protocol;
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::optional<FaceBox> box;
    if (!boxes.empty()) box = boxes[i];
    try {
      const double e = nme(preds[i], gts[i], protocol, box);
      r.per_image.push_back(e);
      r.evaluated.push_back(i);
      total += e;
    } catch (const MetricError&) {
      r.degenerate.push_back(i);
    }
  }
  r.mean = r.per_image.empty() ? 0.0 : total / static_cast<double>(r.per_image.size());
  return r;
}

std::vector<CedPoint> ced_curve(std::span<const double> errors, std::span<const double> thresholds) {
  if (errors.empty()) throw InputError("ced_curve: no errors");
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw InputError("ced_curve: thresholds must be ascending");
  }
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<CedPoint> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    const auto count = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    out.push_back({t, static_cast<double>(count) / static_cast<double>(sorted.size())});
  }
  return out;
}

std::string format_ced(std::span<const CedPoint> curve) {
  std::string out;
  char buf[64];
  for (const auto& p : curve) {
    auto r = std::to_chars(buf, buf + sizeof buf, p.threshold);
    out.append(buf, r.ptr);
    out.push_back('\t');
    r = std::to_chars(buf, buf + sizeof buf, p.fraction);
    out.append(buf, r.ptr);
    out.push_back('\n');
  }
  return out;
}

}  // namespace lddr
