#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lddr/shape.hpp"

namespace lddr {

enum class NmeProtocol { interpupil68, interpupil49, eye_nose_3pt, facesize };

const char* to_string(NmeProtocol p) noexcept;
/// Throws ConfigError for unknown names.
NmeProtocol parse_protocol(std::string_view name);

/// 0-based 68-point indices kept by the 49-point protocol: everything except the
/// 17 jaw points and the two inner-mouth corners (61 and 65, 1-based).
const std::array<int, 49>& inner49_indices() noexcept;

/// Mean landmark error divided by the protocol normaliser (taken from `gt` only):
///  interpupil68/49: distance between eye centres, each the mean of its 6 eye landmarks;
///  eye_nose_3pt: shapes are {eye, eye, nose}; distance nose to eye midpoint;
///  facesize: sqrt(w * h) of `box`, which is then required.
/// interpupil49 accepts 68-point shapes (reduced to the 49 subset) or 49-point shapes.
/// Throws MetricError for a zero normaliser, InputError for incompatible shapes.
double nme(const Shape& pred, const Shape& gt, NmeProtocol protocol,
           std::optional<FaceBox> box = std::nullopt);

struct NmeResult {
  NmeProtocol protocol = NmeProtocol::interpupil68;
  std::vector<double> per_image;        // valid images only
  std::vector<std::size_t> evaluated;   // source index of each per_image entry
  std::vector<std::size_t> degenerate;  // images with a zero normaliser
  double mean = 0.0;
};

/// nme over paired lists; degenerate images are excluded from the mean and listed.
NmeResult evaluate_nme(std::span<const Shape> preds, std::span<const Shape> gts,
                       NmeProtocol protocol, std::span<const FaceBox> boxes = {});

struct CedPoint {
  double threshold = 0.0;
  double fraction = 0.0;

  friend bool operator==(const CedPoint&, const CedPoint&) = default;
};

/// Fraction of errors <= each threshold. Thresholds must be ascending.
std::vector<CedPoint> ced_curve(std::span<const double> errors, std::span<const double> thresholds);

/// `threshold<TAB>fraction` rows.
std::string format_ced(std::span<const CedPoint> curve);

}  // namespace lddr
