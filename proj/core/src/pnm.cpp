#include "lddr/image_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include "binary_io.hpp"
#include "lddr/error.hpp"

namespace lddr {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

  // Next whitespace-delimited header integer, skipping '#' comments.
  int integer(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') ++pos_;
    if (start == pos_) {
      if (pos_ >= bytes_.size()) {
        throw ParseError(ParseErrorKind::truncated, std::string("image header ends before ") + what);
      }
      throw ParseError(ParseErrorKind::malformed_header, std::string("bad ") + what);
    }
    int v = 0;
    const auto r = std::from_chars(bytes_.data() + start, bytes_.data() + pos_, v);
    if (r.ec != std::errc()) {
      throw ParseError(ParseErrorKind::malformed_header, std::string("out-of-range ") + what);
    }
    return v;
  }

  // The single whitespace byte separating the header from the raster.
  void end_of_header() {
    if (pos_ >= bytes_.size()) throw ParseError(ParseErrorKind::truncated, "image has no raster");
    if (!is_space(bytes_[pos_])) {
      throw ParseError(ParseErrorKind::malformed_header, "expected whitespace after maxval");
    }
    ++pos_;
  }

  std::size_t pos() const noexcept { return pos_; }

 private:
  static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (is_space(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 2;
};

}  // namespace

Tensor decode_pnm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') {
    throw ParseError(ParseErrorKind::unsupported_format, "not a PNM image");
  }
  const char kind = bytes[1];
  int channels = 0;
  bool binary = true;
  switch (kind) {
    case '2': channels = 1; binary = false; break;
    case '3': channels = 3; binary = false; break;
    case '5': channels = 1; break;
    case '6': channels = 3; break;
    default:
      throw ParseError(ParseErrorKind::unsupported_format,
                       std::string("unsupported PNM variant P") + kind);
  }
  HeaderReader header(bytes);
  const int width = header.integer("width");
  const int height = header.integer("height");
  const int maxval = header.integer("maxval");
  if (width < 1 || height < 1) throw ParseError(ParseErrorKind::malformed_header, "empty image");
  if (maxval < 1 || maxval > 65535) {
    throw ParseError(ParseErrorKind::malformed_header, "maxval must be in 1..65535");
  }
  const std::size_t samples = static_cast<std::size_t>(width) * height * channels;
  std::vector<double> data(samples);
  const double levels = maxval;

  if (binary) {
    header.end_of_header();
    const std::size_t depth = maxval < 256 ? 1 : 2;
    const std::size_t need = samples * depth;
    if (bytes.size() - header.pos() < need) {
      throw ParseError(ParseErrorKind::truncated,
                       "raster needs " + std::to_string(need) + " bytes, file has " +
                           std::to_string(bytes.size() - header.pos()));
    }
    const auto* raster = reinterpret_cast<const unsigned char*>(bytes.data() + header.pos());
    for (std::size_t i = 0; i < samples; ++i) {
      const int v = depth == 1 ? raster[i] : (raster[2 * i] << 8) | raster[2 * i + 1];
      if (v > maxval) throw ParseError(ParseErrorKind::bad_token, "sample exceeds maxval");
      data[i] = v / levels;
    }
  } else {
    for (std::size_t i = 0; i < samples; ++i) {
      const int v = header.integer("sample");
      if (v > maxval) throw ParseError(ParseErrorKind::bad_token, "sample exceeds maxval");
      data[i] = v / levels;
    }
  }
  return Tensor(height, width, channels, std::move(data));
}

std::string encode_pnm(const Tensor& image) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw InputError("PNM output needs 1 or 3 channels, got " + std::to_string(image.channels()));
  }
  std::string out = std::string(image.channels() == 1 ? "P5" : "P6") + "\n" +
                    std::to_string(image.width()) + " " + std::to_string(image.height()) +
                    "\n255\n";
  out.reserve(out.size() + image.size());
  for (double v : image.data()) {
    const double c = std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0))));
  }
  return out;
}

Tensor load_image(const std::string& path) {
  const auto bytes = detail::read_file(path);
  try {
    return decode_pnm(bytes);
  } catch (const ParseError& e) {
    throw ParseError(e.kind(), path + ": " + e.detail());
  }
}

void save_image(const Tensor& image, const std::string& path) {
  detail::write_file(path, encode_pnm(image));
}

}  // namespace lddr
