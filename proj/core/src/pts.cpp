#include "lddr/pts.hpp"

#include <charconv>
#include <vector>

#include "binary_io.hpp"
#include "lddr/error.hpp"

namespace lddr {

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    if (end == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

bool parse_number(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return r.ec == std::errc() && r.ptr == tok.data() + tok.size();
}

// "key: value" or "key : value"; returns the value, empty when the key differs.
std::string_view header_value(std::string_view line, std::string_view key) {
  line = trim(line);
  if (line.substr(0, key.size()) != key) return {};
  auto rest = trim(line.substr(key.size()));
  if (rest.empty() || rest.front() != ':') return {};
  return trim(rest.substr(1));
}

}  // namespace

Shape parse_pts(std::string_view text) {
  const auto lines = split_lines(text);
  std::size_t i = 0;
  auto skip_blank = [&] {
    while (i < lines.size() && trim(lines[i]).empty()) ++i;
  };
  auto line_no = [&] { return static_cast<int>(i + 1); };

  skip_blank();
  if (i >= lines.size() || header_value(lines[i], "version").empty()) {
    throw ParseError(ParseErrorKind::malformed_header, "expected 'version: <n>'", line_no());
  }
  ++i;
  skip_blank();
  const auto count_text = i < lines.size() ? header_value(lines[i], "n_points") : std::string_view{};
  double declared = 0.0;
  if (count_text.empty() || !parse_number(count_text, declared) || declared < 0 ||
      declared != static_cast<double>(static_cast<long>(declared))) {
    throw ParseError(ParseErrorKind::malformed_header, "expected 'n_points: <count>'", line_no());
  }
  ++i;
  skip_blank();
  if (i >= lines.size() || trim(lines[i]) != "{") {
    throw ParseError(ParseErrorKind::malformed_header, "expected '{'", line_no());
  }
  ++i;

  std::vector<Point> pts;
  bool closed = false;
  for (; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    if (line == "}") {
      closed = true;
      ++i;
      break;
    }
    const auto sep = line.find_first_of(" \t");
    if (sep == std::string_view::npos) {
      throw ParseError(ParseErrorKind::bad_token, "expected two coordinates", line_no());
    }
    const auto xs = line.substr(0, sep);
    const auto ys = trim(line.substr(sep));
    Point p;
    if (!parse_number(xs, p.x) || !parse_number(ys, p.y)) {
      throw ParseError(ParseErrorKind::bad_token, "non-numeric coordinate in '" +
                                                      std::string(line) + "'",
                       line_no());
    }
    pts.push_back(p);
  }
  if (!closed) throw ParseError(ParseErrorKind::truncated, "missing closing '}'", line_no());
  skip_blank();
  if (i < lines.size()) {
    throw ParseError(ParseErrorKind::trailing_data, "content after '}'", line_no());
  }
  if (pts.size() != static_cast<std::size_t>(declared)) {
    throw ParseError(ParseErrorKind::count_mismatch,
                     "n_points is " + std::to_string(static_cast<long>(declared)) + " but " +
                         std::to_string(pts.size()) + " coordinates are listed");
  }
  return Shape(std::move(pts));
}

std::string serialize_pts(const Shape& shape) {
  std::string out = "version: 1\nn_points: " + std::to_string(shape.size()) + "\n{\n";
  char buf[64];
  for (const auto& p : shape.points()) {
    auto r = std::to_chars(buf, buf + sizeof buf, p.x);
    out.append(buf, r.ptr);
    out.push_back(' ');
    r = std::to_chars(buf, buf + sizeof buf, p.y);
    out.append(buf, r.ptr);
    out.push_back('\n');
  }
  out += "}\n";
  return out;
}

Shape read_pts(const std::string& path) {
  const auto text = detail::read_file(path);
  try {
    return parse_pts(text);
  } catch (const ParseError& e) {
    throw ParseError(e.kind(), path + ": " + e.detail(), e.line());
  }
}

void write_pts(const Shape& shape, const std::string& path) {
  detail::write_file(path, serialize_pts(shape));
}

}  // namespace lddr
