#include "lddr/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <set>

#include "binary_io.hpp"
#include "lddr/error.hpp"
#include "lddr/pts.hpp"

namespace lddr {

namespace fs = std::filesystem;

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

double number(std::string_view tok, int line, const char* what) {
  double v = 0.0;
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (r.ec != std::errc() || r.ptr != tok.data() + tok.size()) {
    throw ParseError(ParseErrorKind::bad_token, std::string("bad ") + what, line);
  }
  return v;
}

void append_number(std::string& out, double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, r.ptr);
}

}  // namespace

std::vector<Sample> load_manifest(const std::string& path) {
  const std::string text = detail::read_file(path);
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](std::string_view p) {
    const fs::path rel(p);
    return (rel.is_absolute() ? rel : base / rel).lexically_normal().string();
  };

  std::vector<Sample> out;
  std::set<std::string> ids;
  std::optional<std::size_t> landmarks;
  std::size_t start = 0;
  int line_no = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;

    const auto fields = split_tabs(line);
    if (fields.size() != 6) {
      throw ParseError(ParseErrorKind::bad_token,
                       path + ": expected 6 tab-separated fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    Sample s;
    s.image_path = resolve(fields[0]);
    s.id = fs::path(s.image_path).stem().string();
    s.box = {number(fields[2], line_no, "x"), number(fields[3], line_no, "y"),
             number(fields[4], line_no, "w"), number(fields[5], line_no, "h")};
    if (!(s.box.w > 0.0) || !(s.box.h > 0.0)) {
      throw ParseError(ParseErrorKind::bad_token, path + ": face box must be non-empty", line_no);
    }
    if (!fs::exists(s.image_path)) {
      throw IoError(path + ":" + std::to_string(line_no) + ": image '" + s.image_path +
                    "' does not exist");
    }
    if (!ids.insert(s.id).second) {
      throw InputError(path + ":" + std::to_string(line_no) + ": duplicate identifier '" + s.id +
                       "'");
    }
    if (!fields[1].empty() && fields[1] != "-") {
      s.pts_path = resolve(fields[1]);
      if (!fs::exists(s.pts_path)) {
        throw IoError(path + ":" + std::to_string(line_no) + ": annotation '" + s.pts_path +
                      "' does not exist");
      }
      s.shape = read_pts(s.pts_path);
      if (landmarks && *landmarks != s.shape->size()) {
        throw InputError(path + ":" + std::to_string(line_no) + ": " + s.pts_path + " has " +
                         std::to_string(s.shape->size()) + " landmarks, earlier entries have " +
                         std::to_string(*landmarks));
      }
      landmarks = s.shape->size();
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string format_manifest(std::span<const ManifestEntry> entries) {
  std::string out;
  for (const auto& e : entries) {
    out += e.image_path;
    out += '\t';
    out += e.pts_path.empty() ? "-" : e.pts_path;
    for (double v : {e.box.x, e.box.y, e.box.w, e.box.h}) {
      out += '\t';
      append_number(out, v);
    }
    out += '\n';
  }
  return out;
}

FaceBox clip_box(const FaceBox& box, int width, int height) {
  const double x0 = std::clamp(box.x, 0.0, static_cast<double>(width));
  const double y0 = std::clamp(box.y, 0.0, static_cast<double>(height));
  const double x1 = std::clamp(box.x + box.w, 0.0, static_cast<double>(width));
  const double y1 = std::clamp(box.y + box.h, 0.0, static_cast<double>(height));
  if (x1 <= x0 || y1 <= y0) throw InputError("face box lies outside the image");
  return {x0, y0, x1 - x0, y1 - y0};
}

}  // namespace lddr
