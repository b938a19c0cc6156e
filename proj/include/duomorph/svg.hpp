#pragma once

// SVG ingestion: path-data flattening (M/L/H/V/C/S/Q/T/A/Z, absolute and
// relative) and a small document loader that understands <path>, <polyline>,
// <polygon>, <line>, <rect>, <circle> and <ellipse> with translate/scale
// transforms.

#include <cctype>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "duomorph/error.hpp"
#include "duomorph/geometry.hpp"

namespace duomorph::geometry {

namespace svg_detail {

inline constexpr std::size_t kMaxPiecesPerSegment = 100000;

class PathLexer {
 public:
  explicit PathLexer(std::string_view text) : text_(text) {}

  void skip_separators() {
    while (pos_ < text_.size() && (std::isspace(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == ',')) ++pos_;
  }

  bool at_end() {
    skip_separators();
    return pos_ >= text_.size();
  }

  bool next_is_number() {
    skip_separators();
    if (pos_ >= text_.size()) return false;
    const char c = text_[pos_];
    return std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.';
  }

  std::optional<char> command() {
    skip_separators();
    if (pos_ >= text_.size()) return std::nullopt;
    const char c = text_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c))) {
      ++pos_;
      return c;
    }
    return std::nullopt;
  }

  std::optional<double> number() {
    skip_separators();
    if (pos_ >= text_.size()) return std::nullopt;
    // SVG numbers: [+-]? digits? (. digits)? ([eE][+-]?digits)?; from_chars
    // rejects a leading '+', so handle it here.
    std::size_t start = pos_;
    if (text_[start] == '+') ++start;
    std::size_t end = start;
    if (end < text_.size() && text_[end] == '-') ++end;
    bool digits = false;
    while (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) { ++end; digits = true; }
    if (end < text_.size() && text_[end] == '.') {
      ++end;
      while (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) { ++end; digits = true; }
    }
    if (!digits) return std::nullopt;
    if (end < text_.size() && (text_[end] == 'e' || text_[end] == 'E')) {
      std::size_t exp = end + 1;
      if (exp < text_.size() && (text_[exp] == '-' || text_[exp] == '+')) ++exp;
      if (exp < text_.size() && std::isdigit(static_cast<unsigned char>(text_[exp]))) {
        end = exp;
        while (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) ++end;
      }
    }
    double value = 0.0;
    std::string token(text_.substr(start, end - start));
    if (!token.empty() && token[0] == '+') token.erase(0, 1);
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(value)) return std::nullopt;
    pos_ = end;
    return value;
  }

  // Arc flags may be written without separators ("a1 1 0 01 5 5").
  std::optional<bool> flag() {
    skip_separators();
    if (pos_ >= text_.size()) return std::nullopt;
    const char c = text_[pos_];
    if (c != '0' && c != '1') return std::nullopt;
    ++pos_;
    return c == '1';
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

inline std::size_t pieces_for(double bound_numerator, double tolerance) {
  if (!(bound_numerator > 0.0)) return 1;
  const double n = std::ceil(std::sqrt(bound_numerator / tolerance));
  if (!std::isfinite(n) || n < 1.0) return 1;
  return static_cast<std::size_t>(std::min<double>(n, kMaxPiecesPerSegment));
}

// Linear interpolation error of a C2 curve with n equal parameter steps is at
// most max|B''| / (8 n^2); the piece counts below invert that bound.
inline void flatten_cubic(Point2 p0, Point2 p1, Point2 p2, Point2 p3, double tol, std::vector<Point2>& out) {
  const double m = std::max(norm(p0 - 2.0 * p1 + p2), norm(p1 - 2.0 * p2 + p3));
  const std::size_t n = pieces_for(0.75 * m, tol);
  for (std::size_t i = 1; i <= n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n);
    const double u = 1.0 - t;
    out.push_back(p0 * (u * u * u) + p1 * (3 * u * u * t) + p2 * (3 * u * t * t) + p3 * (t * t * t));
  }
  out.back() = p3;
}

inline void flatten_quadratic(Point2 p0, Point2 p1, Point2 p2, double tol, std::vector<Point2>& out) {
  const double m = norm(p0 - 2.0 * p1 + p2);
  const std::size_t n = pieces_for(0.25 * m, tol);
  for (std::size_t i = 1; i <= n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n);
    const double u = 1.0 - t;
    out.push_back(p0 * (u * u) + p1 * (2 * u * t) + p2 * (t * t));
  }
  out.back() = p2;
}

// Endpoint-to-center conversion per the SVG implementation notes.
inline void flatten_arc(Point2 p0, double rx, double ry, double phi_deg, bool large_arc, bool sweep, Point2 p1, double tol,
                        std::vector<Point2>& out) {
  if (distance(p0, p1) <= kMinVertexSeparation) return;
  rx = std::abs(rx);
  ry = std::abs(ry);
  if (rx == 0.0 || ry == 0.0) {
    out.push_back(p1);
    return;
  }
  const double phi = phi_deg * 3.14159265358979323846 / 180.0;
  const double c = std::cos(phi), s = std::sin(phi);
  const double dx = (p0.x - p1.x) / 2.0, dy = (p0.y - p1.y) / 2.0;
  const double x1p = c * dx + s * dy;
  const double y1p = -s * dx + c * dy;
  const double lambda = (x1p * x1p) / (rx * rx) + (y1p * y1p) / (ry * ry);
  if (lambda > 1.0) {
    const double k = std::sqrt(lambda);
    rx *= k;
    ry *= k;
  }
  const double num = rx * rx * ry * ry - rx * rx * y1p * y1p - ry * ry * x1p * x1p;
  const double den = rx * rx * y1p * y1p + ry * ry * x1p * x1p;
  double coef = den > 0.0 ? std::sqrt(std::max(0.0, num / den)) : 0.0;
  if (large_arc == sweep) coef = -coef;
  const double cxp = coef * rx * y1p / ry;
  const double cyp = -coef * ry * x1p / rx;
  const Point2 center{c * cxp - s * cyp + (p0.x + p1.x) / 2.0, s * cxp + c * cyp + (p0.y + p1.y) / 2.0};

  auto angle = [](double ux, double uy, double vx, double vy) {
    return std::atan2(ux * vy - uy * vx, ux * vx + uy * vy);
  };
  const double theta1 = angle(1.0, 0.0, (x1p - cxp) / rx, (y1p - cyp) / ry);
  double dtheta = angle((x1p - cxp) / rx, (y1p - cyp) / ry, (-x1p - cxp) / rx, (-y1p - cyp) / ry);
  constexpr double two_pi = 2.0 * 3.14159265358979323846;
  if (!sweep && dtheta > 0) dtheta -= two_pi;
  if (sweep && dtheta < 0) dtheta += two_pi;

  // |E''| <= max radius, so a parameter step h deviates at most r h^2 / 8.
  const double rmax = std::max(rx, ry);
  const double step = std::sqrt(8.0 * tol / rmax);
  auto n = static_cast<std::size_t>(std::ceil(std::abs(dtheta) / step));
  n = std::clamp<std::size_t>(n, 1, kMaxPiecesPerSegment);
  for (std::size_t i = 1; i <= n; ++i) {
    const double t = theta1 + dtheta * static_cast<double>(i) / static_cast<double>(n);
    const double ex = rx * std::cos(t), ey = ry * std::sin(t);
    out.push_back({c * ex - s * ey + center.x, s * ex + c * ey + center.y});
  }
  out.back() = p1;
}

}  // namespace svg_detail

// Flattens SVG path data into polylines whose deviation from the exact curves
// is at most `chord_tolerance`. Each subpath becomes one PlanarPath; Z closes.
inline std::vector<PlanarPath> flatten_svg_path(std::string_view data, double chord_tolerance) {
  using namespace svg_detail;
  if (!(chord_tolerance > 0.0)) throw GeometryError("invalid_tolerance", "chord tolerance must be positive");

  PathLexer lex(data);
  std::vector<PlanarPath> result;
  std::vector<Point2> current;
  bool closed = false;
  std::size_t subpath_command = 0;
  Point2 pen{}, start{};
  Point2 last_cubic_ctrl{}, last_quad_ctrl{};
  char prev_upper = 0;
  std::size_t command_index = 0;

  auto finish = [&]() {
    if (current.empty()) return;
    try {
      result.push_back(make_path(current, closed));
    } catch (const GeometryError&) {
      throw SvgParseError(subpath_command, "subpath starting at command #" + std::to_string(subpath_command) +
                                               " is degenerate (single point)");
    }
    current.clear();
    closed = false;
  };

  if (lex.at_end()) throw SvgParseError(0, "empty path data");

  while (!lex.at_end()) {
    auto cmd = lex.command();
    if (!cmd) throw SvgParseError(command_index, "expected a command letter at command #" + std::to_string(command_index));
    const char letter = *cmd;
    const char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(letter)));
    const bool relative = letter != upper;
    if (std::string_view("MLHVCSQTAZ").find(upper) == std::string_view::npos) {
      throw SvgParseError(command_index, std::string("unsupported command '") + letter + "' at command #" +
                                             std::to_string(command_index));
    }
    if (command_index == 0 && upper != 'M') {
      throw SvgParseError(0, "path data must begin with a moveto (command #0)");
    }

    auto need = [&](std::optional<double> v) {
      if (!v) {
        throw SvgParseError(command_index, std::string("malformed parameters for '") + letter + "' at command #" +
                                               std::to_string(command_index));
      }
      return *v;
    };
    auto need_flag = [&](std::optional<bool> v) {
      if (!v) {
        throw SvgParseError(command_index, std::string("malformed arc flag for '") + letter + "' at command #" +
                                               std::to_string(command_index));
      }
      return *v;
    };
    auto point = [&](double x, double y) { return relative ? Point2{pen.x + x, pen.y + y} : Point2{x, y}; };
    auto begin_if_needed = [&]() {
      if (current.empty()) {
        current.push_back(pen);
        subpath_command = command_index;
      }
    };

    if (upper == 'Z') {
      if (!current.empty()) {
        closed = true;
        finish();
      }
      pen = start;
      prev_upper = 'Z';
      ++command_index;
      continue;
    }

    bool first_group = true;
    do {
      char effective = upper;
      if (upper == 'M' && !first_group) effective = 'L';
      switch (effective) {
        case 'M': {
          const double x = need(lex.number()), y = need(lex.number());
          finish();
          pen = point(x, y);
          start = pen;
          current.push_back(pen);
          subpath_command = command_index;
          break;
        }
        case 'L': {
          const double x = need(lex.number()), y = need(lex.number());
          begin_if_needed();
          pen = point(x, y);
          current.push_back(pen);
          break;
        }
        case 'H': {
          const double x = need(lex.number());
          begin_if_needed();
          pen = {relative ? pen.x + x : x, pen.y};
          current.push_back(pen);
          break;
        }
        case 'V': {
          const double y = need(lex.number());
          begin_if_needed();
          pen = {pen.x, relative ? pen.y + y : y};
          current.push_back(pen);
          break;
        }
        case 'C': {
          double v[6];
          for (double& d : v) d = need(lex.number());
          begin_if_needed();
          const Point2 c1 = point(v[0], v[1]), c2 = point(v[2], v[3]), end = point(v[4], v[5]);
          flatten_cubic(pen, c1, c2, end, chord_tolerance, current);
          last_cubic_ctrl = c2;
          pen = end;
          break;
        }
        case 'S': {
          double v[4];
          for (double& d : v) d = need(lex.number());
          begin_if_needed();
          const Point2 c1 = (prev_upper == 'C' || prev_upper == 'S') ? pen * 2.0 - last_cubic_ctrl : pen;
          const Point2 c2 = point(v[0], v[1]), end = point(v[2], v[3]);
          flatten_cubic(pen, c1, c2, end, chord_tolerance, current);
          last_cubic_ctrl = c2;
          pen = end;
          break;
        }
        case 'Q': {
          double v[4];
          for (double& d : v) d = need(lex.number());
          begin_if_needed();
          const Point2 c = point(v[0], v[1]), end = point(v[2], v[3]);
          flatten_quadratic(pen, c, end, chord_tolerance, current);
          last_quad_ctrl = c;
          pen = end;
          break;
        }
        case 'T': {
          const double x = need(lex.number()), y = need(lex.number());
          begin_if_needed();
          const Point2 c = (prev_upper == 'Q' || prev_upper == 'T') ? pen * 2.0 - last_quad_ctrl : pen;
          const Point2 end = point(x, y);
          flatten_quadratic(pen, c, end, chord_tolerance, current);
          last_quad_ctrl = c;
          pen = end;
          break;
        }
        case 'A': {
          const double rx = need(lex.number()), ry = need(lex.number()), rot = need(lex.number());
          const bool large = need_flag(lex.flag()), sweep = need_flag(lex.flag());
          const double x = need(lex.number()), y = need(lex.number());
          begin_if_needed();
          const Point2 end = point(x, y);
          flatten_arc(pen, rx, ry, rot, large, sweep, end, chord_tolerance, current);
          pen = end;
          break;
        }
        default:
          break;
      }
      prev_upper = effective;
      first_group = false;
    } while (lex.next_is_number());
    ++command_index;
  }
  finish();
  return result;
}

// Scale-then-translate transform: p' = scale * p + offset.
struct ScaleTranslate {
  Point2 scale{1.0, 1.0};
  Point2 offset{0.0, 0.0};

  Point2 apply(Point2 p) const { return {scale.x * p.x + offset.x, scale.y * p.y + offset.y}; }
  // this ∘ inner
  ScaleTranslate then_inner(const ScaleTranslate& inner) const {
    return {{scale.x * inner.scale.x, scale.y * inner.scale.y},
            {scale.x * inner.offset.x + offset.x, scale.y * inner.offset.y + offset.y}};
  }
  double max_scale() const { return std::max(std::abs(scale.x), std::abs(scale.y)); }
};

namespace svg_detail {

inline std::vector<double> number_list(std::string_view text) {
  PathLexer lex(text);
  std::vector<double> values;
  while (!lex.at_end()) {
    auto v = lex.number();
    if (!v) throw GeometryError("svg_load", "malformed number list '" + std::string(text) + "'");
    values.push_back(*v);
  }
  return values;
}

inline ScaleTranslate parse_transform(std::string_view text) {
  ScaleTranslate total;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && (std::isspace(static_cast<unsigned char>(text[pos])) || text[pos] == ',')) ++pos;
    if (pos >= text.size()) break;
    const std::size_t open = text.find('(', pos);
    const std::size_t close = text.find(')', pos);
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
      throw GeometryError("svg_transform", "malformed transform '" + std::string(text) + "'");
    }
    std::string name(text.substr(pos, open - pos));
    while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back()))) name.pop_back();
    const auto args = number_list(text.substr(open + 1, close - open - 1));
    ScaleTranslate t;
    if (name == "translate" && (args.size() == 1 || args.size() == 2)) {
      t.offset = {args[0], args.size() == 2 ? args[1] : 0.0};
    } else if (name == "scale" && (args.size() == 1 || args.size() == 2)) {
      t.scale = {args[0], args.size() == 2 ? args[1] : args[0]};
    } else {
      throw GeometryError("svg_transform", "unsupported transform '" + name +
                                               "' (only translate and scale are allowed)");
    }
    total = total.then_inner(t);
    pos = close + 1;
  }
  return total;
}

struct Tag {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  bool closing = false;
  bool self_closing = false;

  std::optional<std::string> attr(std::string_view key) const {
    for (const auto& [k, v] : attributes) {
      if (k == key) return v;
    }
    return std::nullopt;
  }
};

inline Tag parse_tag(std::string_view body) {
  Tag tag;
  std::size_t pos = 0;
  if (!body.empty() && body[0] == '/') {
    tag.closing = true;
    pos = 1;
  }
  if (!body.empty() && body.back() == '/') {
    tag.self_closing = true;
    body.remove_suffix(1);
  }
  const std::size_t name_end = body.find_first_of(" \t\r\n", pos);
  tag.name = std::string(body.substr(pos, name_end == std::string_view::npos ? body.size() - pos : name_end - pos));
  if (const auto colon = tag.name.find(':'); colon != std::string::npos) tag.name = tag.name.substr(colon + 1);
  pos = name_end == std::string_view::npos ? body.size() : name_end;
  while (pos < body.size()) {
    while (pos < body.size() && std::isspace(static_cast<unsigned char>(body[pos]))) ++pos;
    const std::size_t eq = body.find('=', pos);
    if (eq == std::string_view::npos) break;
    std::string key(body.substr(pos, eq - pos));
    while (!key.empty() && std::isspace(static_cast<unsigned char>(key.back()))) key.pop_back();
    std::size_t q = eq + 1;
    while (q < body.size() && std::isspace(static_cast<unsigned char>(body[q]))) ++q;
    if (q >= body.size() || (body[q] != '"' && body[q] != '\'')) break;
    const char quote = body[q];
    const std::size_t end = body.find(quote, q + 1);
    if (end == std::string_view::npos) break;
    tag.attributes.emplace_back(std::move(key), std::string(body.substr(q + 1, end - q - 1)));
    pos = end + 1;
  }
  return tag;
}

inline double attr_number(const Tag& tag, std::string_view key, double fallback = 0.0) {
  const auto v = tag.attr(key);
  if (!v) return fallback;
  const auto values = number_list(*v);
  if (values.size() != 1) throw GeometryError("svg_load", "attribute '" + std::string(key) + "' is not a number");
  return values[0];
}

// Converts a shape element to equivalent path data.
inline std::optional<std::string> shape_to_path_data(const Tag& tag) {
  auto fmt = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  if (tag.name == "path") return tag.attr("d");
  if (tag.name == "line") {
    return "M " + fmt(attr_number(tag, "x1")) + " " + fmt(attr_number(tag, "y1")) + " L " + fmt(attr_number(tag, "x2")) +
           " " + fmt(attr_number(tag, "y2"));
  }
  if (tag.name == "polyline" || tag.name == "polygon") {
    const auto pts = number_list(tag.attr("points").value_or(""));
    if (pts.size() < 4 || pts.size() % 2 != 0) throw GeometryError("svg_load", tag.name + " needs an even list of coordinates");
    std::string d = "M";
    for (std::size_t i = 0; i < pts.size(); i += 2) d += " " + fmt(pts[i]) + " " + fmt(pts[i + 1]);
    if (tag.name == "polygon") d += " Z";
    return d;
  }
  if (tag.name == "rect") {
    const double x = attr_number(tag, "x"), y = attr_number(tag, "y");
    const double w = attr_number(tag, "width"), h = attr_number(tag, "height");
    return "M " + fmt(x) + " " + fmt(y) + " H " + fmt(x + w) + " V " + fmt(y + h) + " H " + fmt(x) + " Z";
  }
  if (tag.name == "circle" || tag.name == "ellipse") {
    const double cx = attr_number(tag, "cx"), cy = attr_number(tag, "cy");
    const double rx = tag.name == "circle" ? attr_number(tag, "r") : attr_number(tag, "rx");
    const double ry = tag.name == "circle" ? rx : attr_number(tag, "ry");
    if (!(rx > 0.0) || !(ry > 0.0)) throw GeometryError("svg_load", tag.name + " needs positive radii");
    const std::string r = fmt(rx) + " " + fmt(ry) + " 0 1 1 ";
    return "M " + fmt(cx + rx) + " " + fmt(cy) + " A " + r + fmt(cx - rx) + " " + fmt(cy) + " A " + r + fmt(cx + rx) +
           " " + fmt(cy) + " Z";
  }
  return std::nullopt;
}

}  // namespace svg_detail

// Loads every drawable element of an SVG document as flattened paths in
// millimeters (user units scaled by `unit_scale`).
inline std::vector<PlanarPath> load_svg_document(std::string_view document, double chord_tolerance, double unit_scale = 1.0) {
  using namespace svg_detail;
  if (!(unit_scale > 0.0)) throw GeometryError("svg_load", "unit scale must be positive");
  std::vector<PlanarPath> out;
  std::vector<ScaleTranslate> stack{ScaleTranslate{{unit_scale, unit_scale}, {0.0, 0.0}}};
  std::vector<std::string> open_names;
  int hidden_depth = 0;
  std::size_t pos = 0;
  while ((pos = document.find('<', pos)) != std::string_view::npos) {
    if (document.substr(pos, 4) == "<!--") {
      const auto end = document.find("-->", pos);
      pos = end == std::string_view::npos ? document.size() : end + 3;
      continue;
    }
    if (document.substr(pos, 9) == "<![CDATA[") {
      const auto end = document.find("]]>", pos);
      pos = end == std::string_view::npos ? document.size() : end + 3;
      continue;
    }
    if (pos + 1 < document.size() && (document[pos + 1] == '?' || document[pos + 1] == '!')) {
      const auto end = document.find('>', pos);
      pos = end == std::string_view::npos ? document.size() : end + 1;
      continue;
    }
    const auto end = document.find('>', pos);
    if (end == std::string_view::npos) throw GeometryError("svg_load", "unterminated tag in SVG document");
    const Tag tag = parse_tag(document.substr(pos + 1, end - pos - 1));
    pos = end + 1;

    const bool hides = tag.name == "defs" || tag.name == "clipPath" || tag.name == "mask" || tag.name == "symbol" ||
                       tag.name == "marker" || tag.name == "pattern";
    if (tag.closing) {
      if (!open_names.empty()) {
        if (open_names.back() == "defs" || open_names.back() == "clipPath" || open_names.back() == "mask" ||
            open_names.back() == "symbol" || open_names.back() == "marker" || open_names.back() == "pattern") {
          --hidden_depth;
        }
        open_names.pop_back();
        stack.pop_back();
      }
      continue;
    }

    ScaleTranslate local = stack.back();
    if (auto t = tag.attr("transform")) local = local.then_inner(parse_transform(*t));

    if (hidden_depth == 0) {
      if (auto d = shape_to_path_data(tag)) {
        const double tol = chord_tolerance / std::max(local.max_scale(), 1e-12);
        for (const auto& path : flatten_svg_path(*d, tol)) {
          std::vector<Point2> pts;
          pts.reserve(path.size());
          for (const auto& p : path.vertices()) pts.push_back(local.apply(p));
          out.push_back(make_path(std::move(pts), path.closed()));
        }
      }
    }
    if (!tag.self_closing) {
      open_names.push_back(tag.name);
      stack.push_back(local);
      if (hides) ++hidden_depth;
    }
  }
  return out;
}

}  // namespace duomorph::geometry
