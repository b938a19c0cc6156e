#pragma once

// 4D-printing design planners: concave-bending curvature model with inverse
// planning for closed circles, convex arch footprints, and friction dot
// textures.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "duomorph/error.hpp"
#include "duomorph/geometry.hpp"

namespace duomorph::morph4d {

using Json = nlohmann::ordered_json;
using geometry::PlanarPath;
using geometry::Point2;

struct StripSpec {
  double width = 6.0;   // mm
  double length = 100.0;  // mm
  int bonding_point_count = 5;
  double bonding_point_width = 3.0;  // mm

  void validate() const {
    if (!(width > 0.0) || !(length > 0.0) || !(bonding_point_width > 0.0)) {
      throw Morph4dError("invalid_strip", "strip width, length and bonding point width must be positive");
    }
    if (bonding_point_count < 2) throw Morph4dError("invalid_strip", "a strip needs at least 2 bonding points");
    if (bonding_point_count * bonding_point_width > length) {
      throw Morph4dError("invalid_strip", "bonding points do not fit on the strip");
    }
  }
  friend bool operator==(const StripSpec&, const StripSpec&) = default;
};

inline double bonded_fraction(const StripSpec& spec) {
  spec.validate();
  return spec.bonding_point_count * spec.bonding_point_width / spec.length;
}

// ===========================================================================
// Curvature model

inline constexpr const char* kUncalibratedNote =
    "uncalibrated placeholder: measure your own strips (3/6/9 mm widths, 3-13 bonding points of 3 mm on 100 mm "
    "strips, activated in 100 C water) and load them as a calibration file";

// Calibration grid over (strip width, bonding point count) measured on strips
// of one length and point width. Queries use bonded fraction so other strip
// lengths map onto the same grid.
class CurvatureModel {
 public:
  CurvatureModel(std::vector<double> widths, std::vector<int> counts, std::vector<std::vector<double>> curvature,
                 double strip_length, double point_width, bool calibrated, std::string note = {})
      : widths_(std::move(widths)),
        counts_(std::move(counts)),
        values_(std::move(curvature)),
        strip_length_(strip_length),
        point_width_(point_width),
        calibrated_(calibrated),
        note_(std::move(note)) {
    check();
  }

  const std::vector<double>& widths() const { return widths_; }
  const std::vector<int>& counts() const { return counts_; }
  const std::vector<std::vector<double>>& values() const { return values_; }  // [width][count]
  double strip_length() const { return strip_length_; }
  double point_width() const { return point_width_; }
  bool calibrated() const { return calibrated_; }
  const std::string& note() const { return note_; }

  double fraction_of(int count) const { return count * point_width_ / strip_length_; }
  double min_fraction() const { return fraction_of(counts_.front()); }
  double max_fraction() const { return fraction_of(counts_.back()); }

  // Bilinear over (width, fraction). Bilinear blends of a grid that is
  // monotone along both axes stay monotone, and nodes come back exactly.
  double predict(double width, double fraction) const {
    if (!std::isfinite(width) || width < widths_.front()) {
      throw Morph4dError("out_of_range", "strip width " + num(width) + " mm is below the calibrated minimum " +
                                             num(widths_.front()) + " mm");
    }
    if (width > widths_.back()) {
      throw Morph4dError("out_of_range", "strip width " + num(width) + " mm is above the calibrated maximum " +
                                             num(widths_.back()) + " mm");
    }
    if (!std::isfinite(fraction) || fraction < min_fraction()) {
      throw Morph4dError("out_of_range", "bonded fraction " + num(fraction) + " is below the calibrated minimum " +
                                             num(min_fraction()));
    }
    if (fraction > max_fraction()) {
      throw Morph4dError("out_of_range", "bonded fraction " + num(fraction) + " is above the calibrated maximum " +
                                             num(max_fraction()));
    }
    std::vector<double> fracs;
    for (int c : counts_) fracs.push_back(fraction_of(c));
    const auto [i, s] = locate(widths_, width);
    const auto [j, t] = locate(fracs, fraction);
    auto v = [&](std::size_t a, std::size_t b) { return values_[a][b]; };
    const double lo = t == 0.0 ? v(i, j) : (1.0 - t) * v(i, j) + t * v(i, j + 1);
    if (s == 0.0) return lo;
    const double hi = t == 0.0 ? v(i + 1, j) : (1.0 - t) * v(i + 1, j) + t * v(i + 1, j + 1);
    return (1.0 - s) * lo + s * hi;
  }

 private:
  static std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
  }

  // Cell index and local parameter; a node returns t == 0 exactly (the last
  // node maps to the previous cell with t == 1).
  static std::pair<std::size_t, double> locate(const std::vector<double>& axis, double x) {
    if (axis.size() == 1) return {0, 0.0};
    auto it = std::upper_bound(axis.begin(), axis.end(), x);
    std::size_t i = it == axis.begin() ? 0 : static_cast<std::size_t>(it - axis.begin()) - 1;
    if (axis[i] == x) return {i == axis.size() - 1 ? i - 1 : i, i == axis.size() - 1 ? 1.0 : 0.0};
    i = std::min(i, axis.size() - 2);
    return {i, (x - axis[i]) / (axis[i + 1] - axis[i])};
  }

  void check() const {
    if (widths_.empty() || counts_.empty()) throw Morph4dError("invalid_calibration", "calibration grid is empty");
    if (!(strip_length_ > 0.0) || !(point_width_ > 0.0)) {
      throw Morph4dError("invalid_calibration", "strip length and bonding point width must be positive");
    }
    if (!std::is_sorted(widths_.begin(), widths_.end()) ||
        std::adjacent_find(widths_.begin(), widths_.end()) != widths_.end() ||
        !std::is_sorted(counts_.begin(), counts_.end()) ||
        std::adjacent_find(counts_.begin(), counts_.end()) != counts_.end()) {
      throw Morph4dError("invalid_calibration", "calibration widths and counts must be strictly increasing");
    }
    if (counts_.front() < 2 || counts_.back() * point_width_ > strip_length_) {
      throw Morph4dError("invalid_calibration", "calibration counts must lie in [2, length / point width]");
    }
    if (values_.size() != widths_.size()) throw Morph4dError("invalid_calibration", "grid row count mismatch");
    for (std::size_t i = 0; i < widths_.size(); ++i) {
      if (values_[i].size() != counts_.size()) throw Morph4dError("invalid_calibration", "grid column count mismatch");
      for (std::size_t j = 0; j < counts_.size(); ++j) {
        const double k = values_[i][j];
        if (!std::isfinite(k) || k < 0.0) throw Morph4dError("invalid_calibration", "curvatures must be finite and >= 0");
        if (j > 0 && k > values_[i][j - 1]) {
          throw Morph4dError("non_monotone", "curvature rises with bonded fraction at width " + num(widths_[i]) +
                                                 " mm, count " + std::to_string(counts_[j]));
        }
        if (i > 0 && k < values_[i - 1][j]) {
          throw Morph4dError("non_monotone", "curvature falls with width at width " + num(widths_[i]) + " mm, count " +
                                                 std::to_string(counts_[j]));
        }
      }
    }
  }

  std::vector<double> widths_;
  std::vector<int> counts_;
  std::vector<std::vector<double>> values_;
  double strip_length_;
  double point_width_;
  bool calibrated_;
  std::string note_;
};

// Shape-only placeholder that follows both trends; not measured data.
inline CurvatureModel default_model() {
  return CurvatureModel({3.0, 6.0, 9.0}, {3, 5, 7, 9, 11, 13},
                        {{0.070, 0.063, 0.055, 0.048, 0.041, 0.035},
                         {0.085, 0.078, 0.071, 0.0635, 0.056, 0.049},
                         {0.100, 0.093, 0.086, 0.079, 0.0715, 0.0630}},
                        100.0, 3.0, false, kUncalibratedNote);
}

inline double predict_curvature(const CurvatureModel& model, const StripSpec& spec) {
  return model.predict(spec.width, bonded_fraction(spec));
}

inline Json calibration_to_json(const CurvatureModel& m) {
  Json j;
  j["strip_length_mm"] = m.strip_length();
  j["bonding_point_width_mm"] = m.point_width();
  j["activation"] = "100 C water";
  j["calibrated"] = m.calibrated();
  j["note"] = m.note();
  Json rows = Json::array();
  for (std::size_t i = 0; i < m.widths().size(); ++i) {
    for (std::size_t k = 0; k < m.counts().size(); ++k) {
      rows.push_back({{"width_mm", m.widths()[i]},
                      {"bonding_point_count", m.counts()[k]},
                      {"curvature_per_mm", m.values()[i][k]}});
    }
  }
  j["measurements"] = rows;
  return j;
}

inline CurvatureModel calibration_from_json(const Json& j) {
  try {
    std::vector<double> widths;
    std::vector<int> counts;
    const auto& rows = j.at("measurements");
    for (const auto& r : rows) {
      widths.push_back(r.at("width_mm").get<double>());
      counts.push_back(r.at("bonding_point_count").get<int>());
    }
    std::sort(widths.begin(), widths.end());
    widths.erase(std::unique(widths.begin(), widths.end()), widths.end());
    std::sort(counts.begin(), counts.end());
    counts.erase(std::unique(counts.begin(), counts.end()), counts.end());
    std::vector<std::vector<double>> grid(widths.size(), std::vector<double>(counts.size(), std::nan("")));
    for (const auto& r : rows) {
      const auto wi = std::lower_bound(widths.begin(), widths.end(), r.at("width_mm").get<double>()) - widths.begin();
      const auto ci =
          std::lower_bound(counts.begin(), counts.end(), r.at("bonding_point_count").get<int>()) - counts.begin();
      if (!std::isnan(grid[wi][ci])) throw Morph4dError("invalid_calibration", "duplicate calibration measurement");
      grid[wi][ci] = r.at("curvature_per_mm").get<double>();
    }
    for (const auto& row : grid) {
      for (double v : row) {
        if (std::isnan(v)) throw Morph4dError("incomplete_grid", "calibration must measure every width x count pair");
      }
    }
    return CurvatureModel(std::move(widths), std::move(counts), std::move(grid), j.at("strip_length_mm").get<double>(),
                          j.at("bonding_point_width_mm").get<double>(), j.value("calibrated", true),
                          j.value("note", std::string{}));
  } catch (const Json::exception& e) {
    throw Morph4dError("invalid_calibration", std::string("calibration file: ") + e.what());
  }
}

// ===========================================================================
// Inverse planning

struct PlanCandidate {
  StripSpec spec;
  double curvature = 0.0;
  double relative_error = 0.0;
};

struct CirclePlan {
  double target_curvature = 0.0;  // 1/mm
  std::vector<PlanCandidate> candidates;  // ascending error
};

inline constexpr double kCircleTolerance = 0.05;

// Strips of the given length bending to the target curvature (a closed
// circle is 2*pi/length). Candidates are the calibrated widths with every whole bonding point count
// in the calibrated range. Wider strips need more bonding points, so a width
// may not use fewer points than the best count of any narrower width.
inline CirclePlan plan_for_curvature(const CurvatureModel& model, double length, double target) {
  if (!(length > 0.0)) throw Morph4dError("invalid_length", "strip length must be positive");
  if (!(target > 0.0) || !std::isfinite(target)) throw Morph4dError("invalid_target", "target curvature must be positive");
  CirclePlan plan;
  plan.target_curvature = target;

  std::vector<std::vector<PlanCandidate>> per_width;
  for (double w : model.widths()) {
    auto& row = per_width.emplace_back();
    for (int c = model.counts().front(); c <= model.counts().back(); ++c) {
      const StripSpec spec{w, length, c, model.point_width()};
      if (c * spec.bonding_point_width > length) continue;
      const double f = c * spec.bonding_point_width / length;
      if (f < model.min_fraction() || f > model.max_fraction()) continue;
      const double k = model.predict(w, f);
      const double err = std::abs(k - plan.target_curvature) / plan.target_curvature;
      if (err <= kCircleTolerance) row.push_back({spec, k, err});
    }
  }
  int floor_count = 0;
  for (auto& row : per_width) {
    std::erase_if(row, [&](const PlanCandidate& p) { return p.spec.bonding_point_count < floor_count; });
    if (row.empty()) continue;
    const auto best = std::min_element(row.begin(), row.end(), [](const auto& a, const auto& b) {
      return a.relative_error < b.relative_error;
    });
    floor_count = std::max(floor_count, best->spec.bonding_point_count);
    plan.candidates.insert(plan.candidates.end(), row.begin(), row.end());
  }
  std::stable_sort(plan.candidates.begin(), plan.candidates.end(), [](const auto& a, const auto& b) {
    if (a.relative_error != b.relative_error) return a.relative_error < b.relative_error;
    if (a.spec.width != b.spec.width) return a.spec.width < b.spec.width;
    return a.spec.bonding_point_count < b.spec.bonding_point_count;
  });
  if (plan.candidates.empty()) {
    throw Morph4dError("no_plan", "no calibrated strip of length " + std::to_string(length) +
                                      " mm reaches the target curvature within 5%; recalibrate with physical strips "
                                      "covering this curvature");
  }
  return plan;
}

inline CirclePlan plan_for_circle(const CurvatureModel& model, double length) {
  return plan_for_curvature(model, length, 2.0 * std::numbers::pi / length);
}

// ===========================================================================
// Convex arches

struct ArchPattern {
  double span = 10.0;       // foot center to foot center, mm
  double foot_width = 3.0;  // mm
  double arch_height = 2.0;  // mm
  int count = 3;

  void validate() const {
    if (count < 1) throw Morph4dError("invalid_arch", "arch count must be at least 1");
    if (!(foot_width > 0.0) || !(arch_height > 0.0)) {
      throw Morph4dError("invalid_arch", "foot width and arch height must be positive");
    }
    if (!(span > 2.0 * foot_width)) throw Morph4dError("invalid_arch", "arch span must exceed twice the foot width");
  }
  double pattern_length() const { return count * span + foot_width; }
};

struct ArchThresholds {
  double support_span = 8.0;          // mm
  double interlayer_foot_width = 2.0;  // mm
};

struct Foot {
  double start = 0.0, end = 0.0;  // arc length along the base
  std::vector<Point2> footprint;  // base polyline between start and end
};

struct Arch {
  double start = 0.0, end = 0.0;  // free span between neighboring feet
  Point2 apex;                    // base point under the apex
  double height = 0.0;
};

struct ArchLayout {
  std::vector<Foot> feet;
  std::vector<Arch> arches;
  double bonded_fraction = 0.0;  // foot length / base length
  bool needs_support = false;
  bool needs_interlayer = false;
  std::vector<std::string> advisories;
};

inline constexpr const char* kSupportAdvice = "add dissolvable (PVA) support under the arches; the span is large";
inline constexpr const char* kArchInterlayerAdvice =
    "add a thin intermediate TPU layer under the feet; the arch base is narrow";

namespace detail {

inline Point2 point_at(const PlanarPath& path, double s) {
  double walked = 0.0;
  for (std::size_t i = 0; i < path.segment_count(); ++i) {
    const Point2 a = path.segment_start(i), b = path.segment_end(i);
    const double len = geometry::distance(a, b);
    if (s <= walked + len || i + 1 == path.segment_count()) {
      return geometry::lerp(a, b, std::clamp((s - walked) / len, 0.0, 1.0));
    }
    walked += len;
  }
  return path.end_point();
}

inline std::vector<Point2> sub_path(const PlanarPath& path, double s0, double s1) {
  std::vector<Point2> out{point_at(path, s0)};
  double walked = 0.0;
  for (std::size_t i = 0; i + 1 < path.segment_count(); ++i) {
    walked += geometry::distance(path.segment_start(i), path.segment_end(i));
    if (walked > s0 && walked < s1) out.push_back(path.segment_end(i));
  }
  out.push_back(point_at(path, s1));
  return out;
}

}  // namespace detail

// Feet are laid along the base with the whole pattern centered on it.
inline ArchLayout generate_arch_pattern(const ArchPattern& spec, const PlanarPath& base,
                                        const ArchThresholds& thresholds = {}) {
  spec.validate();
  if (base.closed()) throw Morph4dError("invalid_base", "arch base must be an open path");
  const double length = base.length();
  if (length + 1e-9 < spec.pattern_length()) {
    throw Morph4dError("base_too_short", "base is " + std::to_string(length) + " mm but the pattern needs " +
                                             std::to_string(spec.pattern_length()) + " mm");
  }
  ArchLayout out;
  const double offset = (length - spec.pattern_length()) / 2.0;
  for (int i = 0; i <= spec.count; ++i) {
    const double s0 = offset + i * spec.span;
    const double s1 = s0 + spec.foot_width;
    out.feet.push_back({s0, s1, detail::sub_path(base, s0, s1)});
  }
  for (int i = 0; i < spec.count; ++i) {
    const double s0 = out.feet[i].end, s1 = out.feet[i + 1].start;
    out.arches.push_back({s0, s1, detail::point_at(base, (s0 + s1) / 2.0), spec.arch_height});
  }
  out.bonded_fraction = (spec.count + 1) * spec.foot_width / length;
  out.needs_support = spec.span > thresholds.support_span;
  out.needs_interlayer = spec.foot_width < thresholds.interlayer_foot_width;
  if (out.needs_support) out.advisories.emplace_back(kSupportAdvice);
  if (out.needs_interlayer) out.advisories.emplace_back(kArchInterlayerAdvice);
  return out;
}

// ===========================================================================
// Friction dot textures

struct DotTexture {
  std::vector<Point2> centers;
  double diameter = 0.0;
  double coverage = 0.0;  // disc area / region area
};

// Printed dot arrays lower the contact friction of the surface they cover;
// size and pitch set how much. Rows are hexagonally offset, every disc lies
// fully inside the rectangle.
inline DotTexture generate_dot_texture(const geometry::Bounds& region, double diameter, double pitch) {
  const double w = region.max.x - region.min.x, h = region.max.y - region.min.y;
  if (!(w > 0.0) || !(h > 0.0)) throw Morph4dError("invalid_region", "texture region must have positive size");
  if (!(diameter > 0.0)) throw Morph4dError("invalid_dots", "dot diameter must be positive");
  if (pitch < diameter) throw Morph4dError("invalid_dots", "pitch must be at least the dot diameter");
  if (diameter > std::min(w, h)) throw Morph4dError("dots_too_large", "dot diameter exceeds the region size");
  DotTexture out;
  out.diameter = diameter;
  const double r = diameter / 2.0;
  const double row_step = pitch * std::sqrt(3.0) / 2.0;
  constexpr double eps = 1e-9;
  for (int row = 0;; ++row) {
    const double y = region.min.y + r + row * row_step;
    if (y > region.max.y - r + eps) break;
    for (int col = 0;; ++col) {
      const double x = region.min.x + r + (row % 2 ? pitch / 2.0 : 0.0) + col * pitch;
      if (x > region.max.x - r + eps) break;
      out.centers.push_back({x, y});
    }
  }
  out.coverage = static_cast<double>(out.centers.size()) * std::numbers::pi * r * r / (w * h);
  return out;
}

}  // namespace duomorph::morph4d
