#pragma once

// Planar geometry kernel: paths, sampling, region checks and path ordering.
// All lengths are millimeters in build-plate coordinates.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "duomorph/error.hpp"

namespace duomorph::geometry {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(Point2 a, double s) { return {a.x * s, a.y * s}; }
  friend Point2 operator*(double s, Point2 a) { return {a.x * s, a.y * s}; }
  friend bool operator==(Point2 a, Point2 b) = default;

  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }
inline double distance(Point2 a, Point2 b) { return norm(b - a); }
inline Point2 lerp(Point2 a, Point2 b, double t) { return a + (b - a) * t; }

// Distance from p to the closed segment [a, b].
inline double distance_to_segment(Point2 p, Point2 a, Point2 b) {
  const Point2 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return distance(p, a + ab * t);
}

inline constexpr double kMinVertexSeparation = 1e-9;

// An ordered open or closed polyline. A closed path does not repeat its first
// vertex at the end; closure is implied.
class PlanarPath {
 public:
  PlanarPath(std::vector<Point2> vertices, bool closed) : vertices_(std::move(vertices)), closed_(closed) {
    if (vertices_.size() < 2) throw GeometryError("degenerate_path", "a path needs at least two vertices");
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
      if (!vertices_[i].finite()) {
        throw GeometryError("non_finite", "vertex " + std::to_string(i) + " is not finite");
      }
      if (i > 0 && distance(vertices_[i - 1], vertices_[i]) <= kMinVertexSeparation) {
        throw GeometryError("duplicate_vertex", "vertices " + std::to_string(i - 1) + " and " + std::to_string(i) +
                                                    " coincide");
      }
    }
    if (closed_ && distance(vertices_.front(), vertices_.back()) <= kMinVertexSeparation) {
      throw GeometryError("duplicate_vertex", "closed path repeats its first vertex");
    }
  }

  const std::vector<Point2>& vertices() const noexcept { return vertices_; }
  bool closed() const noexcept { return closed_; }
  std::size_t size() const noexcept { return vertices_.size(); }
  Point2 front() const { return vertices_.front(); }
  // Where the nozzle ends up after tracing the path.
  Point2 end_point() const { return closed_ ? vertices_.front() : vertices_.back(); }

  std::size_t segment_count() const { return closed_ ? vertices_.size() : vertices_.size() - 1; }
  Point2 segment_start(std::size_t i) const { return vertices_[i]; }
  Point2 segment_end(std::size_t i) const { return vertices_[(i + 1) % vertices_.size()]; }

  double length() const {
    double total = 0.0;
    for (std::size_t i = 0; i < segment_count(); ++i) total += distance(segment_start(i), segment_end(i));
    return total;
  }

  friend bool operator==(const PlanarPath&, const PlanarPath&) = default;

 private:
  std::vector<Point2> vertices_;
  bool closed_ = false;
};

// Builds a path from raw points: drops consecutive duplicates and, for closed
// paths, a trailing copy of the first vertex.
inline PlanarPath make_path(std::vector<Point2> points, bool closed) {
  std::vector<Point2> cleaned;
  cleaned.reserve(points.size());
  for (const auto& p : points) {
    if (cleaned.empty() || distance(cleaned.back(), p) > kMinVertexSeparation) cleaned.push_back(p);
  }
  if (closed) {
    while (cleaned.size() > 1 && distance(cleaned.front(), cleaned.back()) <= kMinVertexSeparation) cleaned.pop_back();
  }
  if (cleaned.size() < 2) throw GeometryError("degenerate_path", "path collapses to a single point");
  return PlanarPath(std::move(cleaned), closed);
}

struct PrintRegion {
  double width = 256.0;
  double depth = 256.0;
  Point2 origin{};

  PrintRegion() = default;
  PrintRegion(double w, double d, Point2 o = {}) : width(w), depth(d), origin(o) {
    if (!(width > 0.0) || !(depth > 0.0)) throw GeometryError("invalid_region", "region width and depth must be positive");
  }

  // Closed-region semantics: points on the boundary are inside.
  bool contains(Point2 p) const {
    return p.x >= origin.x && p.x <= origin.x + width && p.y >= origin.y && p.y <= origin.y + depth;
  }

  friend bool operator==(const PrintRegion&, const PrintRegion&) = default;
};

struct RegionViolation {
  std::size_t path_index = 0;
  std::size_t vertex_index = 0;
  Point2 point{};
  friend bool operator==(const RegionViolation&, const RegionViolation&) = default;
};

struct RegionReport {
  std::vector<RegionViolation> violations;
  bool ok() const { return violations.empty(); }

  std::string describe() const {
    std::string out;
    for (const auto& v : violations) {
      out += "path " + std::to_string(v.path_index) + " vertex " + std::to_string(v.vertex_index) + " at (" +
             std::to_string(v.point.x) + ", " + std::to_string(v.point.y) + ") lies outside the print region\n";
    }
    return out;
  }
};

inline RegionReport check_within_region(std::span<const PlanarPath> paths, const PrintRegion& region) {
  RegionReport report;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto& verts = paths[i].vertices();
    for (std::size_t j = 0; j < verts.size(); ++j) {
      if (!region.contains(verts[j])) report.violations.push_back({i, j, verts[j]});
    }
  }
  return report;
}

// Vertices where the direction turns by more than this are kept as exact
// sample points; runs of gentler turns are resampled as one group.
inline constexpr double kCornerAngleRadians = 20.0 * 3.14159265358979323846 / 180.0;

namespace detail {

inline bool is_corner(Point2 prev, Point2 at, Point2 next) {
  const Point2 a = at - prev;
  const Point2 b = next - at;
  const double turn = std::atan2(std::abs(cross(a, b)), dot(a, b));
  return turn > kCornerAngleRadians;
}

// Evenly subdivides the polyline chain[0..n) into ceil(L / interval) pieces and
// appends the samples after chain[0] (chain[0] itself is already emitted).
inline void sample_group(std::span<const Point2> chain, double interval, std::vector<Point2>& out) {
  std::vector<double> cumulative(chain.size(), 0.0);
  for (std::size_t i = 1; i < chain.size(); ++i) cumulative[i] = cumulative[i - 1] + distance(chain[i - 1], chain[i]);
  const double total = cumulative.back();
  const auto pieces = static_cast<std::size_t>(std::max(1.0, std::ceil(total / interval - 1e-9)));
  const double step = total / static_cast<double>(pieces);
  std::size_t seg = 0;
  for (std::size_t k = 1; k < pieces; ++k) {
    const double s = step * static_cast<double>(k);
    while (seg + 2 < chain.size() && cumulative[seg + 1] < s) ++seg;
    const double seg_len = cumulative[seg + 1] - cumulative[seg];
    const double t = seg_len > 0.0 ? (s - cumulative[seg]) / seg_len : 0.0;
    out.push_back(lerp(chain[seg], chain[seg + 1], std::clamp(t, 0.0, 1.0)));
  }
  out.push_back(chain.back());
}

}  // namespace detail

// Samples the path so that consecutive samples are at most `interval` apart in
// arc length. Original endpoints and sharp corners are reproduced exactly; a
// closed path ends with a copy of its start point.
inline std::vector<Point2> sample_path(const PlanarPath& path, double interval) {
  if (!(interval > 0.0)) throw GeometryError("invalid_interval", "sampling interval must be positive");
  std::vector<Point2> chain = path.vertices();
  if (path.closed()) chain.push_back(chain.front());

  std::vector<std::size_t> breaks{0};
  for (std::size_t i = 1; i + 1 < chain.size(); ++i) {
    if (detail::is_corner(chain[i - 1], chain[i], chain[i + 1])) breaks.push_back(i);
  }
  breaks.push_back(chain.size() - 1);

  std::vector<Point2> out{chain.front()};
  for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
    const std::span<const Point2> group(chain.data() + breaks[b], breaks[b + 1] - breaks[b] + 1);
    detail::sample_group(group, interval, out);
  }
  return out;
}

inline double polyline_length(std::span<const Point2> points) {
  double total = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) total += distance(points[i - 1], points[i]);
  return total;
}

// Travel distance for visiting `paths` in `order`, starting at `origin`:
// origin -> first start, then each path's end -> next path's start.
inline double travel_length(std::span<const PlanarPath> paths, std::span<const std::size_t> order, Point2 origin) {
  double total = 0.0;
  Point2 at = origin;
  for (std::size_t idx : order) {
    total += distance(at, paths[idx].front());
    at = paths[idx].end_point();
  }
  return total;
}

// Greedy nearest-start ordering beginning with the path whose start is closest
// to `origin`. Ties go to the lower input index. Falls back to input order if
// that happens to travel less than the greedy tour.
inline std::vector<std::size_t> order_paths(std::span<const PlanarPath> paths, Point2 origin = {}) {
  if (paths.empty()) throw GeometryError("no_paths", "cannot order an empty path list");
  std::vector<std::size_t> order;
  order.reserve(paths.size());
  std::vector<bool> used(paths.size(), false);
  Point2 at = origin;
  for (std::size_t step = 0; step < paths.size(); ++step) {
    std::size_t best = paths.size();
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < paths.size(); ++i) {
      if (used[i]) continue;
      const double d = distance(at, paths[i].front());
      if (d < best_dist) {
        best_dist = d;
        best = i;
      }
    }
    used[best] = true;
    order.push_back(best);
    at = paths[best].end_point();
  }
  std::vector<std::size_t> identity(paths.size());
  std::iota(identity.begin(), identity.end(), std::size_t{0});
  if (travel_length(paths, identity, origin) < travel_length(paths, order, origin)) return identity;
  return order;
}

namespace detail {

inline bool segments_cross(Point2 a, Point2 b, Point2 c, Point2 d) {
  const double d1 = cross(b - a, c - a);
  const double d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c);
  const double d4 = cross(d - c, b - c);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0;
}

}  // namespace detail

// Number of proper crossings between non-adjacent segments of one path.
// Self-intersecting seal patterns are legal; callers report this as a warning.
inline std::size_t count_self_intersections(const PlanarPath& path) {
  const std::size_t n = path.segment_count();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 2; j < n; ++j) {
      if (path.closed() && i == 0 && j == n - 1) continue;
      if (detail::segments_cross(path.segment_start(i), path.segment_end(i), path.segment_start(j), path.segment_end(j))) {
        ++hits;
      }
    }
  }
  return hits;
}

struct Bounds {
  Point2 min{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  Point2 max{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};

  void add(Point2 p) {
    min.x = std::min(min.x, p.x);
    min.y = std::min(min.y, p.y);
    max.x = std::max(max.x, p.x);
    max.y = std::max(max.y, p.y);
  }
  bool empty() const { return min.x > max.x; }
  Point2 center() const { return (min + max) * 0.5; }
  bool contains(Point2 p) const { return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y; }
  Bounds padded(double pad) const { return {{min.x - pad, min.y - pad}, {max.x + pad, max.y + pad}}; }
};

}  // namespace duomorph::geometry
