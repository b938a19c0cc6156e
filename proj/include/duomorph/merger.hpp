#pragma once

// Fuses a sealing program and a third-party sliced print into one job:
// alignment marker export and recovery, marker stripping, bed-temperature
// ceiling, pause and alert injection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "duomorph/error.hpp"
#include "duomorph/gcode.hpp"
#include "duomorph/geometry.hpp"
#include "duomorph/materials.hpp"
#include "duomorph/mesh.hpp"

namespace duomorph::merger {

using geometry::Point2;

struct AlignmentMarker {
  Point2 center{5.0, 5.0};
  double arm_length = 10.0;  // tip to tip across the cross
  double arm_width = 2.0;
  double height = 0.2;

  void validate() const {
    if (!(arm_width > 0.0) || !(height > 0.0)) throw MergeError("invalid_marker", "marker dimensions must be positive");
    if (height > 0.4) throw MergeError("invalid_marker", "marker height must not exceed 0.4 mm");
    if (arm_length < 4.0 * arm_width) throw MergeError("invalid_marker", "marker arm length must be at least 4x its width");
  }

  // Footprint bounds in build-plate coordinates, optionally shifted.
  geometry::Bounds bounds(Point2 shift = {}) const {
    const double h = arm_length / 2.0;
    const Point2 c = center + shift;
    return {{c.x - h, c.y - h}, {c.x + h, c.y + h}};
  }

  // The 12-vertex cross outline, counter-clockwise.
  std::vector<Point2> outline() const {
    const double L = arm_length / 2.0, w = arm_width / 2.0;
    const Point2 local[12] = {{L, -w}, {L, w},  {w, w},   {w, L},   {-w, L}, {-w, w},
                              {-L, w}, {-L, -w}, {-w, -w}, {-w, -L}, {w, -L}, {w, -w}};
    std::vector<Point2> out;
    for (const auto& p : local) out.push_back(center + p);
    return out;
  }
};

inline AlignmentMarker default_marker(const geometry::PrintRegion& region) {
  AlignmentMarker m;
  m.center = region.origin + Point2{5.0, 5.0};
  return m;
}

// Cross prism: 10 top + 10 bottom + 24 side triangles.
inline mesh::Mesh export_marker_mesh(const AlignmentMarker& marker) {
  marker.validate();
  const auto ring = marker.outline();
  const double h = marker.height;
  auto top = [&](std::size_t i) { return mesh::Vec3{ring[i].x, ring[i].y, h}; };
  auto bot = [&](std::size_t i) { return mesh::Vec3{ring[i].x, ring[i].y, 0.0}; };

  // Cap as five quads: the center square and the four arms.
  static constexpr std::size_t quads[5][4] = {{2, 5, 8, 11}, {11, 0, 1, 2}, {2, 3, 4, 5}, {5, 6, 7, 8}, {8, 9, 10, 11}};
  mesh::Mesh m;
  for (const auto& q : quads) {
    m.triangles.push_back({top(q[0]), top(q[1]), top(q[2])});
    m.triangles.push_back({top(q[0]), top(q[2]), top(q[3])});
    m.triangles.push_back({bot(q[0]), bot(q[2]), bot(q[1])});
    m.triangles.push_back({bot(q[0]), bot(q[3]), bot(q[2])});
  }
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const std::size_t j = (i + 1) % ring.size();
    m.triangles.push_back({bot(i), bot(j), top(j)});
    m.triangles.push_back({bot(i), top(j), top(i)});
  }
  return m;
}

struct PartsExport {
  mesh::Mesh mesh;
  std::vector<std::string> warnings;
};

// Coordinates are kept as-is; the slicer must not re-center the plate.
inline PartsExport export_parts_with_marker(const std::vector<mesh::Mesh>& parts, const AlignmentMarker& marker) {
  PartsExport out;
  for (const auto& p : parts) out.mesh.append(p);
  if (parts.empty()) out.warnings.push_back("no part meshes given; exporting the alignment marker only");
  out.mesh.append(export_marker_mesh(marker));
  return out;
}

// ===========================================================================
// Offset recovery

inline constexpr double kAlignedTolerance = 0.05;   // mm
inline constexpr double kClusterLinkDistance = 0.75;  // mm between extrusion lines of one island
inline constexpr double kArmLengthTolerance = 0.2;    // relative
inline constexpr double kArmBandSlack = 0.5;          // mm beyond arm_width / 2

struct Segment2 {
  Point2 a, b;
  double length() const { return geometry::distance(a, b); }
};

namespace detail {

inline double segment_distance(const Segment2& s, const Segment2& t) {
  if (geometry::detail::segments_cross(s.a, s.b, t.a, t.b)) return 0.0;
  return std::min({geometry::distance_to_segment(s.a, t.a, t.b), geometry::distance_to_segment(s.b, t.a, t.b),
                   geometry::distance_to_segment(t.a, s.a, s.b), geometry::distance_to_segment(t.b, s.a, s.b)});
}

struct DisjointSet {
  std::vector<std::size_t> parent;
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

// Groups segments whose mutual distance is <= link. A uniform grid keeps
// this near-linear for real first layers.
inline std::vector<std::vector<std::size_t>> cluster_segments(const std::vector<Segment2>& segs, double link) {
  const double cell = link;
  auto key = [](long long i, long long j) { return (i << 32) ^ (j & 0xffffffffLL); };
  auto cell_of = [&](Point2 p) {
    return std::pair<long long, long long>{static_cast<long long>(std::floor(p.x / cell)),
                                           static_cast<long long>(std::floor(p.y / cell))};
  };
  std::unordered_map<long long, std::vector<std::size_t>> grid;
  std::vector<std::vector<std::pair<long long, long long>>> cells(segs.size());
  for (std::size_t s = 0; s < segs.size(); ++s) {
    const auto steps = static_cast<std::size_t>(std::ceil(segs[s].length() / (cell / 2.0)));
    for (std::size_t k = 0; k <= steps; ++k) {
      const double t = steps == 0 ? 0.0 : static_cast<double>(k) / static_cast<double>(steps);
      const auto c = cell_of(geometry::lerp(segs[s].a, segs[s].b, t));
      if (cells[s].empty() || cells[s].back() != c) cells[s].push_back(c);
    }
    std::sort(cells[s].begin(), cells[s].end());
    cells[s].erase(std::unique(cells[s].begin(), cells[s].end()), cells[s].end());
    for (const auto& c : cells[s]) grid[key(c.first, c.second)].push_back(s);
  }
  DisjointSet sets(segs.size());
  for (std::size_t s = 0; s < segs.size(); ++s) {
    for (const auto& c : cells[s]) {
      for (long long di = -2; di <= 2; ++di) {
        for (long long dj = -2; dj <= 2; ++dj) {
          const auto it = grid.find(key(c.first + di, c.second + dj));
          if (it == grid.end()) continue;
          for (std::size_t o : it->second) {
            if (o <= s || sets.find(o) == sets.find(s)) continue;
            if (segment_distance(segs[s], segs[o]) <= link) sets.unite(s, o);
          }
        }
      }
    }
  }
  std::unordered_map<std::size_t, std::size_t> slot;
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    const auto root = sets.find(s);
    auto [it, fresh] = slot.try_emplace(root, out.size());
    if (fresh) out.emplace_back();
    out[it->second].push_back(s);
  }
  return out;
}

struct BandLengths {
  double vertical_only = 0.0, horizontal_only = 0.0, both = 0.0, neither = 0.0;
  double total() const { return vertical_only + horizontal_only + both + neither; }
};

// Splits extrusion length by membership in the two arm bands around c.
inline BandLengths band_lengths(const std::vector<Segment2>& segs, const std::vector<std::size_t>& ids, Point2 c,
                                double half_band) {
  BandLengths out;
  constexpr double step = 0.05;
  for (std::size_t id : ids) {
    const auto& s = segs[id];
    const double len = s.length();
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / step)));
    for (std::size_t k = 0; k < n; ++k) {
      const Point2 p = geometry::lerp(s.a, s.b, (static_cast<double>(k) + 0.5) / static_cast<double>(n));
      const bool v = std::abs(p.x - c.x) <= half_band;
      const bool h = std::abs(p.y - c.y) <= half_band;
      const double piece = len / static_cast<double>(n);
      if (v && h) out.both += piece;
      else if (v) out.vertical_only += piece;
      else if (h) out.horizontal_only += piece;
      else out.neither += piece;
    }
  }
  return out;
}

}  // namespace detail

// Extruding XY segments of the first detected layer.
inline std::vector<Segment2> first_layer_extrusions(const gcode::Program& program) {
  const auto layer = program.first_layer();
  if (!layer) throw MergeError("no_layers", "sliced program has no detected layer markers");
  std::vector<Segment2> out;
  for (const auto& m : gcode::motion_segments(program, layer->first, layer->second)) {
    if (m.extruding()) out.push_back({{m.from.x, m.from.y}, {m.to.x, m.to.y}});
  }
  return out;
}

struct MarkerCandidate {
  Point2 centroid;  // bounding-box center of the matched island
  double extrusion_length = 0.0;
};

// Islands of first-layer extrusion shaped like the marker cross.
inline std::vector<MarkerCandidate> find_marker_candidates(const gcode::Program& sliced, const AlignmentMarker& marker) {
  const auto segs = first_layer_extrusions(sliced);
  std::vector<MarkerCandidate> out;
  for (const auto& ids : detail::cluster_segments(segs, kClusterLinkDistance)) {
    geometry::Bounds box;
    for (std::size_t id : ids) {
      box.add(segs[id].a);
      box.add(segs[id].b);
    }
    const double w = box.max.x - box.min.x, h = box.max.y - box.min.y;
    const double lo = marker.arm_length * (1.0 - kArmLengthTolerance), hi = marker.arm_length * (1.0 + kArmLengthTolerance);
    if (w < lo || w > hi || h < lo || h > hi) continue;
    const auto bands = detail::band_lengths(segs, ids, box.center(), marker.arm_width / 2.0 + kArmBandSlack);
    const double total = bands.total();
    if (total <= 0.0) continue;
    if (bands.neither > 0.05 * total) continue;
    if (bands.vertical_only < 0.15 * total || bands.horizontal_only < 0.15 * total) continue;
    out.push_back({box.center(), total});
  }
  return out;
}

struct OffsetResult {
  double dx = 0.0, dy = 0.0;
  bool aligned = false;  // |offset| <= 0.05 mm
  Point2 found{};
  Point2 offset() const { return {dx, dy}; }
};

inline OffsetResult recover_offset(const gcode::Program& sliced, const AlignmentMarker& marker) {
  const auto candidates = find_marker_candidates(sliced, marker);
  if (candidates.empty()) {
    throw MergeError("marker_not_found",
                     "no first-layer island matches the alignment marker; check that the marker was exported with "
                     "the parts and survived slicing (no brim, no re-centering)");
  }
  if (candidates.size() > 1) {
    std::string msg = "several first-layer islands match the alignment marker, at:";
    for (const auto& c : candidates) {
      msg += " (" + gcode::format_fixed(c.centroid.x, 3) + ", " + gcode::format_fixed(c.centroid.y, 3) + ")";
    }
    throw MergeError("marker_ambiguous", msg);
  }
  OffsetResult r;
  r.found = candidates.front().centroid;
  r.dx = r.found.x - marker.center.x;
  r.dy = r.found.y - marker.center.y;
  r.aligned = std::hypot(r.dx, r.dy) <= kAlignedTolerance;
  return r;
}

// ===========================================================================
// Marker stripping

inline constexpr double kStripPadding = 0.5;         // mm
inline constexpr double kStripGuardFraction = 0.05;  // of first-layer extrusion length

struct StripResult {
  gcode::Program program;
  std::size_t removed = 0;          // commands removed
  double removed_length = 0.0;      // mm of extrusion removed
  double first_layer_length = 0.0;  // mm of first-layer extrusion before stripping
};

// Removes first-layer moves inside the marker's (shifted, padded) box.
// Extrusions wholly inside go, as do travels ending inside. Absolute-E files
// get a G92 after each removed run so the next kept move extrudes what it
// originally did; Z and feed set by removed moves are re-asserted.
//
// Guard: extrusion that looks like a real part near the marker (inside the
// box but off the cross arms, or crossing the box edge) must stay under 5% of
// first-layer extrusion, otherwise the box overlaps a part.
inline StripResult strip_marker_moves(const gcode::Program& sliced, const AlignmentMarker& marker, Point2 offset) {
  using namespace gcode;
  const auto layer = sliced.first_layer();
  if (!layer) throw MergeError("no_layers", "sliced program has no detected layer markers");
  const auto box = marker.bounds(offset).padded(kStripPadding);
  const Point2 c = marker.center + offset;
  const double half_band = marker.arm_width / 2.0 + kArmBandSlack;

  StripResult out;
  std::vector<bool> drop(sliced.commands.size(), false);
  double suspect = 0.0;
  for (const auto& m : motion_segments(sliced, layer->first, layer->second)) {
    const Point2 a{m.from.x, m.from.y}, b{m.to.x, m.to.y};
    const bool ain = box.contains(a), bin = box.contains(b);
    if (m.extruding()) {
      const double len = m.xy_length();
      out.first_layer_length += len;
      if (ain && bin) {
        drop[m.command_index] = true;
        out.removed_length += len;
        const Point2 mid = geometry::lerp(a, b, 0.5);
        if (std::abs(mid.x - c.x) > half_band && std::abs(mid.y - c.y) > half_band) suspect += len;
      } else if (ain || bin) {
        suspect += len;
      }
    } else if (bin && (a.x != b.x || a.y != b.y)) {
      drop[m.command_index] = true;
    }
  }
  if (out.first_layer_length > 0.0 && suspect > kStripGuardFraction * out.first_layer_length) {
    throw MergeError("marker_overlaps_part",
                     "marker box overlaps printed geometry (" + format_fixed(suspect, 3) + " of " +
                         format_fixed(out.first_layer_length, 3) +
                         " mm first-layer extrusion); move the marker away from the parts");
  }

  auto& kept = out.program.commands;
  kept.reserve(sliced.commands.size());
  out.program.diagnostics = sliced.diagnostics;
  ModalState before_run;
  bool in_run = false;
  for (std::size_t i = 0; i < sliced.commands.size(); ++i) {
    const auto& cmd = sliced.commands[i];
    if (drop[i]) {
      if (!in_run) before_run = i > 0 ? sliced.commands[i - 1].state : ModalState{};
      in_run = true;
      ++out.removed;
      continue;
    }
    if (in_run) {
      const ModalState& after = sliced.commands[i - 1].state;
      if (after.z != before_run.z && std::isfinite(after.z)) {
        Move z;
        z.rapid = true;
        z.z = after.z;
        kept.push_back(make(z, cmd.phase, "; restore Z after marker removal"));
      }
      if (after.absolute_e && after.e != before_run.e) {
        kept.push_back(make(Passthrough{"G92 E" + format_fixed(after.e, kExtrusionDecimals)}, cmd.phase,
                            "; skip marker extrusion"));
      }
      if (after.feed != before_run.feed && std::isfinite(after.feed)) {
        Move f;
        f.f = after.feed;
        kept.push_back(make(f, cmd.phase));
      }
      in_run = false;
    }
    kept.push_back(cmd);
  }
  recompute_state(out.program);
  // recompute_state refreshes positions; layer tags and phases are carried
  // over from the source commands.
  return out;
}

// ===========================================================================
// Merge

struct FabJob {
  gcode::Program seal;
  gcode::Program print;
  std::string pause_macro = "M400 U1";
  std::vector<materials::AlertTone> alert_tones;
  double bed_ceiling = 30.0;
  AlignmentMarker marker;
  std::optional<Point2> offset;  // recovered earlier; recovered here if absent
};

struct MergeReport {
  std::size_t bed_replacements = 0;
  std::size_t stripped_commands = 0;
  double stripped_length = 0.0;
  Point2 offset{};
  bool aligned = false;
  std::vector<std::string> warnings;
};

struct MergeResult {
  gcode::Program program;
  MergeReport report;
};

inline void check_no_late_homing(const gcode::Program& print) {
  const auto marks = print.layer_marks();
  if (marks.empty()) throw MergeError("no_layers", "sliced program has no detected layer markers");
  for (std::size_t i = marks.front().index; i < print.commands.size(); ++i) {
    const auto& cmd = print.commands[i];
    const bool homes = cmd.as<gcode::Home>() != nullptr ||
                       (cmd.as<gcode::Passthrough>() && gcode::detail::trim(cmd.as<gcode::Passthrough>()->text).starts_with("G28"));
    if (homes) {
      throw MergeError("homing_after_first_layer",
                       "sliced program homes (G28) at line " + std::to_string(cmd.source_line) +
                           " after printing starts; homing would crash into the sealed airbag");
    }
  }
}

inline MergeResult merge(const FabJob& job) {
  using namespace gcode;
  check_no_late_homing(job.print);
  MergeResult result;
  auto& report = result.report;

  Point2 offset;
  if (job.offset) {
    offset = *job.offset;
    report.aligned = geometry::norm(offset) <= kAlignedTolerance;
  } else {
    const auto rec = recover_offset(job.print, job.marker);
    offset = rec.offset();
    report.aligned = rec.aligned;
  }
  report.offset = offset;

  auto bed = rewrite_bed_temps(job.print, job.bed_ceiling);
  report.bed_replacements = bed.replacements;
  auto stripped = strip_marker_moves(bed.program, job.marker, offset);
  report.stripped_commands = stripped.removed;
  report.stripped_length = stripped.removed_length;
  const Point2 shift = report.aligned ? Point2{} : Point2{-offset.x, -offset.y};
  auto moved = translate_xy(std::move(stripped.program), shift.x, shift.y);
  report.warnings = moved.warnings;

  auto& out = result.program.commands;
  for (const auto& cmd : job.seal.commands) {
    if (cmd.phase == Phase::preamble || cmd.phase == Phase::sealing) out.push_back(cmd);
  }
  out.push_back(make(Comment{" pause: remove the PTFE protector, then resume to print"}, Phase::pause));
  for (const auto& t : job.alert_tones) out.push_back(make(Tone{t.frequency_hz, t.duration_ms}, Phase::pause));
  out.push_back(make(PauseMacro{job.pause_macro}, Phase::pause));
  for (auto cmd : moved.program.commands) {
    if (cmd.as<PauseMacro>()) {
      report.warnings.push_back("sliced program has its own pause at line " + std::to_string(cmd.source_line) +
                                "; it is kept");
    }
    cmd.phase = Phase::printing;
    out.push_back(std::move(cmd));
  }
  out.push_back(make(Comment{" end of hybrid job"}, Phase::postamble));
  return result;
}

}  // namespace duomorph::merger
