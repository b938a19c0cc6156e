#pragma once

// Turns sealing patterns plus a material stack into nozzle toolpaths and the
// G-code that traces them with the hot, non-extruding nozzle.

#include <span>
#include <string>
#include <vector>

#include "duomorph/error.hpp"
#include "duomorph/gcode.hpp"
#include "duomorph/geometry.hpp"
#include "duomorph/materials.hpp"

namespace duomorph::sealer {

using geometry::PlanarPath;
using geometry::Point2;
using geometry::PrintRegion;

class RegionError : public SealError {
 public:
  explicit RegionError(geometry::RegionReport report)
      : SealError("outside_region", "sealing pattern leaves the print region:\n" + report.describe()),
        report_(std::move(report)) {}
  const geometry::RegionReport& report() const noexcept { return report_; }

 private:
  geometry::RegionReport report_;
};

struct Toolpath {
  std::vector<Point2> points;
  double seal_z = 0.0;       // mm
  double seal_speed = 0.0;   // mm/s
  std::size_t source_index = 0;  // index into the input pattern list
};

struct SealOptions {
  double sample_interval = 0.5;  // mm
  double lift_clearance = 2.0;   // mm above seal_z
  double travel_speed = 50.0;    // mm/s
  double z_speed = 10.0;         // mm/s for lifts

  static SealOptions from(const materials::SealingSettings& s) {
    SealOptions o;
    o.sample_interval = s.sample_interval;
    o.lift_clearance = s.lift_clearance;
    o.travel_speed = s.travel_speed;
    return o;
  }
};

struct SealPlan {
  std::vector<Toolpath> toolpaths;
  materials::MaterialStack stack;
  double lift_height = 0.0;
  double travel_speed = 50.0;
  double z_speed = 10.0;
  double sample_interval = 0.5;
  std::vector<std::string> warnings;

  void validate() const {
    if (toolpaths.empty()) throw SealError("nothing_to_seal", "seal plan has no toolpaths");
    for (const auto& tp : toolpaths) {
      if (!(lift_height > tp.seal_z)) throw SealError("invalid_plan", "lift height must exceed the seal height");
      for (std::size_t i = 1; i < tp.points.size(); ++i) {
        if (geometry::distance(tp.points[i - 1], tp.points[i]) > sample_interval + 1e-9) {
          throw SealError("invalid_plan", "toolpath samples are further apart than the sampling interval");
        }
      }
    }
  }
};

inline SealPlan plan_seal(std::span<const PlanarPath> patterns, const materials::MaterialStack& stack,
                          const PrintRegion& region, const SealOptions& options = {}) {
  if (patterns.empty()) throw SealError("nothing_to_seal", "no sealing patterns were given");
  stack.validate();
  auto report = geometry::check_within_region(patterns, region);
  if (!report.ok()) throw RegionError(std::move(report));

  SealPlan plan;
  plan.stack = stack;
  plan.lift_height = stack.seal_z() + options.lift_clearance;
  plan.travel_speed = options.travel_speed;
  plan.z_speed = options.z_speed;
  plan.sample_interval = options.sample_interval;
  for (std::size_t idx : geometry::order_paths(patterns, region.origin)) {
    plan.toolpaths.push_back(
        {geometry::sample_path(patterns[idx], options.sample_interval), stack.seal_z(), stack.seal_speed, idx});
    if (const auto crossings = geometry::count_self_intersections(patterns[idx]); crossings > 0) {
      plan.warnings.push_back("pattern " + std::to_string(idx) + " crosses itself " + std::to_string(crossings) +
                              " time(s); the junction is sealed twice");
    }
  }
  plan.validate();
  return plan;
}

inline double mm_per_min(double mm_per_s) { return mm_per_s * 60.0; }

inline gcode::Program compile_seal(const SealPlan& plan) {
  using namespace gcode;
  plan.validate();
  Program program;
  auto& out = program.commands;
  const double seal_feed = mm_per_min(plan.stack.seal_speed);
  const double travel_feed = mm_per_min(plan.travel_speed);
  const double z_feed = mm_per_min(plan.z_speed);

  auto move = [](bool rapid, std::optional<double> x, std::optional<double> y, std::optional<double> z,
                 std::optional<double> f) {
    Move m;
    m.rapid = rapid;
    m.x = x;
    m.y = y;
    m.z = z;
    m.f = f;
    return m;
  };

  const Phase pre = Phase::preamble;
  out.push_back(make(Comment{" heat-sealing pass, stack " + plan.stack.name + ", " +
                             std::to_string(plan.toolpaths.size()) + " curve(s)"},
                     pre));
  out.push_back(make(Passthrough{"G21"}, pre, "; millimeters"));
  out.push_back(make(Passthrough{"G90"}, pre, "; absolute positioning"));
  out.push_back(make(Home{}, pre));
  out.push_back(make(move(true, std::nullopt, std::nullopt, plan.lift_height, z_feed), pre));
  out.push_back(make(NozzleTemp{plan.stack.nozzle_temp, true, 'S', std::nullopt}, pre));
  out.push_back(make(BedTemp{plan.stack.bed_temp, true, 'S'}, pre));
  const Point2 first = plan.toolpaths.front().points.front();
  out.push_back(make(move(true, first.x, first.y, std::nullopt, travel_feed), pre));

  const Phase seal = Phase::sealing;
  for (std::size_t c = 0; c < plan.toolpaths.size(); ++c) {
    const auto& tp = plan.toolpaths[c];
    out.push_back(make(Comment{" curve " + std::to_string(c + 1) + "/" + std::to_string(plan.toolpaths.size()) +
                               " (pattern " + std::to_string(tp.source_index) + ")"},
                       seal));
    if (c > 0) {
      out.push_back(make(move(true, tp.points.front().x, tp.points.front().y, std::nullopt, travel_feed), seal));
    }
    out.push_back(make(move(false, std::nullopt, std::nullopt, tp.seal_z, seal_feed), seal));
    for (std::size_t i = 1; i < tp.points.size(); ++i) {
      out.push_back(make(move(false, tp.points[i].x, tp.points[i].y, std::nullopt, seal_feed), seal));
    }
    out.push_back(make(move(true, std::nullopt, std::nullopt, plan.lift_height, z_feed), seal));
  }

  const Phase post = Phase::postamble;
  out.push_back(make(Comment{" sealing done"}, post));
  out.push_back(make(move(true, std::nullopt, std::nullopt, plan.lift_height + 8.0, z_feed), post));
  out.push_back(make(NozzleTemp{0.0, false, 'S', std::nullopt}, post));
  out.push_back(make(BedTemp{0.0, false, 'S'}, post));
  recompute_state(program);
  return program;
}

struct SealSummary {
  std::size_t curves = 0;
  std::size_t samples = 0;
  double contact_length = 0.0;  // mm traced at seal height
  double travel_length = 0.0;   // mm traveled at lift height between curves
  double contact_time = 0.0;    // s
  double travel_time = 0.0;     // s
  double total_time() const { return contact_time + travel_time; }
};

inline SealSummary summarize(const SealPlan& plan) {
  SealSummary s;
  s.curves = plan.toolpaths.size();
  for (std::size_t c = 0; c < plan.toolpaths.size(); ++c) {
    const auto& pts = plan.toolpaths[c].points;
    s.samples += pts.size();
    s.contact_length += geometry::polyline_length(pts);
    if (c > 0) s.travel_length += geometry::distance(plan.toolpaths[c - 1].points.back(), pts.front());
  }
  s.contact_time = s.contact_length / plan.stack.seal_speed;
  s.travel_time = s.travel_length / plan.travel_speed;
  return s;
}

}  // namespace duomorph::sealer
