#include <gtest/gtest.h>

#include <random>

#include "duomorph/merger.hpp"
#include "duomorph/sealer.hpp"
#include "replay.hpp"
#include "slice_synth.hpp"

using namespace duomorph;
using namespace duomorph::merger;
using geometry::Point2;

namespace {

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

gcode::Program seal_program() {
  const std::vector<geometry::PlanarPath> patterns{
      geometry::make_path({{40, 40}, {120, 40}, {120, 100}, {40, 100}}, true)};
  return sealer::compile_seal(
      sealer::plan_seal(patterns, materials::default_profile().stack("film_film"), geometry::PrintRegion(256, 256)));
}

std::string sliced(Point2 offset, synth::Dialect d, bool with_block = true) {
  synth::Options o;
  o.dialect = d;
  o.marker = synth::Cross{5.0 + offset.x, 5.0 + offset.y, 10.0, 2.0};
  if (with_block) o.blocks.push_back({60 + offset.x, 60 + offset.y, 80 + offset.x, 75 + offset.y});
  o.bed_temp = 65;
  return synth::generate(o);
}

// Extrusion length of moves with both ends outside `box` (oracle side).
double length_outside(const std::string& text, const geometry::Bounds& box) {
  double total = 0.0;
  for (const auto& s : replay::run(text)) {
    if (!replay::extrudes(s) || !std::isfinite(s.before.x) || !std::isfinite(s.before.y)) continue;
    const Point2 a{s.before.x, s.before.y}, b{s.after.x, s.after.y};
    if (!box.contains(a) || !box.contains(b)) total += replay::xy_length(s);
  }
  return total;
}

FabJob job_for(const std::string& text) {
  FabJob job;
  job.seal = seal_program();
  job.print = gcode::parse(text);
  job.alert_tones = materials::default_profile().printer.alert_tones;
  return job;
}

}  // namespace

TEST(Recover, KnownOffsetsAcrossDialects) {
  for (auto d : {synth::Dialect::cura, synth::Dialect::prusa, synth::Dialect::bambu}) {
    for (Point2 off : {Point2{0, 0}, Point2{7.5, -3.25}, Point2{-41.125, 18.0}}) {
      const auto r = recover_offset(gcode::parse(sliced(off, d)), AlignmentMarker{});
      EXPECT_NEAR(r.dx, off.x, 0.05);
      EXPECT_NEAR(r.dy, off.y, 0.05);
      EXPECT_EQ(r.aligned, off == Point2{});
    }
  }
}

TEST(Recover, RandomOffsets) {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int i = 0; i < 100; ++i) {
    const Point2 off{round3(u(rng)), round3(u(rng))};
    const auto r = recover_offset(gcode::parse(sliced(off, static_cast<synth::Dialect>(i % 3))), AlignmentMarker{});
    ASSERT_LE(std::hypot(r.dx - off.x, r.dy - off.y), 0.05) << i;
  }
}

TEST(Recover, Failures) {
  synth::Options none;
  none.marker.reset();
  none.blocks.push_back({20, 20, 40, 40});
  try {
    recover_offset(gcode::parse(synth::generate(none)), AlignmentMarker{});
    FAIL();
  } catch (const MergeError& e) {
    EXPECT_EQ(e.code(), "marker_not_found");
  }
  // Two crosses: ambiguous, and the message lists both.
  const std::string two = sliced({0, 0}, synth::Dialect::prusa, false);
  synth::Options o;
  o.dialect = synth::Dialect::prusa;
  o.marker = synth::Cross{100, 100, 10, 2};
  auto p = gcode::parse(synth::generate(o));
  auto q = gcode::parse(two);
  // Splice the second cross into the first file's first layer.
  const auto layer = p.first_layer();
  auto& dst = q.commands;
  const auto at = q.first_layer()->second;
  dst.insert(dst.begin() + static_cast<long>(at), p.commands.begin() + static_cast<long>(layer->first + 2),
             p.commands.begin() + static_cast<long>(layer->second));
  const std::string spliced = gcode::emit(q);
  try {
    recover_offset(gcode::parse(spliced), AlignmentMarker{});
    FAIL();
  } catch (const MergeError& e) {
    EXPECT_EQ(e.code(), "marker_ambiguous");
    EXPECT_NE(std::string(e.what()).find("(100.000, 100.000)"), std::string::npos);
  }
  EXPECT_THROW(recover_offset(gcode::parse("G1 X1 Y1 E1\n"), AlignmentMarker{}), MergeError);
}

TEST(Recover, SquareIslandIsNotAMarker) {
  synth::Options o;
  o.marker.reset();
  o.blocks.push_back({0, 0, 10, 10});  // same footprint as the marker box
  EXPECT_THROW(recover_offset(gcode::parse(synth::generate(o)), AlignmentMarker{}), MergeError);
}

TEST(Strip, RemovesOnlyMarkerMoves) {
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int i = 0; i < 30; ++i) {
    const Point2 off{round3(u(rng)), round3(u(rng))};
    const std::string text = sliced(off, static_cast<synth::Dialect>(i % 3));
    const auto program = gcode::parse(text);
    const AlignmentMarker marker;
    const auto box = marker.bounds(off).padded(kStripPadding);
    const auto result = strip_marker_moves(program, marker, off);
    const std::string out = gcode::emit(result.program);
    EXPECT_NEAR(length_outside(out, box), length_outside(text, box), 1e-3) << i;
    // No extrusion survives inside the box on the first layer.
    const auto again = gcode::parse(out);
    const auto layer = again.first_layer();
    for (const auto& m : gcode::motion_segments(again, layer->first, layer->second)) {
      if (m.extruding()) {
        EXPECT_FALSE(box.contains({m.from.x, m.from.y}) && box.contains({m.to.x, m.to.y}));
      }
    }
    EXPECT_GT(result.removed, 0u);
    EXPECT_GT(result.removed_length, 40.0);
  }
}

TEST(Strip, AbsoluteExtrusionIsResynchronized) {
  const std::string text = sliced({3, 4}, synth::Dialect::cura);
  const auto out = gcode::emit(strip_marker_moves(gcode::parse(text), AlignmentMarker{}, {3, 4}).program);
  EXPECT_NE(out.find("G92 E"), std::string::npos);
  // Every kept extrusion move advances E by the same amount as in the source.
  const auto before = replay::run(text), after = replay::run(out);
  std::vector<double> a, b;
  const auto box = AlignmentMarker{}.bounds({3, 4}).padded(kStripPadding);
  for (const auto& s : before) {
    if (replay::extrudes(s) && !(box.contains({s.before.x, s.before.y}) && box.contains({s.after.x, s.after.y}))) {
      a.push_back(s.after.e - s.before.e);
    }
  }
  for (const auto& s : after) {
    if (replay::extrudes(s)) b.push_back(s.after.e - s.before.e);
  }
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
}

TEST(Strip, RefusesWhenMarkerOverlapsPart) {
  synth::Options o;
  o.blocks.push_back({2, 2, 30, 8});  // runs through the marker
  try {
    strip_marker_moves(gcode::parse(synth::generate(o)), AlignmentMarker{}, {0, 0});
    FAIL();
  } catch (const MergeError& e) {
    EXPECT_EQ(e.code(), "marker_overlaps_part");
  }
}

TEST(Merge, Invariants) {
  for (auto d : {synth::Dialect::cura, synth::Dialect::prusa, synth::Dialect::bambu}) {
    const auto result = merge(job_for(sliced({12.25, -7.5}, d)));
    const auto& cmds = result.program.commands;
    std::size_t pauses = 0, pause_at = 0, tones = 0;
    std::size_t last_sealing = 0;
    for (std::size_t i = 0; i < cmds.size(); ++i) {
      if (cmds[i].as<gcode::PauseMacro>()) {
        ++pauses;
        pause_at = i;
      }
      if (cmds[i].as<gcode::Tone>()) {
        EXPECT_EQ(cmds[i].phase, gcode::Phase::pause);
        ++tones;
      }
      if (cmds[i].phase == gcode::Phase::sealing) last_sealing = i;
      if (const auto* b = cmds[i].as<gcode::BedTemp>(); b && cmds[i].phase == gcode::Phase::printing) {
        EXPECT_LE(b->celsius, 30.0);
      }
      if (const auto* m = cmds[i].as<gcode::Move>(); m && cmds[i].phase == gcode::Phase::sealing) {
        EXPECT_FALSE(m->e.has_value());
      }
    }
    EXPECT_EQ(pauses, 1u);
    EXPECT_EQ(tones, 3u);
    for (std::size_t i = 0; i < cmds.size(); ++i) {
      if (cmds[i].as<gcode::Tone>()) {
        EXPECT_LT(i, pause_at);
      }
    }
    // Sealing wholly precedes the first extrusion of the print.
    const auto reparsed = gcode::parse(gcode::emit(result.program));
    for (const auto& m : gcode::motion_segments(reparsed)) {
      if (m.extruding()) {
        EXPECT_GT(m.command_index, last_sealing);
        EXPECT_GT(m.command_index, pause_at);
        break;
      }
    }
    EXPECT_NEAR(result.report.offset.x, 12.25, 0.05);
    EXPECT_GE(result.report.bed_replacements, 2u);
  }
}

TEST(Merge, PrintLandsOnDesignFrame) {
  const Point2 off{-20.5, 33.0};
  const auto result = merge(job_for(sliced(off, synth::Dialect::bambu)));
  const auto text = gcode::emit(result.program);
  // The block was sliced at (60, 60)+offset; after merging it is back at (60, 60).
  geometry::Bounds printed;
  for (const auto& s : replay::run(text)) {
    if (replay::extrudes(s)) {
      printed.add({s.before.x, s.before.y});
      printed.add({s.after.x, s.after.y});
    }
  }
  EXPECT_NEAR(printed.min.x, 60.225, 0.01);
  EXPECT_NEAR(printed.min.y, 60.225, 0.01);
  EXPECT_NEAR(printed.max.x, 79.775, 0.01);
}

TEST(Merge, KeepsSourceOrder) {
  const auto result = merge(job_for(sliced({1, 2}, synth::Dialect::cura)));
  std::size_t last = 0;
  for (const auto& cmd : result.program.commands) {
    if (cmd.phase != gcode::Phase::printing || cmd.source_line == 0) continue;
    EXPECT_GT(cmd.source_line, last);
    last = cmd.source_line;
  }
}

TEST(Merge, ExplicitOffsetAndAlignment) {
  auto job = job_for(sliced({0.02, -0.01}, synth::Dialect::prusa));
  const auto r = merge(job);
  EXPECT_TRUE(r.report.aligned);
  job.offset = Point2{0.0, 0.0};
  EXPECT_TRUE(merge(job).report.aligned);
}

TEST(Merge, LateHomingIsRefused) {
  synth::Options o;
  o.late_z_home = true;
  try {
    merge(job_for(synth::generate(o)));
    FAIL();
  } catch (const MergeError& e) {
    EXPECT_EQ(e.code(), "homing_after_first_layer");
  }
  EXPECT_THROW(merge(job_for("G1 X1 Y1\n")), MergeError);
}

TEST(Merge, ForeignPauseIsReported) {
  std::string text = sliced({0, 0}, synth::Dialect::cura);
  text.insert(text.find(";LAYER:2"), "M0\n");
  const auto r = merge(job_for(text));
  ASSERT_FALSE(r.report.warnings.empty());
  EXPECT_NE(r.report.warnings.back().find("own pause"), std::string::npos);
}
