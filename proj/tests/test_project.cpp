#include <gtest/gtest.h>

#include "duomorph/morph4d.hpp"
#include "duomorph/project.hpp"
#include "replay.hpp"
#include "scratch.hpp"
#include "stl_check.hpp"

using namespace duomorph;
using namespace duomorph::project;

namespace {

Workspace sample() { return load_workspace(fs::path(DUOMORPH_SAMPLE_PROJECT) / "project.json"); }

std::string sample_sliced() { return read_file(fs::path(DUOMORPH_SAMPLE_PROJECT) / "sliced" / "print.gcode"); }

std::string schema_field(const Json& j) {
  try {
    from_json(j);
  } catch (const ProjectError& e) {
    EXPECT_EQ(e.code(), "project_schema");
    return e.field();
  }
  ADD_FAILURE() << "no error for " << j.dump();
  return {};
}

}  // namespace

TEST(Document, RoundTrip) {
  const auto ws = sample();
  EXPECT_EQ(ws.project.name, "tote-panel");
  EXPECT_EQ(ws.project.stack, "film_film");
  EXPECT_FALSE(ws.project.profile);
  const auto again = from_json(Json::parse(dump(ws.project)));
  EXPECT_EQ(dump(again), dump(ws.project));
  EXPECT_EQ(dump(ws.project), read_file(fs::path(DUOMORPH_SAMPLE_PROJECT) / "project.json"));
}

TEST(Document, FieldPathsInErrors) {
  const auto base = to_json(sample().project);
  auto j = base;
  j.erase("stack");
  EXPECT_EQ(schema_field(j), "stack");
  j = base;
  j["region"]["width_mm"] = -4;
  EXPECT_EQ(schema_field(j), "region.width_mm");
  j = base;
  j["marker"]["center"] = Json::array({1});
  EXPECT_EQ(schema_field(j), "marker.center");
  j = base;
  j["marker"]["arm_width_mm"] = 20;
  EXPECT_EQ(schema_field(j), "marker");
  j = base;
  j["outputs"]["seal"] = 3;
  EXPECT_EQ(schema_field(j), "outputs.seal");
  j = base;
  j["patterns"] = "one.svg";
  EXPECT_EQ(schema_field(j), "patterns");
  EXPECT_THROW(from_json(Json::array()), ProjectError);
}

TEST(Document, DefaultsForOptionalFields) {
  const auto p = from_json(Json{{"region", {{"width_mm", 200}, {"depth_mm", 150}, {"origin", {10, 20}}}},
                                {"stack", "fabric_fabric"}});
  EXPECT_EQ(p.marker.center, (Point2{15, 25}));  // region origin + (5, 5)
  EXPECT_EQ(p.outputs.merged, "out/merged.gcode");
  EXPECT_DOUBLE_EQ(p.chord_tolerance, 0.05);
  EXPECT_FALSE(p.sliced);
  EXPECT_FALSE(p.job);
}

TEST(Document, SyntaxErrorAndMissingFile) {
  scratch::Dir dir;
  scratch::spit(dir / "p.json", "{ not json");
  try {
    load_workspace(dir / "p.json");
    FAIL();
  } catch (const ProjectError& e) {
    EXPECT_EQ(e.code(), "project_syntax");
  }
  EXPECT_THROW(load_workspace(dir / "absent.json"), ProjectError);
}

TEST(References, ReportsEveryProblem) {
  auto ws = sample();
  EXPECT_TRUE(check_references(ws, materials::default_profile()).empty());
  ws.project.stack = "paper_paper";
  ws.project.parts.push_back("parts/nope.stl");
  ws.project.patterns.clear();
  const auto issues = check_references(ws, materials::default_profile());
  ASSERT_EQ(issues.size(), 3u);
  EXPECT_EQ(issues[0].field, "stack");
  EXPECT_EQ(issues[1].field, "parts[1]");
  EXPECT_EQ(issues[2].field, "patterns");
  try {
    require_references(ws, materials::default_profile());
    FAIL();
  } catch (const ProjectError& e) {
    EXPECT_EQ(e.code(), "invalid_reference");
  }
}

TEST(PathsFile, RoundTrip) {
  const std::vector<geometry::PlanarPath> paths{geometry::make_path({{0, 0}, {10, 0}, {10, 5}}, true),
                                                geometry::make_path({{1.25, 2.5}, {3, 4}}, false)};
  const auto back = parse_paths_json(dump_paths_json(paths));
  EXPECT_EQ(back, paths);
  EXPECT_THROW(parse_paths_json(R"({"paths": [{"points": [[0, 0]]}]})"), GeometryError);
  EXPECT_THROW(parse_paths_json(R"({"lines": []})"), GeometryError);
}

TEST(Patterns, SampleSvgLoads) {
  const auto ws = sample();
  const auto paths = load_patterns(ws);
  ASSERT_GE(paths.size(), 4u);
  EXPECT_TRUE(geometry::check_within_region(paths, ws.project.region).ok());
  // Scaling the SVG scales every vertex.
  const auto doubled = load_patterns(ws, 2.0);
  ASSERT_EQ(doubled.size(), paths.size());
  EXPECT_NEAR(doubled[0].vertices()[0].x, 2.0 * paths[0].vertices()[0].x, 1e-9);
}

TEST(Workflow, SealOnSample) {
  const auto out = run_seal(sample());
  EXPECT_EQ(out.text, gcode::emit(out.program));
  EXPECT_EQ(out.summary.curves, out.plan.toolpaths.size());
  EXPECT_NE(out.text.find("M109 S250"), std::string::npos);
  EXPECT_NE(out.text.find("M190 S50"), std::string::npos);
  const auto summary = format_summary(out.summary);
  EXPECT_NE(summary.find("estimated time"), std::string::npos);
}

TEST(Workflow, ExportOnSample) {
  const auto out = run_export(sample());
  const auto file = stlcheck::read(out.bytes);
  EXPECT_EQ(file.tris.size(), out.triangles);
  EXPECT_EQ(out.triangles, 12u + 44u);
  EXPECT_TRUE(out.warnings.empty());
  auto ws = sample();
  ws.project.parts = {"parts/missing.stl"};
  try {
    run_export(ws);
    FAIL();
  } catch (const ProjectError& e) {
    EXPECT_EQ(e.code(), "missing_file");
    EXPECT_EQ(e.field(), "parts[0]");
  }
}

TEST(Workflow, MergeOnSample) {
  const auto out = run_merge(sample(), sample_sliced());
  EXPECT_NEAR(out.report.offset.x, 23.5, 0.05);
  EXPECT_NEAR(out.report.offset.y, 31.25, 0.05);
  EXPECT_FALSE(out.report.aligned);
  EXPECT_GT(out.report.stripped_commands, 0u);
  EXPECT_EQ(out.text, gcode::emit(out.program));
  // Deterministic.
  EXPECT_EQ(run_merge(sample(), sample_sliced()).text, out.text);
  // Bed ceiling override.
  const auto cooler = run_merge(sample(), sample_sliced(), Overrides{{}, 25.0, {}});
  for (const auto& cmd : cooler.program.commands) {
    if (const auto* b = cmd.as<gcode::BedTemp>(); b && cmd.phase == gcode::Phase::printing) {
      EXPECT_LE(b->celsius, 25.0);
    }
  }
  const auto report = format_merge_report(out.report);
  EXPECT_NE(report.find("offset: (23.500, 31.250) mm"), std::string::npos);
}

TEST(Workflow, JobManifest) {
  merger::MergeReport r;
  r.offset = {1.5, -2};
  r.stripped_commands = 7;
  const auto j = job_manifest(r, "out/merged.gcode", "2024-01-01T00:00:00Z");
  EXPECT_EQ(j["created"], "2024-01-01T00:00:00Z");
  EXPECT_EQ(j["offset"], Json::array({1.5, -2.0}));
  EXPECT_EQ(j["stripped_commands"], 7);
  EXPECT_EQ(utc_now_iso8601().size(), 20u);
}

TEST(Files, AtomicWriteLeavesNoTemp) {
  scratch::Dir dir;
  write_file_atomic(dir / "a/b/c.txt", "hello");
  EXPECT_EQ(read_file(dir / "a/b/c.txt"), "hello");
  write_file_atomic(dir / "a/b/c.txt", "again");
  EXPECT_EQ(read_file(dir / "a/b/c.txt"), "again");
  EXPECT_FALSE(fs::exists(dir / "a/b/c.txt.tmp"));
}

TEST(Preview, SealingOnly) {
  const auto ws = sample();
  const auto j = preview(ws, std::nullopt);
  EXPECT_TRUE(j["sealing_only"].get<bool>());
  EXPECT_FALSE(j.contains("print_first_layer"));
  bool flagged = false;
  for (const auto& w : j["warnings"]) flagged |= w.get<std::string>().find("sealing-only") != std::string::npos;
  EXPECT_TRUE(flagged);
  EXPECT_EQ(j["marker"]["outline"].size(), 12u);
  EXPECT_DOUBLE_EQ(j["stack"]["seal_speed_mm_s"].get<double>(), 5.0);
}

// The sealing polylines in the payload are the ones the seal G-code traces.
TEST(Preview, SealingPolylinesMatchSealGcode) {
  const auto ws = sample();
  const auto j = preview(ws, std::nullopt);
  const auto text = run_seal(ws).text;
  const double seal_z = j["stack"]["seal_z_mm"].get<double>();
  std::vector<std::vector<Point2>> traced;
  bool in = false;
  for (const auto& s : replay::run(text)) {
    const bool at_seal = std::abs(s.after.z - seal_z) < 1e-9 && std::abs(s.before.z - seal_z) < 1e-9;
    if (at_seal && !s.rapid && replay::xy_length(s) > 0) {
      if (!in) traced.push_back({{s.before.x, s.before.y}});
      traced.back().push_back({s.after.x, s.after.y});
      in = true;
    } else {
      in = false;
    }
  }
  ASSERT_EQ(traced.size(), j["sealing"].size());
  for (std::size_t i = 0; i < traced.size(); ++i) {
    const auto& pts = j["sealing"][i]["points"];
    ASSERT_EQ(pts.size(), traced[i].size()) << i;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      EXPECT_NEAR(pts[k][0].get<double>(), traced[i][k].x, 5e-4);
      EXPECT_NEAR(pts[k][1].get<double>(), traced[i][k].y, 5e-4);
    }
  }
}

TEST(Preview, WithUpload) {
  const auto j = preview(sample(), sample_sliced());
  EXPECT_FALSE(j["sealing_only"].get<bool>());
  EXPECT_GT(j["print_first_layer"].size(), 0u);
  EXPECT_NEAR(j["offset"]["dx"].get<double>(), 23.5, 0.05);
  std::vector<std::string> phases;
  for (const auto& p : j["phases"]) phases.push_back(p["phase"]);
  EXPECT_EQ(phases.front(), "preamble");
  EXPECT_NE(std::find(phases.begin(), phases.end(), "pause"), phases.end());
  EXPECT_EQ(phases.back(), "postamble");
  // First-layer print lines are in the design frame: nothing near the marker.
  const auto box = sample().project.marker.bounds();
  for (const auto& line : j["print_first_layer"]) {
    for (const auto& p : line) EXPECT_FALSE(box.contains({p[0].get<double>(), p[1].get<double>()}));
  }
}

TEST(Preview, MalformedUploads) {
  try {
    parse_upload(std::string("G1 X1\n\x01\x02\x03 junk\n;LAYER:0\n"));
    FAIL();
  } catch (const PreviewError& e) {
    EXPECT_EQ(e.code(), "malformed_gcode");
    ASSERT_FALSE(e.diagnostics.empty());
    EXPECT_EQ(e.diagnostics[0].line, 2u);
  }
  try {
    parse_upload("G1 X1 Y1\nG1 X2 Y2\n");
    FAIL();
  } catch (const PreviewError& e) {
    EXPECT_NE(std::string(e.what()).find("no detectable layers"), std::string::npos);
  }
}

TEST(ShippedFiles, ProfileAndCalibrationMatchBuiltins) {
  const fs::path dir = fs::path(DUOMORPH_SAMPLE_PROJECT).parent_path() / "profiles";
  const auto profile = materials::parse_profile(read_file(dir / "bambu_a1.json"));
  EXPECT_EQ(profile, materials::default_profile());
  const auto model = morph4d::calibration_from_json(Json::parse(read_file(dir / "curvature_placeholder.json")));
  EXPECT_EQ(model.values(), morph4d::default_model().values());
  EXPECT_FALSE(model.calibrated());
}
