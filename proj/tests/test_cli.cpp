#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "cli_run.hpp"
#include "scratch.hpp"
#include "stl_check.hpp"

namespace fs = std::filesystem;
using clirun::run;

TEST(Cli, HelpAndUsage) {
  const auto help = run("--help");
  EXPECT_EQ(help.status, 0);
  for (const char* cmd : {"seal", "export", "merge", "plan4d", "texture", "validate", "serve"}) {
    EXPECT_NE(help.out.find(cmd), std::string::npos) << cmd;
  }
  EXPECT_EQ(run("").status, 2);
  EXPECT_EQ(run("frobnicate").status, 2);
  EXPECT_EQ(run("texture --width 10").status, 2);
}

TEST(Cli, SealWritesAndIsDeterministic) {
  scratch::Dir dir;
  const auto project = dir.sample();
  const auto r1 = run("--project " + project.string() + " seal");
  ASSERT_EQ(r1.status, 0) << r1.err;
  const auto out = project.parent_path() / "out" / "seal.gcode";
  const auto first = scratch::slurp(out);
  const auto r2 = run("--project " + project.string() + " seal");
  EXPECT_EQ(r2.out, r1.out);
  EXPECT_EQ(scratch::slurp(out), first);
  EXPECT_NE(first.find(" F300"), std::string::npos);
}

TEST(Cli, DryRunWritesNothing) {
  scratch::Dir dir;
  const auto project = dir.sample();
  const auto r = run("--project " + project.string() + " --dry-run seal");
  EXPECT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("dry run"), std::string::npos);
  EXPECT_FALSE(fs::exists(project.parent_path() / "out"));
  const auto before = scratch::slurp(project);
  EXPECT_EQ(run("--project " + project.string() + " --dry-run merge").status, 0);
  EXPECT_FALSE(fs::exists(project.parent_path() / "out"));
  EXPECT_EQ(scratch::slurp(project), before);
}

TEST(Cli, ExportStl) {
  scratch::Dir dir;
  const auto project = dir.sample();
  const auto r = run("--project " + project.string() + " export --out " + (dir / "x.stl").string());
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("triangles: 56 (marker 44)"), std::string::npos);
  EXPECT_NE(r.out.find("marker center: (5.000, 5.000)"), std::string::npos);
  const auto stl = stlcheck::read(scratch::slurp(dir / "x.stl"));
  EXPECT_EQ(stl.tris.size(), 56u);
  // Missing mesh: exit 2 naming the path.
  auto doc = scratch::slurp(project);
  doc.replace(doc.find("parts/handle.stl"), 16, "parts/ghost.stl");
  scratch::spit(project, doc);
  const auto bad = run("--project " + project.string() + " export");
  EXPECT_EQ(bad.status, 2);
  EXPECT_NE(bad.err.find("ghost.stl"), std::string::npos);
}

TEST(Cli, MergeUpdatesProjectWithSeedTime) {
  scratch::Dir dir;
  const auto project = dir.sample();
  const std::string base = "--project " + project.string() + " --seed-time 2024-05-01T12:00:00Z ";
  const auto r = run(base + "merge");
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("offset: (23.500, 31.250) mm"), std::string::npos);
  const auto merged = scratch::slurp(project.parent_path() / "out" / "merged.gcode");
  const auto doc = scratch::slurp(project);
  EXPECT_NE(doc.find("2024-05-01T12:00:00Z"), std::string::npos);
  EXPECT_NE(doc.find("\"offset\": [\n    23.5"), std::string::npos);
  // Second run: same bytes for the G-code and the project file.
  ASSERT_EQ(run(base + "merge").status, 0);
  EXPECT_EQ(scratch::slurp(project.parent_path() / "out" / "merged.gcode"), merged);
  EXPECT_EQ(scratch::slurp(project), doc);
}

TEST(Cli, MergeBedCeiling) {
  scratch::Dir dir;
  const auto project = dir.sample();
  const auto out = dir / "m.gcode";
  ASSERT_EQ(run("--project " + project.string() + " --bed-ceiling 25 --out " + out.string() + " merge").status, 0);
  const auto text = scratch::slurp(out);
  const auto pause = text.find("M400 U1");
  ASSERT_NE(pause, std::string::npos);
  std::size_t at = pause;
  while ((at = text.find("M140 S", at)) != std::string::npos) {
    EXPECT_LE(std::stod(text.substr(at + 6)), 25.0);
    ++at;
  }
}

TEST(Cli, MergeErrorsExitTwo) {
  scratch::Dir dir;
  const auto project = dir.sample();
  scratch::spit(dir / "flat.gcode", "G28\n;LAYER:0\nG1 X10 Y10 E1\nG1 X20 Y10 E2\n");
  const auto r = run("--project " + project.string() + " merge --sliced " + (dir / "flat.gcode").string());
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("marker_not_found"), std::string::npos);
  EXPECT_EQ(run("--project " + project.string() + " merge --sliced " + (dir / "none.gcode").string()).status, 2);
}

TEST(Cli, Plan4dTable) {
  const auto r = run("plan4d --length 100 --circle");
  ASSERT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("target curvature: 0.0628 /mm"), std::string::npos);
  EXPECT_EQ(r.out.rfind("WARNING: uncalibrated", 0), 0u);
  // Rows sorted by error ascending.
  std::vector<double> errors;
  std::istringstream in(r.out);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    int rank;
    double w, frac, k, err;
    int n;
    if (row >> rank >> w >> n >> frac >> k >> err) errors.push_back(err);
  }
  ASSERT_EQ(errors.size(), 4u);
  EXPECT_TRUE(std::is_sorted(errors.begin(), errors.end()));
  EXPECT_EQ(run("plan4d --length 20 --circle").status, 2);
  EXPECT_EQ(run("plan4d --circle --curvature 0.05").status, 2);
}

TEST(Cli, Plan4dWithCalibration) {
  scratch::Dir dir;
  scratch::spit(dir / "cal.json", R"({"strip_length_mm": 100, "bonding_point_width_mm": 3, "measurements": [
    {"width_mm": 3, "bonding_point_count": 3, "curvature_per_mm": 0.07},
    {"width_mm": 3, "bonding_point_count": 13, "curvature_per_mm": 0.05},
    {"width_mm": 9, "bonding_point_count": 3, "curvature_per_mm": 0.09},
    {"width_mm": 9, "bonding_point_count": 13, "curvature_per_mm": 0.06}]})");
  const auto r = run("plan4d --calibration " + (dir / "cal.json").string());
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(r.out.find("WARNING"), std::string::npos);
  scratch::spit(dir / "bad.json", R"({"strip_length_mm": 100, "bonding_point_width_mm": 3, "measurements": [
    {"width_mm": 3, "bonding_point_count": 3, "curvature_per_mm": 0.05},
    {"width_mm": 3, "bonding_point_count": 13, "curvature_per_mm": 0.07}]})");
  const auto bad = run("plan4d --calibration " + (dir / "bad.json").string());
  EXPECT_EQ(bad.status, 2);
  EXPECT_NE(bad.err.find("non_monotone"), std::string::npos);
}

TEST(Cli, Texture) {
  const auto r = run("texture --width 20 --depth 10 --diameter 2 --pitch 4");
  ASSERT_EQ(r.status, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["count"].get<std::size_t>(), j["centers"].size());
  EXPECT_EQ(run("texture --width 20 --depth 10 --diameter 2 --pitch 4").out, r.out);
  EXPECT_EQ(run("texture --width 20 --depth 10 --diameter 5 --pitch 4").status, 2);
}

TEST(Cli, Validate) {
  scratch::Dir dir;
  const auto project = dir.sample();
  const auto ok = run("--project " + project.string() + " validate");
  EXPECT_EQ(ok.status, 0) << ok.err;
  EXPECT_NE(ok.out.find("project ok"), std::string::npos);
  fs::remove(project.parent_path() / "patterns.svg");
  const auto bad = run("--project " + project.string() + " validate");
  EXPECT_EQ(bad.status, 2);
  EXPECT_NE(bad.err.find("patterns[0]"), std::string::npos);
  EXPECT_EQ(run("--project " + (dir / "nope.json").string() + " validate").status, 2);
}

TEST(Cli, InternalErrorExitsOne) {
  scratch::Dir dir;
  const auto project = dir.sample();
  // The output directory cannot be created: an environment failure, not bad input.
  const auto r = run("--project " + project.string() + " seal --out /proc/duomorph-test/seal.gcode");
  EXPECT_EQ(r.status, 1) << r.err;
}

TEST(Cli, ServeAnnouncesAndAnswers) {
  scratch::Dir dir;
  const auto project = dir.sample();
  const auto r = clirun::serve_once(project, "/api/status");
  EXPECT_NE(r.first.find("serving "), std::string::npos);
  EXPECT_NE(r.second.find("\"state\": \"idle\""), std::string::npos);
}
