// duomorph: heat-sealing + FDM hybrid job tool.
//
// Exit codes: 0 success, 1 internal error, 2 user or input error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "duomorph/morph4d.hpp"
#include "duomorph/project.hpp"
#include "duomorph/server_http.hpp"

namespace {

using namespace duomorph;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUser = 2;

struct Globals {
  std::string project = "project.json";
  std::optional<std::string> profile;
  std::optional<std::string> out;
  bool dry_run = false;
  std::optional<double> bed_ceiling;
  std::optional<double> svg_scale;
  std::optional<std::string> seed_time;

  project::Overrides overrides() const { return {profile, bed_ceiling, svg_scale}; }
};

void emit_output(const Globals& g, const fs::path& path, std::string_view data, const char* what) {
  if (g.dry_run) {
    std::cout << "dry run: " << what << " not written (" << path.string() << ")\n";
    return;
  }
  project::write_file_atomic(path, data);
  std::cout << "wrote " << what << ": " << path.string() << "\n";
}

fs::path output_path(const Globals& g, const project::Workspace& ws, const std::string& project_default) {
  return g.out ? fs::path(*g.out) : ws.resolve(project_default);
}

int cmd_seal(const Globals& g) {
  const auto ws = project::load_workspace(g.project);
  const auto out = project::run_seal(ws, g.overrides());
  for (const auto& w : out.plan.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << project::format_summary(out.summary);
  emit_output(g, output_path(g, ws, ws.project.outputs.seal), out.text, "sealing G-code");
  return kExitOk;
}

int cmd_export(const Globals& g) {
  const auto ws = project::load_workspace(g.project);
  const auto out = project::run_export(ws, g.overrides());
  for (const auto& w : out.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "triangles: " << out.triangles << " (marker " << out.marker_triangles << ")\n";
  std::cout << "marker center: (" << gcode::format_fixed(ws.project.marker.center.x, 3) << ", "
            << gcode::format_fixed(ws.project.marker.center.y, 3) << ")\n";
  emit_output(g, output_path(g, ws, ws.project.outputs.parts), out.bytes, "STL");
  return kExitOk;
}

int cmd_merge(const Globals& g, const std::optional<std::string>& sliced_arg) {
  auto ws = project::load_workspace(g.project);
  fs::path sliced_path;
  if (sliced_arg) {
    sliced_path = *sliced_arg;
  } else if (ws.project.sliced) {
    sliced_path = ws.resolve(*ws.project.sliced);
  } else {
    throw ProjectError("missing_sliced", "no sliced G-code: pass --sliced or set \"sliced\" in the project", "sliced");
  }
  if (!fs::is_regular_file(sliced_path)) {
    throw ProjectError("missing_file", "sliced G-code not found: " + sliced_path.string(), "sliced");
  }
  const auto out = project::run_merge(ws, project::read_file(sliced_path), g.overrides());
  std::cout << project::format_merge_report(out.report);
  const auto merged_path = output_path(g, ws, ws.project.outputs.merged);
  emit_output(g, merged_path, out.text, "merged G-code");
  if (!g.dry_run) {
    ws.project.offset = out.report.offset;
    ws.project.job = project::job_manifest(out.report, ws.project.outputs.merged,
                                           g.seed_time.value_or(project::utc_now_iso8601()));
    project::write_file_atomic(g.project, project::dump(ws.project));
  }
  return kExitOk;
}

std::string fixed(double v, int decimals) { return gcode::format_fixed(v, decimals); }

int cmd_plan4d(const Globals& g, double length, bool circle, std::optional<double> curvature,
               const std::optional<std::string>& calibration) {
  const auto model = calibration ? morph4d::calibration_from_json(project::Json::parse(project::read_file(*calibration)))
                                 : morph4d::default_model();
  if (circle && curvature) throw Morph4dError("invalid_target", "use either --circle or --curvature, not both");
  const bool to_circle = circle || !curvature;
  const auto plan = to_circle ? morph4d::plan_for_circle(model, length)
                              : morph4d::plan_for_curvature(model, length, *curvature);
  std::string text;
  if (!model.calibrated()) text += "WARNING: " + model.note() + "\n";
  text += "target curvature: " + fixed(plan.target_curvature, 4) + " /mm";
  text += to_circle ? " (closed circle, strip length " + fixed(length, 1) + " mm)\n" : " (strip length " + fixed(length, 1) + " mm)\n";
  text += "rank  width_mm  points  bonded_fraction  curvature_per_mm  error_pct\n";
  int rank = 1;
  for (const auto& c : plan.candidates) {
    char line[160];
    std::snprintf(line, sizeof line, "%4d  %8s  %6d  %15s  %16s  %9s\n", rank++, fixed(c.spec.width, 1).c_str(),
                  c.spec.bonding_point_count, fixed(morph4d::bonded_fraction(c.spec), 3).c_str(),
                  fixed(c.curvature, 5).c_str(), fixed(100.0 * c.relative_error, 2).c_str());
    text += line;
  }
  if (g.out && !g.dry_run) {
    project::write_file_atomic(*g.out, text);
  }
  std::cout << text;
  return kExitOk;
}

int cmd_texture(const Globals& g, double width, double depth, double ox, double oy, double diameter, double pitch) {
  const geometry::Bounds region{{ox, oy}, {ox + width, oy + depth}};
  const auto tex = morph4d::generate_dot_texture(region, diameter, pitch);
  project::Json centers = project::Json::array();
  for (const auto& c : tex.centers) centers.push_back({c.x, c.y});
  const project::Json j{{"region", {{"origin", {ox, oy}}, {"width_mm", width}, {"depth_mm", depth}}},
                        {"dot_diameter_mm", diameter},
                        {"pitch_mm", pitch},
                        {"count", tex.centers.size()},
                        {"coverage", tex.coverage},
                        {"centers", centers}};
  const std::string text = j.dump(2) + "\n";
  if (g.out) {
    std::cout << "dots: " << tex.centers.size() << ", coverage " << fixed(100.0 * tex.coverage, 2) << "%\n";
    emit_output(g, *g.out, text, "dot texture");
  } else {
    std::cout << text;
  }
  return kExitOk;
}

int cmd_validate(const Globals& g, const std::optional<std::string>& calibration) {
  int problems = 0;
  if (calibration) {
    try {
      const auto m = morph4d::calibration_from_json(project::Json::parse(project::read_file(*calibration)));
      std::cout << "calibration ok: " << m.widths().size() << " widths x " << m.counts().size() << " counts\n";
    } catch (const std::exception& e) {
      std::cerr << "calibration: " << e.what() << "\n";
      ++problems;
    }
  }
  const auto ws = project::load_workspace(g.project);
  const auto profile = project::load_profile(ws, g.profile);
  for (const auto& issue : project::check_references(ws, profile)) {
    std::cerr << issue.field << ": " << issue.message << "\n";
    ++problems;
  }
  if (problems == 0) {
    const auto patterns = project::load_patterns(ws, g.svg_scale);
    const auto report = geometry::check_within_region(patterns, ws.project.region);
    if (!report.ok()) {
      std::cerr << report.describe();
      ++problems;
    }
    for (std::size_t i = 0; i < patterns.size(); ++i) {
      if (const auto n = geometry::count_self_intersections(patterns[i]); n > 0) {
        std::cout << "note: pattern " << i << " crosses itself " << n << " time(s)\n";
      }
    }
  }
  if (problems > 0) {
    std::cerr << problems << " problem(s)\n";
    return kExitUser;
  }
  std::cout << "project ok\n";
  return kExitOk;
}

int cmd_serve(const Globals& g, const std::string& host, int port, const std::optional<std::string>& static_dir) {
  server::StudioService service(g.project, g.overrides());
  httplib::Server http;
  server::HttpOptions options{host, port, static_dir ? fs::path(*static_dir) : fs::path{}};
  if (host != "127.0.0.1" && host != "localhost" && host != "::1") {
    std::cerr << "warning: binding to non-loopback address " << host << "\n";
  }
  const int bound = server::bind(http, service, options);
  if (bound < 0) {
    std::cerr << "cannot bind " << host << ":" << port << "\n";
    return kExitUser;
  }
  std::cout << "serving " << g.project << " on http://" << host << ":" << bound << "\n" << std::flush;
  http.listen_after_bind();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"duomorph: turn heat-sealing patterns and sliced prints into one hybrid G-code job"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--project", g.project, "Project file")->capture_default_str();
  app.add_option("--profile", g.profile, "Printer/material profile (overrides the project's)");
  app.add_option("--out", g.out, "Output file (overrides the project's output path)");
  app.add_flag("--dry-run", g.dry_run, "Report only; write no files");
  app.add_option("--bed-ceiling", g.bed_ceiling, "Maximum bed temperature in the print phase, C");
  app.add_option("--svg-scale", g.svg_scale, "Millimeters per SVG user unit");
  app.add_option("--seed-time", g.seed_time, "Timestamp recorded in the job manifest (for reproducible runs)");

  auto* seal = app.add_subcommand("seal", "Generate the heat-sealing G-code");
  auto* exp = app.add_subcommand("export", "Export part meshes plus the alignment marker as one STL");
  auto* merge = app.add_subcommand("merge", "Merge sealing and sliced print G-code into one job");
  std::optional<std::string> sliced;
  merge->add_option("--sliced", sliced, "Sliced G-code from your slicer (defaults to the project's)");

  auto* plan4d = app.add_subcommand("plan4d", "Rank strip designs for a target bending curvature");
  double length = 100.0;
  bool circle = false;
  std::optional<double> curvature;
  std::optional<std::string> calibration;
  plan4d->add_option("--length", length, "Strip length, mm")->capture_default_str();
  plan4d->add_flag("--circle", circle, "Target a closed circle (curvature 2*pi/length)");
  plan4d->add_option("--curvature", curvature, "Target curvature, 1/mm");
  plan4d->add_option("--calibration", calibration, "Curvature calibration file");

  auto* texture = app.add_subcommand("texture", "Hexagonal friction dot array for a rectangle");
  double tw = 0, td = 0, ox = 0, oy = 0, diameter = 0, pitch = 0;
  texture->add_option("--width", tw, "Region width, mm")->required();
  texture->add_option("--depth", td, "Region depth, mm")->required();
  texture->add_option("--x", ox, "Region corner x, mm");
  texture->add_option("--y", oy, "Region corner y, mm");
  texture->add_option("--diameter", diameter, "Dot diameter, mm")->required();
  texture->add_option("--pitch", pitch, "Center spacing, mm")->required();

  auto* validate = app.add_subcommand("validate", "Check the project, its files and geometry");
  std::optional<std::string> validate_calibration;
  validate->add_option("--calibration", validate_calibration, "Also check a curvature calibration file");

  auto* serve = app.add_subcommand("serve", "Run the local studio service");
  std::string host = "127.0.0.1";
  int port = 8765;
  std::optional<std::string> static_dir;
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--port", port, "Port (0 picks a free one)")->capture_default_str();
  serve->add_option("--static-dir", static_dir, "Serve the built studio UI from this directory");

  for (auto* sub : {seal, exp, merge, plan4d, texture, validate, serve}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUser;
  }

  try {
    if (*seal) return cmd_seal(g);
    if (*exp) return cmd_export(g);
    if (*merge) return cmd_merge(g, sliced);
    if (*plan4d) return cmd_plan4d(g, length, circle, curvature, calibration);
    if (*texture) return cmd_texture(g, tw, td, ox, oy, diameter, pitch);
    if (*validate) return cmd_validate(g, validate_calibration);
    if (*serve) return cmd_serve(g, host, port, static_dir);
  } catch (const duomorph::Error& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
    if (const auto* pe = dynamic_cast<const ProjectError*>(&e); pe && !pe->field().empty()) {
      std::cerr << "  field: " << pe->field() << "\n";
    }
    return e.is_user_error() ? kExitUser : kExitInternal;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error [invalid_json]: " << e.what() << "\n";
    return kExitUser;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
