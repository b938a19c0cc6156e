#pragma once

// Project document and the workflow steps shared by the CLI and the HTTP
// service. Keeping one implementation is what makes their outputs identical.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "duomorph/error.hpp"
#include "duomorph/gcode.hpp"
#include "duomorph/geometry.hpp"
#include "duomorph/materials.hpp"
#include "duomorph/merger.hpp"
#include "duomorph/mesh.hpp"
#include "duomorph/sealer.hpp"
#include "duomorph/svg.hpp"

namespace duomorph::project {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using geometry::Point2;

struct Outputs {
  std::string seal = "out/seal.gcode";
  std::string parts = "out/parts_with_marker.stl";
  std::string merged = "out/merged.gcode";
};

// All paths are relative to the project file's directory unless absolute.
struct Project {
  std::string name = "untitled";
  geometry::PrintRegion region;
  std::string stack = "film_film";
  std::optional<std::string> profile;  // null = built-in defaults
  std::vector<std::string> patterns;   // .svg or .json paths files
  double svg_unit_scale = 1.0;
  double chord_tolerance = 0.05;
  std::vector<std::string> parts;  // STL meshes in build-plate coordinates
  merger::AlignmentMarker marker;
  std::optional<std::string> sliced;  // G-code from the user's slicer
  std::optional<Point2> offset;       // last recovered marker offset
  Outputs outputs;
  std::optional<Json> job;  // manifest of the last merge
};

// ---------------------------------------------------------------------------
// JSON

namespace detail {

struct Reader {
  const Json& j;
  std::string where;

  const Json& at(const char* key) const {
    if (!j.is_object() || !j.contains(key)) throw ProjectError("project_schema", "missing field", field(key));
    return j.at(key);
  }
  std::string field(const char* key) const { return where.empty() ? key : where + "." + key; }

  template <typename T>
  T get(const char* key) const {
    try {
      return at(key).get<T>();
    } catch (const Json::exception&) {
      throw ProjectError("project_schema", "field has the wrong type", field(key));
    }
  }
  template <typename T>
  T get_or(const char* key, T fallback) const {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    return get<T>(key);
  }
  std::optional<std::string> optional_string(const char* key) const {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return get<std::string>(key);
  }
  double positive(const char* key, double fallback) const {
    const double v = get_or<double>(key, fallback);
    if (!(v > 0.0) || !std::isfinite(v)) throw ProjectError("project_schema", "value must be a positive number", field(key));
    return v;
  }
  Point2 point(const char* key, Point2 fallback) const {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw ProjectError("project_schema", "expected [x, y]", field(key));
    }
    return {v[0].get<double>(), v[1].get<double>()};
  }
};

inline Json point_json(Point2 p) { return Json::array({p.x, p.y}); }

}  // namespace detail

inline Json to_json(const Project& p) {
  Json j;
  j["name"] = p.name;
  j["region"] = {{"width_mm", p.region.width}, {"depth_mm", p.region.depth}, {"origin", detail::point_json(p.region.origin)}};
  j["stack"] = p.stack;
  j["profile"] = p.profile ? Json(*p.profile) : Json(nullptr);
  j["patterns"] = p.patterns;
  j["svg_unit_scale"] = p.svg_unit_scale;
  j["chord_tolerance_mm"] = p.chord_tolerance;
  j["parts"] = p.parts;
  j["marker"] = {{"center", detail::point_json(p.marker.center)},
                 {"arm_length_mm", p.marker.arm_length},
                 {"arm_width_mm", p.marker.arm_width},
                 {"height_mm", p.marker.height}};
  j["sliced"] = p.sliced ? Json(*p.sliced) : Json(nullptr);
  j["offset"] = p.offset ? detail::point_json(*p.offset) : Json(nullptr);
  j["outputs"] = {{"seal", p.outputs.seal}, {"parts", p.outputs.parts}, {"merged", p.outputs.merged}};
  j["job"] = p.job ? *p.job : Json(nullptr);
  return j;
}

inline Project from_json(const Json& j) {
  if (!j.is_object()) throw ProjectError("project_schema", "project document must be an object", "");
  const detail::Reader r{j, ""};
  Project p;
  p.name = r.get_or<std::string>("name", p.name);
  {
    const detail::Reader rr{r.at("region"), "region"};
    const double w = rr.positive("width_mm", 256.0), d = rr.positive("depth_mm", 256.0);
    p.region = geometry::PrintRegion(w, d, rr.point("origin", {}));
  }
  p.stack = r.get<std::string>("stack");
  p.profile = r.optional_string("profile");
  p.patterns = r.get_or<std::vector<std::string>>("patterns", {});
  p.svg_unit_scale = r.positive("svg_unit_scale", 1.0);
  p.chord_tolerance = r.positive("chord_tolerance_mm", 0.05);
  p.parts = r.get_or<std::vector<std::string>>("parts", {});
  p.marker = merger::default_marker(p.region);
  if (j.contains("marker") && !j.at("marker").is_null()) {
    const detail::Reader rm{j.at("marker"), "marker"};
    p.marker.center = rm.point("center", p.marker.center);
    p.marker.arm_length = rm.positive("arm_length_mm", p.marker.arm_length);
    p.marker.arm_width = rm.positive("arm_width_mm", p.marker.arm_width);
    p.marker.height = rm.positive("height_mm", p.marker.height);
    try {
      p.marker.validate();
    } catch (const MergeError& e) {
      throw ProjectError("project_schema", e.what(), "marker");
    }
  }
  p.sliced = r.optional_string("sliced");
  if (j.contains("offset") && !j.at("offset").is_null()) p.offset = r.point("offset", {});
  if (j.contains("outputs") && !j.at("outputs").is_null()) {
    const detail::Reader ro{j.at("outputs"), "outputs"};
    p.outputs.seal = ro.get_or<std::string>("seal", p.outputs.seal);
    p.outputs.parts = ro.get_or<std::string>("parts", p.outputs.parts);
    p.outputs.merged = ro.get_or<std::string>("merged", p.outputs.merged);
  }
  if (j.contains("job") && !j.at("job").is_null()) p.job = j.at("job");
  return p;
}

inline std::string dump(const Project& p) { return to_json(p).dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ProjectError("missing_file", "cannot read " + path.string(), path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Temp file + rename, so readers never see a half-written output.
inline void write_file_atomic(const fs::path& path, std::string_view data) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("write_failed", "cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error("write_failed", "cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

// A loaded project with its directory, for resolving relative paths.
struct Workspace {
  Project project;
  fs::path dir;

  fs::path resolve(const std::string& rel) const {
    const fs::path p(rel);
    return p.is_absolute() ? p : dir / p;
  }
};

inline Workspace load_workspace(const fs::path& project_file) {
  const std::string text = read_file(project_file);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ProjectError("project_syntax", std::string("project file is not valid JSON: ") + e.what(), "");
  }
  return {from_json(j), project_file.has_parent_path() ? project_file.parent_path() : fs::path(".")};
}

inline materials::Profile load_profile(const Workspace& ws, const std::optional<std::string>& override_path = {}) {
  const auto& which = override_path ? override_path : ws.project.profile;
  if (!which) return materials::default_profile();
  const fs::path path = override_path ? fs::path(*override_path) : ws.resolve(*which);
  return materials::parse_profile(read_file(path));
}

struct Issue {
  std::string field;
  std::string message;
};

// Problems that stop the workflow: missing files and unknown references.
inline std::vector<Issue> check_references(const Workspace& ws, const materials::Profile& profile) {
  std::vector<Issue> out;
  const auto& p = ws.project;
  if (!profile.has_stack(p.stack)) out.push_back({"stack", "unknown material stack '" + p.stack + "'"});
  auto exists = [&](const std::string& field, const std::string& rel) {
    if (!fs::is_regular_file(ws.resolve(rel))) out.push_back({field, "file not found: " + ws.resolve(rel).string()});
  };
  for (std::size_t i = 0; i < p.patterns.size(); ++i) exists("patterns[" + std::to_string(i) + "]", p.patterns[i]);
  for (std::size_t i = 0; i < p.parts.size(); ++i) exists("parts[" + std::to_string(i) + "]", p.parts[i]);
  if (p.profile) exists("profile", *p.profile);
  if (p.sliced) exists("sliced", *p.sliced);
  if (p.patterns.empty()) out.push_back({"patterns", "project has no sealing patterns"});
  return out;
}

inline void require_references(const Workspace& ws, const materials::Profile& profile) {
  const auto issues = check_references(ws, profile);
  if (!issues.empty()) {
    const std::string code = issues.front().message.starts_with("file not found") ? "missing_file" : "invalid_reference";
    throw ProjectError(code, issues.front().message, issues.front().field);
  }
}

// Paths file: {"paths": [{"closed": bool, "points": [[x, y], ...]}, ...]}
inline std::vector<geometry::PlanarPath> parse_paths_json(std::string_view text) {
  try {
    const auto j = Json::parse(text);
    std::vector<geometry::PlanarPath> out;
    for (const auto& pj : j.at("paths")) {
      std::vector<Point2> pts;
      for (const auto& v : pj.at("points")) pts.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
      out.push_back(geometry::make_path(std::move(pts), pj.value("closed", false)));
    }
    return out;
  } catch (const Json::exception& e) {
    throw GeometryError("paths_file", std::string("paths file: ") + e.what());
  }
}

inline std::string dump_paths_json(std::span<const geometry::PlanarPath> paths) {
  Json arr = Json::array();
  for (const auto& p : paths) {
    Json pts = Json::array();
    for (const auto& v : p.vertices()) pts.push_back(detail::point_json(v));
    arr.push_back({{"closed", p.closed()}, {"points", pts}});
  }
  return Json{{"paths", arr}}.dump(2) + "\n";
}

inline std::vector<geometry::PlanarPath> load_patterns(const Workspace& ws, std::optional<double> svg_scale = {}) {
  std::vector<geometry::PlanarPath> out;
  for (const auto& rel : ws.project.patterns) {
    const auto path = ws.resolve(rel);
    const std::string text = read_file(path);
    std::vector<geometry::PlanarPath> loaded;
    if (path.extension() == ".svg") {
      loaded = geometry::load_svg_document(text, ws.project.chord_tolerance, svg_scale.value_or(ws.project.svg_unit_scale));
    } else {
      loaded = parse_paths_json(text);
    }
    out.insert(out.end(), loaded.begin(), loaded.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Workflow steps

struct Overrides {
  std::optional<std::string> profile;
  std::optional<double> bed_ceiling;
  std::optional<double> svg_scale;
};

struct SealOutput {
  sealer::SealPlan plan;
  gcode::Program program;
  std::string text;
  sealer::SealSummary summary;
};

inline SealOutput run_seal(const Workspace& ws, const Overrides& ov = {}) {
  const auto profile = load_profile(ws, ov.profile);
  require_references(ws, profile);
  const auto patterns = load_patterns(ws, ov.svg_scale);
  SealOutput out;
  out.plan = sealer::plan_seal(patterns, profile.stack(ws.project.stack), ws.project.region,
                               sealer::SealOptions::from(profile.sealing));
  out.program = sealer::compile_seal(out.plan);
  out.text = gcode::emit(out.program);
  out.summary = sealer::summarize(out.plan);
  return out;
}

inline std::string format_summary(const sealer::SealSummary& s) {
  std::string out;
  out += "curves: " + std::to_string(s.curves) + "\n";
  out += "samples: " + std::to_string(s.samples) + "\n";
  out += "contact length: " + gcode::format_fixed(s.contact_length, 3) + " mm\n";
  out += "travel length: " + gcode::format_fixed(s.travel_length, 3) + " mm\n";
  out += "estimated time: " + gcode::format_fixed(s.total_time(), 1) + " s (" +
         gcode::format_fixed(s.contact_time, 1) + " s sealing + " + gcode::format_fixed(s.travel_time, 1) +
         " s travel)\n";
  return out;
}

struct ExportOutput {
  std::string bytes;
  std::size_t triangles = 0;
  std::size_t marker_triangles = 0;
  std::vector<std::string> warnings;
};

inline ExportOutput run_export(const Workspace& ws, const Overrides& ov = {}) {
  const auto profile = load_profile(ws, ov.profile);
  std::vector<mesh::Mesh> parts;
  for (std::size_t i = 0; i < ws.project.parts.size(); ++i) {
    const auto path = ws.resolve(ws.project.parts[i]);
    if (!fs::is_regular_file(path)) {
      throw ProjectError("missing_file", "part mesh not found: " + path.string(), "parts[" + std::to_string(i) + "]");
    }
    parts.push_back(mesh::read_stl(read_file(path)));
  }
  const auto exported = merger::export_parts_with_marker(parts, ws.project.marker);
  ExportOutput out;
  out.bytes = mesh::write_binary_stl(exported.mesh, "duomorph parts with alignment marker");
  out.triangles = exported.mesh.triangles.size();
  out.marker_triangles = 44;
  out.warnings = exported.warnings;
  return out;
}

struct MergeOutput {
  gcode::Program program;
  std::string text;
  merger::MergeReport report;
  SealOutput seal;
};

inline MergeOutput run_merge(const Workspace& ws, std::string_view sliced_text, const Overrides& ov = {}) {
  const auto profile = load_profile(ws, ov.profile);
  MergeOutput out;
  out.seal = run_seal(ws, ov);
  merger::FabJob job;
  job.seal = out.seal.program;
  job.print = gcode::parse(sliced_text, gcode::ParseOptions{});
  job.pause_macro = profile.printer.pause_macro;
  if (profile.printer.supports_tone) job.alert_tones = profile.printer.alert_tones;
  job.bed_ceiling = ov.bed_ceiling.value_or(profile.printer.bed_ceiling);
  job.marker = ws.project.marker;
  auto merged = merger::merge(job);
  out.program = std::move(merged.program);
  out.report = std::move(merged.report);
  out.text = gcode::emit(out.program);
  return out;
}

inline std::string format_merge_report(const merger::MergeReport& r) {
  std::string out;
  out += "offset: (" + gcode::format_fixed(r.offset.x, 3) + ", " + gcode::format_fixed(r.offset.y, 3) + ") mm" +
         (r.aligned ? " aligned\n" : "\n");
  out += "bed temperature replacements: " + std::to_string(r.bed_replacements) + "\n";
  out += "marker commands stripped: " + std::to_string(r.stripped_commands) + " (" +
         gcode::format_fixed(r.stripped_length, 3) + " mm extrusion)\n";
  for (const auto& w : r.warnings) out += "warning: " + w + "\n";
  return out;
}

// Manifest stored in the project after a merge. `created` is supplied by the
// caller so runs can be reproduced.
inline Json job_manifest(const merger::MergeReport& r, const std::string& merged_path, const std::string& created) {
  return Json{{"merged", merged_path},
              {"offset", detail::point_json(r.offset)},
              {"aligned", r.aligned},
              {"bed_replacements", r.bed_replacements},
              {"stripped_commands", r.stripped_commands},
              {"stripped_length_mm", r.stripped_length},
              {"created", created}};
}

inline std::string utc_now_iso8601() {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------
// Preview payload (geometry for the studio UI; no rendering here)

inline Json polyline_json(std::span<const Point2> pts) {
  Json arr = Json::array();
  for (const auto& p : pts) arr.push_back(detail::point_json(p));
  return arr;
}

struct PreviewError : ProjectError {
  std::vector<gcode::Diagnostic> diagnostics;
  PreviewError(const std::string& message, std::vector<gcode::Diagnostic> d)
      : ProjectError("malformed_gcode", message, "sliced_gcode"), diagnostics(std::move(d)) {}
};

// Uploads that cannot be previewed: binary junk or no layer markers at all.
inline gcode::Program parse_upload(std::string_view text) {
  auto program = gcode::parse(text);
  std::vector<gcode::Diagnostic> fatal;
  for (const auto& d : program.diagnostics) {
    if (d.message.find("control") != std::string::npos) fatal.push_back(d);
  }
  if (!fatal.empty()) throw PreviewError("uploaded G-code contains binary data", fatal);
  if (program.layer_marks().empty()) {
    auto diags = program.diagnostics;
    diags.push_back({0, "no layer markers (;LAYER:n or ;LAYER_CHANGE) found"});
    throw PreviewError("uploaded G-code has no detectable layers", diags);
  }
  return program;
}

inline Json preview(const Workspace& ws, std::optional<std::string_view> sliced_text, const Overrides& ov = {}) {
  const auto seal = run_seal(ws, ov);
  Json j;
  j["sealing_only"] = !sliced_text.has_value();
  j["region"] = {{"width_mm", ws.project.region.width},
                 {"depth_mm", ws.project.region.depth},
                 {"origin", detail::point_json(ws.project.region.origin)}};
  const auto& st = seal.plan.stack;
  j["stack"] = {{"name", st.name},
                {"nozzle_temp_c", st.nozzle_temp},
                {"bed_temp_c", st.bed_temp},
                {"seal_speed_mm_s", st.seal_speed},
                {"seal_z_mm", st.seal_z()}};
  j["lift_height_mm"] = seal.plan.lift_height;
  Json sealing = Json::array();
  for (const auto& tp : seal.plan.toolpaths) {
    sealing.push_back({{"pattern_index", tp.source_index},
                       {"z_mm", tp.seal_z},
                       {"speed_mm_s", tp.seal_speed},
                       {"points", polyline_json(tp.points)}});
  }
  j["sealing"] = sealing;
  j["summary"] = {{"curves", seal.summary.curves},
                  {"contact_length_mm", seal.summary.contact_length},
                  {"estimated_time_s", seal.summary.total_time()}};
  j["marker"] = {{"center", detail::point_json(ws.project.marker.center)},
                 {"outline", polyline_json(ws.project.marker.outline())}};
  Json diagnostics = Json::array();
  Json warnings = Json::array();
  for (const auto& w : seal.plan.warnings) warnings.push_back(w);

  const gcode::Program* phased = &seal.program;
  MergeOutput merged;
  if (sliced_text) {
    const auto upload = parse_upload(*sliced_text);
    for (const auto& d : upload.diagnostics) diagnostics.push_back({{"line", d.line}, {"message", d.message}});
    merged = run_merge(ws, *sliced_text, ov);
    phased = &merged.program;
    // First layer as it will be printed: stripped and shifted.
    Json first = Json::array();
    const auto reparsed = gcode::parse(gcode::emit(merged.program));
    if (const auto layer = reparsed.first_layer()) {
      std::vector<Point2> run;
      auto flush = [&] {
        if (run.size() >= 2) first.push_back(polyline_json(run));
        run.clear();
      };
      for (const auto& m : gcode::motion_segments(reparsed, layer->first, layer->second)) {
        if (!m.extruding()) {
          flush();
          continue;
        }
        const Point2 a{m.from.x, m.from.y}, b{m.to.x, m.to.y};
        if (run.empty() || run.back() != a) {
          flush();
          run.push_back(a);
        }
        run.push_back(b);
      }
      flush();
    }
    j["print_first_layer"] = first;
    j["offset"] = {{"dx", merged.report.offset.x}, {"dy", merged.report.offset.y}, {"aligned", merged.report.aligned}};
    j["strip"] = {{"commands", merged.report.stripped_commands}, {"extrusion_mm", merged.report.stripped_length}};
    for (const auto& w : merged.report.warnings) warnings.push_back(w);
  } else {
    warnings.push_back("sealing-only preview: no sliced G-code uploaded");
  }
  Json phases = Json::array();
  for (const auto& r : phased->phases()) {
    phases.push_back({{"phase", gcode::phase_name(r.phase)}, {"begin", r.begin}, {"end", r.end}});
  }
  j["phases"] = phases;
  j["diagnostics"] = diagnostics;
  j["warnings"] = warnings;
  return j;
}

}  // namespace duomorph::project
