#pragma once

// Request handling for the local studio service. The handler is plain C++ so
// it can be exercised without sockets; server_http.hpp binds it to HTTP.

#include <atomic>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "duomorph/error.hpp"
#include "duomorph/project.hpp"

namespace duomorph::server {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct Request {
  std::string method;
  std::string path;
  std::string body;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::map<std::string, std::string> headers;
};

inline Response json_response(int status, const Json& j) { return {status, "application/json", j.dump(2) + "\n", {}}; }

inline Response error_response(int status, const Error& e) {
  Json err{{"code", e.code()}, {"message", e.what()}};
  if (const auto* pe = dynamic_cast<const ProjectError*>(&e); pe && !pe->field().empty()) err["field"] = pe->field();
  if (const auto* pv = dynamic_cast<const project::PreviewError*>(&e)) {
    Json diags = Json::array();
    for (const auto& d : pv->diagnostics) diags.push_back({{"line", d.line}, {"message", d.message}});
    err["diagnostics"] = diags;
  }
  return json_response(status, Json{{"error", err}});
}

// Stateless apart from the project file on disk. Reads run concurrently;
// writes (PUT) are serialized and last writer wins. The version counter
// counts accepted writes since the service started.
class StudioService {
 public:
  explicit StudioService(fs::path project_file, project::Overrides overrides = {})
      : project_file_(std::move(project_file)), overrides_(std::move(overrides)) {}

  std::uint64_t version() const { return version_.load(); }

  Response handle(const Request& req) {
    try {
      if (req.path == "/api/project" && req.method == "GET") return get_project();
      if (req.path == "/api/project" && req.method == "PUT") return put_project(req.body);
      if (req.path == "/api/preview" && req.method == "POST") return post_preview(req.body);
      if (req.path == "/api/merge" && req.method == "POST") return post_merge(req.body);
      if (req.path == "/api/status" && req.method == "GET") return get_status();
      if (req.path.starts_with("/api/")) {
        return json_response(404, Json{{"error", {{"code", "not_found"}, {"message", "no such endpoint"}}}});
      }
      return json_response(404, Json{{"error", {{"code", "not_found"}, {"message", "not found"}}}});
    } catch (const Error& e) {
      return error_response(e.is_user_error() ? 422 : 500, e);
    } catch (const std::exception& e) {
      return json_response(500, Json{{"error", {{"code", "internal"}, {"message", e.what()}}}});
    }
  }

 private:
  project::Workspace load() const {
    std::shared_lock lock(mutex_);
    return project::load_workspace(project_file_);
  }

  Response get_project() {
    const auto ws = load();
    return json_response(200, Json{{"version", version_.load()}, {"project", project::to_json(ws.project)}});
  }

  // Body: the project document, or {"project": {...}}.
  Response put_project(const std::string& body) {
    Json j;
    try {
      j = Json::parse(body);
    } catch (const Json::parse_error& e) {
      throw ProjectError("project_syntax", std::string("request body is not valid JSON: ") + e.what(), "");
    }
    if (j.is_object() && j.contains("project")) j = j.at("project");
    project::Workspace ws{project::from_json(j), project_file_.has_parent_path() ? project_file_.parent_path() : "."};
    const auto profile = project::load_profile(ws, overrides_.profile);
    if (!profile.has_stack(ws.project.stack)) {
      throw ProjectError("unknown_stack", "unknown material stack '" + ws.project.stack + "'", "stack");
    }
    Json warnings = Json::array();
    for (const auto& issue : project::check_references(ws, profile)) {
      warnings.push_back({{"field", issue.field}, {"message", issue.message}});
    }
    std::uint64_t v;
    {
      std::unique_lock lock(mutex_);
      project::write_file_atomic(project_file_, project::dump(ws.project));
      v = ++version_;
    }
    return json_response(200, Json{{"version", v}, {"warnings", warnings}});
  }

  // Body: optional {"sliced_gcode": "..."}.
  static std::optional<std::string> sliced_from(const std::string& body) {
    if (body.empty()) return std::nullopt;
    Json j;
    try {
      j = Json::parse(body);
    } catch (const Json::parse_error& e) {
      throw ProjectError("request_syntax", std::string("request body is not valid JSON: ") + e.what(), "");
    }
    if (!j.is_object() || !j.contains("sliced_gcode") || j.at("sliced_gcode").is_null()) return std::nullopt;
    if (!j.at("sliced_gcode").is_string()) throw ProjectError("request_schema", "expected a string", "sliced_gcode");
    return j.at("sliced_gcode").get<std::string>();
  }

  static project::Overrides with_request(project::Overrides ov, const std::string& body) {
    if (body.empty()) return ov;
    const auto j = Json::parse(body, nullptr, false);
    if (j.is_object() && j.contains("bed_ceiling_c") && j.at("bed_ceiling_c").is_number()) {
      ov.bed_ceiling = j.at("bed_ceiling_c").get<double>();
    }
    return ov;
  }

  Response post_preview(const std::string& body) {
    const auto sliced = sliced_from(body);
    const auto ws = load();
    try {
      return json_response(200, project::preview(ws, sliced, with_request(overrides_, body)));
    } catch (const MergeError& e) {
      return error_response(409, e);
    }
  }

  Response post_merge(const std::string& body) {
    auto sliced = sliced_from(body);
    const auto ws = load();
    if (!sliced) {
      if (!ws.project.sliced) throw ProjectError("missing_sliced", "no sliced G-code uploaded or set in the project", "sliced_gcode");
      sliced = project::read_file(ws.resolve(*ws.project.sliced));
    }
    ++active_merges_;
    struct Done {
      std::atomic<int>& n;
      ~Done() { --n; }
    } done{active_merges_};
    try {
      const auto out = project::run_merge(ws, *sliced, with_request(overrides_, body));
      ++merges_completed_;
      Response r{200, "text/x-gcode", out.text, {}};
      r.headers["Content-Disposition"] = "attachment; filename=\"merged.gcode\"";
      r.headers["X-Duomorph-Offset"] = gcode::format_fixed(out.report.offset.x, 3) + "," +
                                       gcode::format_fixed(out.report.offset.y, 3);
      r.headers["X-Duomorph-Aligned"] = out.report.aligned ? "true" : "false";
      r.headers["X-Duomorph-Stripped"] = std::to_string(out.report.stripped_commands) + " commands, " +
                                         gcode::format_fixed(out.report.stripped_length, 3) + " mm";
      r.headers["X-Duomorph-Bed-Replacements"] = std::to_string(out.report.bed_replacements);
      return r;
    } catch (const MergeError& e) {
      return error_response(409, e);
    }
  }

  Response get_status() const {
    return json_response(200, Json{{"state", active_merges_.load() > 0 ? "merging" : "idle"},
                                   {"active_merges", active_merges_.load()},
                                   {"merges_completed", merges_completed_.load()},
                                   {"version", version_.load()}});
  }

  fs::path project_file_;
  project::Overrides overrides_;
  mutable std::shared_mutex mutex_;
  std::atomic<std::uint64_t> version_{0};
  std::atomic<int> active_merges_{0};
  std::atomic<std::uint64_t> merges_completed_{0};
};

}  // namespace duomorph::server
