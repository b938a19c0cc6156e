#pragma once

// cpp-httplib binding for StudioService. Loopback only unless told otherwise.

#include <filesystem>
#include <string>

#include <httplib.h>

#include "duomorph/server.hpp"

namespace duomorph::server {

struct HttpOptions {
  std::string host = "127.0.0.1";
  int port = 8765;              // 0 = pick a free port
  std::filesystem::path static_dir;  // built studio UI, optional
};

inline void install_routes(httplib::Server& http, StudioService& service, const HttpOptions& options) {
  auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
    const auto out = service.handle({req.method, req.path, req.body});
    res.status = out.status;
    for (const auto& [k, v] : out.headers) res.set_header(k, v);
    res.set_content(out.body, out.content_type);
  };
  http.Get("/api/.*", forward);
  http.Put("/api/.*", forward);
  http.Post("/api/.*", forward);
  if (!options.static_dir.empty()) http.set_mount_point("/", options.static_dir.string());
}

// Installs routes and binds; returns the bound port or -1. Follow with
// http.listen_after_bind(), which blocks until http.stop().
inline int bind(httplib::Server& http, StudioService& service, const HttpOptions& options) {
  install_routes(http, service, options);
  if (options.port == 0) return http.bind_to_any_port(options.host);
  return http.bind_to_port(options.host, options.port) ? options.port : -1;
}

}  // namespace duomorph::server
