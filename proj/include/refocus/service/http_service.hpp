#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "refocus/service/scene_store.hpp"

namespace refocus::service {

struct RenderRequest {
  std::string scene_id;
  double fx = 0.5;
  double fy = 0.5;
  double bokeh = 0.0;
  bool overlay_focus_set = false;
  double eps = 0.025;
};

inline constexpr double kMaxRequestBokeh = 30.0;

// Parses and range-checks a JSON body; throws invalid_argument on any
// malformed or out-of-range field.
RenderRequest parse_render_request(const std::string& body);

// PNG bytes of the rendered scene (with the focus-set overlay if asked).
std::string render_png(const StoredScene& scene, const RenderRequest& request);

struct ServiceOptions {
  std::string host = "0.0.0.0";
  int port = 8080;
  // Served under "/" when set and present.
  std::optional<std::filesystem::path> static_dir;
};

// HTTP front end over a SceneStore. The store must outlive the service.
class HttpService {
 public:
  HttpService(SceneStore& store, ServiceOptions options);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  // Binds options.port (0 picks a free port); returns the bound port or -1.
  int bind();
  // Serves until stop(); call after bind().
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Reads REFOCUS_LOG_LEVEL (trace, debug, info, warn, error, critical, off).
void configure_logging_from_env();

}  // namespace refocus::service
