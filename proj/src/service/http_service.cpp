#include "refocus/service/http_service.hpp"

#include <chrono>
#include <cstdlib>
#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "refocus/bokeh/render.hpp"
#include "refocus/dof/dof_sim.hpp"
#include "refocus/imaging/image_io.hpp"

namespace refocus::service {

using nlohmann::json;

namespace {

double require_number(const json& j, const char* key, double lo, double hi) {
  if (!j.contains(key)) throw std::invalid_argument(std::string("missing field ") + key);
  const json& v = j.at(key);
  if (!v.is_number()) throw std::invalid_argument(std::string(key) + " must be a number");
  const double d = v.get<double>();
  if (!(d >= lo && d <= hi)) {
    throw std::invalid_argument(std::string(key) + " outside [" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "]");
  }
  return d;
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", message}, {"status", status}}.dump(), "application/json");
}

json record_json(const SceneRecord& r) {
  return {{"scene_id", r.scene_id},
          {"width", r.width},
          {"height", r.height},
          {"has_depth", r.has_depth},
          {"low_confidence_depth", !r.has_depth},
          {"source", std::string(to_string(r.source))}};
}

imaging::RasterImage overlay(const imaging::RasterImage& img, const stack::StackMask& mask) {
  imaging::RasterImage out = img;
  constexpr double kAlpha = 0.45;
  constexpr double kTint[3] = {1.0, 0.2, 0.2};
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      if (!mask.at(x, y)) continue;
      for (int c = 0; c < out.channels(); ++c) {
        const double tint = out.channels() == 3 ? kTint[c] : 1.0;
        out.at(x, y, c) = (1.0 - kAlpha) * out.at(x, y, c) + kAlpha * tint;
      }
    }
  }
  return out;
}

stack::StackMask focus_mask_at(const StoredScene& scene, double fx, double fy, double eps) {
  const auto& depth = *scene.depth;
  const int px = imaging::normalized_to_pixel(fx, depth.width());
  const int py = imaging::normalized_to_pixel(fy, depth.height());
  return dof::focus_set(depth, depth.at(px, py), eps);
}

}  // namespace

RenderRequest parse_render_request(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error&) {
    throw std::invalid_argument("body is not valid JSON");
  }
  if (!j.is_object()) throw std::invalid_argument("body must be a JSON object");
  RenderRequest r;
  if (!j.contains("scene_id") || !j.at("scene_id").is_string()) {
    throw std::invalid_argument("scene_id must be a string");
  }
  r.scene_id = j.at("scene_id").get<std::string>();
  r.fx = require_number(j, "fx", 0.0, 1.0);
  r.fy = require_number(j, "fy", 0.0, 1.0);
  r.bokeh = require_number(j, "bokeh", 0.0, kMaxRequestBokeh);
  if (j.contains("overlay_focus_set")) {
    if (!j.at("overlay_focus_set").is_boolean()) {
      throw std::invalid_argument("overlay_focus_set must be a boolean");
    }
    r.overlay_focus_set = j.at("overlay_focus_set").get<bool>();
  }
  if (j.contains("eps")) r.eps = require_number(j, "eps", 0.0, 1.0);
  return r;
}

std::string render_png(const StoredScene& scene, const RenderRequest& request) {
  auto out = bokeh::refocus_classical(*scene.image, *scene.depth, request.fx, request.fy,
                                      request.bokeh);
  if (request.overlay_focus_set) {
    out = overlay(out, focus_mask_at(scene, request.fx, request.fy, request.eps));
  }
  return imaging::encode_png(out);
}

struct HttpService::Impl {
  SceneStore& store;
  ServiceOptions options;
  httplib::Server server;

  Impl(SceneStore& s, ServiceOptions o) : store(s), options(std::move(o)) { routes(); }

  void routes() {
    server.Get("/api/scenes", [this](const httplib::Request&, httplib::Response& res) {
      json list = json::array();
      for (const auto& r : store.list()) list.push_back(record_json(r));
      res.set_content(list.dump(), "application/json");
    });

    server.Post("/api/scenes", [this](const httplib::Request& req, httplib::Response& res) {
      if (!req.is_multipart_form_data() || !req.has_file("image")) {
        return send_error(res, 400, "expected multipart form with an 'image' part");
      }
      imaging::RasterImage image;
      std::optional<imaging::DepthMap> depth;
      try {
        const auto& part = req.get_file_value("image");
        image = imaging::decode_image(part.content, part.filename.empty() ? "image" : part.filename);
        if (req.has_file("depth")) {
          const auto& dpart = req.get_file_value("depth");
          depth = imaging::decode_depth(dpart.content,
                                        dpart.filename.empty() ? "depth" : dpart.filename);
        }
      } catch (const std::exception& e) {
        return send_error(res, 400, e.what());
      }
      std::string preferred;
      if (req.has_file("scene_id")) preferred = req.get_file_value("scene_id").content;
      try {
        const auto record = store.add(std::move(image), std::move(depth),
                                      SceneSource::kUploaded, preferred);
        spdlog::info("stored scene {} ({}x{}, depth={})", record.scene_id, record.width,
                     record.height, record.has_depth);
        res.status = 201;
        res.set_content(record_json(record).dump(), "application/json");
      } catch (const std::invalid_argument& e) {
        send_error(res, 400, e.what());
      }
    });

    server.Post("/api/render", [this](const httplib::Request& req, httplib::Response& res) {
      const auto start = std::chrono::steady_clock::now();
      RenderRequest request;
      try {
        request = parse_render_request(req.body);
      } catch (const std::invalid_argument& e) {
        return send_error(res, 400, e.what());
      }
      const auto scene = store.get(request.scene_id);
      if (!scene) return send_error(res, 404, "unknown scene " + request.scene_id);
      try {
        const std::string png = render_png(*scene, request);
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                .count();
        res.set_header("X-Render-Latency-Ms", std::to_string(ms));
        res.set_content(png, "image/png");
        spdlog::debug("render {} fx={} fy={} b={} in {:.2f} ms", request.scene_id, request.fx,
                      request.fy, request.bokeh, ms);
      } catch (const std::exception& e) {
        spdlog::error("render failed: {}", e.what());
        send_error(res, 500, std::string("render failed: ") + e.what());
      }
    });

    server.Get(R"(/api/depth/([^/]+))", [this](const httplib::Request& req,
                                                httplib::Response& res) {
      const auto scene = store.get(req.matches[1]);
      if (!scene) return send_error(res, 404, "unknown scene " + std::string(req.matches[1]));
      res.set_content(imaging::encode_png(imaging::depth_to_image(*scene->depth)), "image/png");
    });

    server.Get("/api/focus_set", [this](const httplib::Request& req, httplib::Response& res) {
      if (!req.has_param("scene_id") || !req.has_param("fx") || !req.has_param("fy")) {
        return send_error(res, 400, "scene_id, fx and fy are required");
      }
      double fx = 0.0, fy = 0.0, eps = dof::kDefaultFocusEps;
      try {
        fx = std::stod(req.get_param_value("fx"));
        fy = std::stod(req.get_param_value("fy"));
        if (req.has_param("eps")) eps = std::stod(req.get_param_value("eps"));
      } catch (const std::exception&) {
        return send_error(res, 400, "fx, fy and eps must be numbers");
      }
      if (!(fx >= 0.0 && fx <= 1.0 && fy >= 0.0 && fy <= 1.0) || !(eps >= 0.0)) {
        return send_error(res, 400, "fx, fy must lie in [0,1] and eps must be >= 0");
      }
      const auto scene = store.get(req.get_param_value("scene_id"));
      if (!scene) return send_error(res, 404, "unknown scene " + req.get_param_value("scene_id"));
      res.set_content(imaging::encode_png(focus_mask_at(*scene, fx, fy, eps).to_image()),
                      "image/png");
    });

    if (options.static_dir && std::filesystem::is_directory(*options.static_dir)) {
      server.set_mount_point("/", options.static_dir->string());
    }

    server.set_exception_handler(
        [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
          std::string message = "internal error";
          try {
            if (ep) std::rethrow_exception(ep);
          } catch (const std::exception& e) {
            message = e.what();
          } catch (...) {
          }
          send_error(res, 500, message);
        });
    server.set_logger([](const httplib::Request& req, const httplib::Response& res) {
      spdlog::debug("{} {} -> {}", req.method, req.path, res.status);
    });
  }
};

HttpService::HttpService(SceneStore& store, ServiceOptions options)
    : impl_(std::make_unique<Impl>(store, std::move(options))) {}

HttpService::~HttpService() { stop(); }

int HttpService::bind() {
  auto& o = impl_->options;
  if (o.port == 0) {
    o.port = impl_->server.bind_to_any_port(o.host);
    return o.port;
  }
  return impl_->server.bind_to_port(o.host, o.port) ? o.port : -1;
}

bool HttpService::listen() {
  spdlog::info("listening on {}:{}", impl_->options.host, impl_->options.port);
  return impl_->server.listen_after_bind();
}

void HttpService::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void HttpService::wait_until_ready() const { impl_->server.wait_until_ready(); }

void configure_logging_from_env() {
  const char* level = std::getenv("REFOCUS_LOG_LEVEL");
  if (level && *level) spdlog::set_level(spdlog::level::from_str(level));
}

}  // namespace refocus::service
