#include <gtest/gtest.h>

#include <fstream>
#include <httplib.h>
#include <json.hpp>
#include <thread>

#include "refocus/bokeh/render.hpp"
#include "refocus/dof/dof_sim.hpp"
#include "refocus/imaging/image_io.hpp"
#include "refocus/imaging/scene.hpp"
#include "refocus/service/http_service.hpp"
#include "refocus/service/scene_store.hpp"
#include "test_util.hpp"

namespace refocus::service {
namespace {

using imaging::DepthMap;
using imaging::RasterImage;
using nlohmann::json;
using refocus::testing::max_abs_diff;
using refocus::testing::random_image;
using refocus::testing::TempDir;

RasterImage quantized(int w, int h, std::uint64_t seed) {
  return imaging::quantize8(random_image(w, h, 3, seed));
}

TEST(SceneStore, AddAndGet) {
  SceneStore store;
  const auto img = quantized(8, 6, 1);
  const auto rec = store.add(img, DepthMap(8, 6, 0.3), SceneSource::kUploaded, "cat");
  EXPECT_EQ(rec.scene_id, "cat");
  EXPECT_EQ(rec.width, 8);
  EXPECT_EQ(rec.height, 6);
  EXPECT_TRUE(rec.has_depth);
  const auto got = store.get("cat");
  ASSERT_TRUE(got.has_value());
  EXPECT_EQ(max_abs_diff(*got->image, img), 0.0);
  EXPECT_EQ(got->depth->at(3, 2), 0.3);
  EXPECT_FALSE(store.get("dog").has_value());
}

TEST(SceneStore, MissingDepthFallsBackToFlatMap) {
  SceneStore store;
  const auto rec = store.add(quantized(5, 5, 2), std::nullopt, SceneSource::kUploaded);
  EXPECT_FALSE(rec.has_depth);
  const auto got = store.get(rec.scene_id);
  for (double d : got->depth->data()) EXPECT_EQ(d, kFallbackDepth);
}

TEST(SceneStore, IdsStayUnique) {
  SceneStore store;
  std::set<std::string> ids;
  for (int i = 0; i < 3; ++i) {
    ids.insert(store.add(quantized(4, 4, i), std::nullopt, SceneSource::kUploaded, "dup").scene_id);
    ids.insert(store.add(quantized(4, 4, i), std::nullopt, SceneSource::kUploaded).scene_id);
  }
  EXPECT_EQ(ids.size(), 6u);
  EXPECT_TRUE(ids.count("dup"));
  EXPECT_EQ(store.size(), 6u);
  // list() keeps insertion order.
  const auto list = store.list();
  ASSERT_EQ(list.size(), 6u);
  EXPECT_EQ(list[0].scene_id, "dup");
}

TEST(SceneStore, RejectsBadInput) {
  SceneStore store;
  EXPECT_THROW(store.add(RasterImage(), std::nullopt, SceneSource::kUploaded),
               std::invalid_argument);
  EXPECT_THROW(store.add(quantized(4, 4, 1), DepthMap(4, 5, 0.5), SceneSource::kUploaded),
               std::invalid_argument);
  EXPECT_EQ(store.size(), 0u);
}

TEST(SceneStore, LoadDirectory) {
  TempDir dir;
  const auto a = quantized(6, 4, 3);
  const auto b = quantized(5, 5, 4);
  const auto c = quantized(7, 3, 5);
  imaging::write_image(dir / "alpha.png", a);
  imaging::write_depth(dir / "alpha_depth.png", DepthMap(6, 4, 0.25));
  imaging::write_image(dir / "beta.ppm", b);
  std::filesystem::create_directories(dir / "gamma");
  imaging::write_image(dir / "gamma/aif.png", c);
  imaging::write_depth(dir / "gamma/depth.pgm", DepthMap(7, 3, 1.0));
  std::ofstream(dir / "notes.txt") << "ignored";

  SceneStore store;
  EXPECT_EQ(store.load_directory(dir.path()), 3u);
  const auto alpha = store.get("alpha");
  ASSERT_TRUE(alpha);
  EXPECT_TRUE(alpha->record.has_depth);
  EXPECT_EQ(alpha->record.source, SceneSource::kUploaded);
  EXPECT_EQ(max_abs_diff(*alpha->image, a), 0.0);
  EXPECT_NEAR(alpha->depth->at(0, 0), 0.25, 1e-5);
  const auto beta = store.get("beta");
  ASSERT_TRUE(beta);
  EXPECT_FALSE(beta->record.has_depth);
  const auto gamma = store.get("gamma");
  ASSERT_TRUE(gamma);
  EXPECT_TRUE(gamma->record.has_depth);
  EXPECT_EQ(gamma->depth->at(6, 2), 1.0);
  EXPECT_FALSE(store.get("alpha_depth"));

  EXPECT_THROW(store.load_directory(dir / "missing"), std::runtime_error);
}

TEST(SceneStore, ProceduralScenes) {
  SceneStore store;
  store.add_procedural(2, 9, 24, 16);
  const auto list = store.list();
  ASSERT_EQ(list.size(), 2u);
  for (const auto& r : list) {
    EXPECT_EQ(r.source, SceneSource::kProcedural);
    EXPECT_EQ(r.width, 24);
    EXPECT_EQ(r.height, 16);
    EXPECT_TRUE(r.has_depth);
  }
  EXPECT_EQ(to_string(SceneSource::kProcedural), "procedural");
  EXPECT_EQ(to_string(SceneSource::kUploaded), "uploaded");
}

TEST(RenderRequest, ParsesValidBodies) {
  const auto r = parse_render_request(
      R"({"scene_id":"s","fx":0.25,"fy":1,"bokeh":30,"overlay_focus_set":true,"eps":0.1})");
  EXPECT_EQ(r.scene_id, "s");
  EXPECT_EQ(r.fx, 0.25);
  EXPECT_EQ(r.fy, 1.0);
  EXPECT_EQ(r.bokeh, 30.0);
  EXPECT_TRUE(r.overlay_focus_set);
  EXPECT_EQ(r.eps, 0.1);

  const auto d = parse_render_request(R"({"scene_id":"s","fx":0,"fy":0,"bokeh":0})");
  EXPECT_FALSE(d.overlay_focus_set);
  EXPECT_EQ(d.eps, 0.025);
}

TEST(RenderRequest, RejectsMalformedBodies) {
  for (const char* body : {
           "",
           "not json",
           "[1,2]",
           R"({"fx":0.5,"fy":0.5,"bokeh":1})",
           R"({"scene_id":3,"fx":0.5,"fy":0.5,"bokeh":1})",
           R"({"scene_id":"s","fy":0.5,"bokeh":1})",
           R"({"scene_id":"s","fx":"0.5","fy":0.5,"bokeh":1})",
           R"({"scene_id":"s","fx":-0.1,"fy":0.5,"bokeh":1})",
           R"({"scene_id":"s","fx":0.5,"fy":1.01,"bokeh":1})",
           R"({"scene_id":"s","fx":0.5,"fy":0.5,"bokeh":30.5})",
           R"({"scene_id":"s","fx":0.5,"fy":0.5,"bokeh":-1})",
           R"({"scene_id":"s","fx":0.5,"fy":0.5,"bokeh":1,"overlay_focus_set":1})",
           R"({"scene_id":"s","fx":0.5,"fy":0.5,"bokeh":1,"eps":-0.5})",
       }) {
    EXPECT_THROW(parse_render_request(body), std::invalid_argument) << body;
  }
}

TEST(RenderPng, ZeroBokehIsIdentity) {
  SceneStore store;
  store.add_procedural(1, 3, 32, 32);
  const auto scene = *store.get("procedural-0");
  RenderRequest req;
  req.scene_id = "procedural-0";
  req.fx = 0.3;
  req.fy = 0.7;
  const auto png = render_png(scene, req);
  EXPECT_EQ(max_abs_diff(imaging::decode_image(png, "r"), *scene.image), 0.0);
  EXPECT_EQ(render_png(scene, req), png);
}

// ---- HTTP ------------------------------------------------------------------

class HttpApi : public ::testing::Test {
 protected:
  void SetUp() override {
    store_.add_procedural(2, 17, 40, 32);
    std::ofstream(static_dir_ / "index.html") << "<html>refocus</html>";
    ServiceOptions opts;
    opts.host = "127.0.0.1";
    opts.port = 0;
    opts.static_dir = static_dir_.path();
    service_ = std::make_unique<HttpService>(store_, opts);
    port_ = service_->bind();
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { service_->listen(); });
    service_->wait_until_ready();
  }

  void TearDown() override {
    service_->stop();
    if (thread_.joinable()) thread_.join();
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(30, 0);
    return c;
  }

  static std::string render_body(const std::string& id, double fx, double fy, double b) {
    return json{{"scene_id", id}, {"fx", fx}, {"fy", fy}, {"bokeh", b}}.dump();
  }

  SceneStore store_;
  TempDir static_dir_{"refocus_static"};
  std::unique_ptr<HttpService> service_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(HttpApi, ListsScenes) {
  auto res = client().Get("/api/scenes");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const auto j = json::parse(res->body);
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0].at("scene_id"), "procedural-0");
  EXPECT_EQ(j[0].at("width"), 40);
  EXPECT_EQ(j[0].at("height"), 32);
  EXPECT_EQ(j[0].at("source"), "procedural");
  EXPECT_EQ(j[0].at("has_depth"), true);
}

TEST_F(HttpApi, RenderAtZeroBokehReturnsStoredImage) {
  auto res = client().Post("/api/render", render_body("procedural-1", 0.5, 0.5, 0.0),
                           "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Content-Type"), "image/png");
  EXPECT_TRUE(res->has_header("X-Render-Latency-Ms"));
  EXPECT_GE(std::stod(res->get_header_value("X-Render-Latency-Ms")), 0.0);
  const auto decoded = imaging::decode_image(res->body, "response");
  EXPECT_EQ(max_abs_diff(decoded, *store_.get("procedural-1")->image), 0.0);
}

TEST_F(HttpApi, RenderMatchesLibraryAndRepeats) {
  const auto scene = *store_.get("procedural-0");
  const auto expected = imaging::encode_png(
      bokeh::refocus_classical(*scene.image, *scene.depth, 0.2, 0.8, 12.0));
  auto c = client();
  auto first = c.Post("/api/render", render_body("procedural-0", 0.2, 0.8, 12.0),
                      "application/json");
  auto second = c.Post("/api/render", render_body("procedural-0", 0.2, 0.8, 12.0),
                       "application/json");
  ASSERT_TRUE(first && second);
  EXPECT_EQ(first->body, expected);
  EXPECT_EQ(second->body, first->body);
}

TEST_F(HttpApi, OverlayTintsOnlyTheFocusSet) {
  const auto scene = *store_.get("procedural-0");
  auto res = client().Post(
      "/api/render",
      json{{"scene_id", "procedural-0"}, {"fx", 0.5}, {"fy", 0.5}, {"bokeh", 0},
           {"overlay_focus_set", true}, {"eps", 0.05}}
          .dump(),
      "application/json");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200);
  const auto out = imaging::decode_image(res->body, "overlay");
  const auto& depth = *scene.depth;
  const double d = depth.at(imaging::normalized_to_pixel(0.5, depth.width()),
                            imaging::normalized_to_pixel(0.5, depth.height()));
  const auto mask = dof::focus_set(depth, d, 0.05);
  int tinted = 0;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const bool same = out.at(x, y, 0) == scene.image->at(x, y, 0) &&
                        out.at(x, y, 1) == scene.image->at(x, y, 1) &&
                        out.at(x, y, 2) == scene.image->at(x, y, 2);
      if (mask.at(x, y)) {
        ++tinted;
        EXPECT_FALSE(same) << x << "," << y;
      } else {
        EXPECT_TRUE(same) << x << "," << y;
      }
    }
  }
  EXPECT_GT(tinted, 0);
}

TEST_F(HttpApi, RenderErrors) {
  auto c = client();
  auto missing = c.Post("/api/render", render_body("nope", 0.5, 0.5, 1.0), "application/json");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  EXPECT_NE(json::parse(missing->body).at("error").get<std::string>().find("nope"),
            std::string::npos);

  auto bad = c.Post("/api/render", "{oops", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_TRUE(json::parse(bad->body).contains("error"));

  auto range = c.Post("/api/render", render_body("procedural-0", 0.5, 0.5, 31.0),
                      "application/json");
  ASSERT_TRUE(range);
  EXPECT_EQ(range->status, 400);
}

TEST_F(HttpApi, FocusSetMatchesLibrary) {
  const auto scene = *store_.get("procedural-0");
  const auto& depth = *scene.depth;
  // Click the first pixel on the 0.5 layer.
  int cx = -1, cy = -1;
  for (int y = 0; y < depth.height() && cx < 0; ++y)
    for (int x = 0; x < depth.width(); ++x)
      if (depth.at(x, y) == 0.5) {
        cx = x;
        cy = y;
        break;
      }
  ASSERT_GE(cx, 0);
  const double fx = imaging::pixel_to_normalized(cx, depth.width());
  const double fy = imaging::pixel_to_normalized(cy, depth.height());
  auto res = client().Get("/api/focus_set?scene_id=procedural-0&fx=" + std::to_string(fx) +
                          "&fy=" + std::to_string(fy) + "&eps=0.05");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200);
  const auto got = imaging::decode_image(res->body, "mask");
  const auto expected = dof::focus_set(depth, 0.5, 0.05).to_image();
  EXPECT_EQ(max_abs_diff(got, expected), 0.0);
}

TEST_F(HttpApi, FocusSetErrors) {
  auto c = client();
  auto r1 = c.Get("/api/focus_set?scene_id=procedural-0&fx=0.5");
  ASSERT_TRUE(r1);
  EXPECT_EQ(r1->status, 400);
  auto r2 = c.Get("/api/focus_set?scene_id=procedural-0&fx=abc&fy=0.5");
  ASSERT_TRUE(r2);
  EXPECT_EQ(r2->status, 400);
  auto r3 = c.Get("/api/focus_set?scene_id=procedural-0&fx=1.5&fy=0.5");
  ASSERT_TRUE(r3);
  EXPECT_EQ(r3->status, 400);
  auto r4 = c.Get("/api/focus_set?scene_id=zzz&fx=0.5&fy=0.5");
  ASSERT_TRUE(r4);
  EXPECT_EQ(r4->status, 404);
}

TEST_F(HttpApi, DepthVisualization) {
  auto c = client();
  auto res = c.Get("/api/depth/procedural-1");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Content-Type"), "image/png");
  const auto expected = imaging::depth_to_image(*store_.get("procedural-1")->depth);
  EXPECT_EQ(max_abs_diff(imaging::decode_image(res->body, "depth"), expected), 0.0);

  auto missing = c.Get("/api/depth/unknown");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
}

TEST_F(HttpApi, UploadWithoutDepthIsFlagged) {
  const auto img = quantized(12, 10, 21);
  httplib::MultipartFormDataItems items = {
      {"image", imaging::encode_png(img), "photo.png", "image/png"}};
  auto c = client();
  auto res = c.Post("/api/scenes", items);
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 201);
  const auto rec = json::parse(res->body);
  EXPECT_EQ(rec.at("has_depth"), false);
  EXPECT_EQ(rec.at("low_confidence_depth"), true);
  EXPECT_EQ(rec.at("source"), "uploaded");
  const std::string id = rec.at("scene_id");
  EXPECT_EQ(store_.size(), 3u);

  auto render = c.Post("/api/render", render_body(id, 0.5, 0.5, 0.0), "application/json");
  ASSERT_TRUE(render);
  ASSERT_EQ(render->status, 200);
  EXPECT_EQ(max_abs_diff(imaging::decode_image(render->body, "r"), img), 0.0);
}

TEST_F(HttpApi, UploadWithDepth) {
  const auto img = quantized(9, 7, 22);
  DepthMap depth(9, 7, 0.75);
  httplib::MultipartFormDataItems items = {
      {"image", imaging::encode_png(img), "photo.png", "image/png"},
      {"depth", imaging::encode_depth_png(depth), "depth.png", "image/png"},
      {"scene_id", "mine", "", ""}};
  auto res = client().Post("/api/scenes", items);
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 201);
  const auto rec = json::parse(res->body);
  EXPECT_EQ(rec.at("scene_id"), "mine");
  EXPECT_EQ(rec.at("has_depth"), true);
  EXPECT_EQ(rec.at("low_confidence_depth"), false);
  EXPECT_NEAR(store_.get("mine")->depth->at(4, 4), 0.75, 1e-5);
}

TEST_F(HttpApi, UploadErrors) {
  auto c = client();
  auto not_multipart = c.Post("/api/scenes", "{}", "application/json");
  ASSERT_TRUE(not_multipart);
  EXPECT_EQ(not_multipart->status, 400);

  httplib::MultipartFormDataItems garbage = {{"image", "not an image", "x.png", "image/png"}};
  auto bad = c.Post("/api/scenes", garbage);
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);

  httplib::MultipartFormDataItems mismatch = {
      {"image", imaging::encode_png(quantized(4, 4, 1)), "a.png", "image/png"},
      {"depth", imaging::encode_depth_png(DepthMap(5, 4, 0.5)), "d.png", "image/png"}};
  auto size = c.Post("/api/scenes", mismatch);
  ASSERT_TRUE(size);
  EXPECT_EQ(size->status, 400);
  EXPECT_EQ(store_.size(), 2u);
}

TEST_F(HttpApi, ConcurrentRendersAreIndependent) {
  const auto s0 = *store_.get("procedural-0");
  const auto s1 = *store_.get("procedural-1");
  const RasterImage before0 = *s0.image;
  RenderRequest r0{"procedural-0", 0.2, 0.3, 15.0};
  RenderRequest r1{"procedural-1", 0.8, 0.6, 9.0};
  const auto expected0 = render_png(s0, r0);
  const auto expected1 = render_png(s1, r1);

  std::string got[2][4];
  int status[2][4] = {};
  auto worker = [&](int k) {
    auto c = client();
    const auto& r = k == 0 ? r0 : r1;
    for (int i = 0; i < 4; ++i) {
      auto res = c.Post("/api/render", render_body(r.scene_id, r.fx, r.fy, r.bokeh),
                        "application/json");
      if (res) {
        status[k][i] = res->status;
        got[k][i] = res->body;
      }
    }
  };
  std::thread t0(worker, 0), t1(worker, 1);
  t0.join();
  t1.join();
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(status[0][i], 200);
    EXPECT_EQ(status[1][i], 200);
    EXPECT_EQ(got[0][i], expected0);
    EXPECT_EQ(got[1][i], expected1);
  }
  EXPECT_NE(expected0, expected1);
  // Rendering never touches the stored pixels.
  EXPECT_EQ(max_abs_diff(*store_.get("procedural-0")->image, before0), 0.0);
}

TEST_F(HttpApi, ServesStaticFiles) {
  auto res = client().Get("/index.html");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->body, "<html>refocus</html>");
}

}  // namespace
}  // namespace refocus::service
