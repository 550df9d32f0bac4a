#include "rescene/services.hpp"

#include "rescene/error.hpp"
#include "rescene/http_services.hpp"

#include <algorithm>

namespace rescene {

void ServiceSuite::validate() const {
  if (!segmenter || !image_editor || !asset_generator || !geometry_estimator) {
    throw Error(ErrorCode::InvalidArgument, "service suite has an unresolved endpoint");
  }
}

int ServiceSuite::total_calls() const {
  int n = 0;
  for (const Service* s : {static_cast<const Service*>(segmenter.get()), static_cast<const Service*>(image_editor.get()),
                           static_cast<const Service*>(asset_generator.get()),
                           static_cast<const Service*>(geometry_estimator.get())}) {
    if (s != nullptr) n += s->call_count();
  }
  return n;
}

namespace {

void require_fixture(const std::shared_ptr<const SceneFixture>& f, const char* who) {
  if (!f) throw Error(ErrorCode::InvalidArgument, std::string(who) + " needs a scene fixture");
}

}  // namespace

MockSegmenter::MockSegmenter(std::shared_ptr<const SceneFixture> fixture, MockMaskMode mode)
    : fixture_(std::move(fixture)), mode_(mode) {
  require_fixture(fixture_, "mock segmenter");
}

std::vector<Detection> MockSegmenter::segment(const RgbImage& image, const std::vector<std::string>& labels,
                                              std::uint64_t) {
  count_call();
  std::vector<Detection> out;
  if (mode_ == MockMaskMode::Empty) return out;
  const FixtureRender render = render_fixture(*fixture_);
  if (image.width != render.image.width || image.height != render.image.height) {
    throw Error(ErrorCode::ShapeMismatch, "image does not match the fixture camera");
  }
  auto wanted = [&labels](const std::string& l) { return std::find(labels.begin(), labels.end(), l) != labels.end(); };
  auto to_rect = [](const BinaryMask& m) {
    int x0 = m.width, y0 = m.height, x1 = -1, y1 = -1;
    for (int y = 0; y < m.height; ++y) {
      for (int x = 0; x < m.width; ++x) {
        if (!m.at(x, y)) continue;
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
    }
    BinaryMask r(m.width, m.height);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) r.set(x, y, true);
    }
    return r;
  };
  for (std::size_t i = 0; i < fixture_->objects.size(); ++i) {
    const auto& obj = fixture_->objects[i];
    if (!wanted(obj.label)) continue;
    BinaryMask m = id_mask(render, static_cast<int>(i));
    if (m.count() == 0) continue;
    if (mode_ == MockMaskMode::Rect) m = to_rect(m);
    out.push_back({obj.id, obj.label, std::move(m), 1.0});
  }
  if (wanted("floor")) {
    BinaryMask floor = id_mask(render, kFloorId);
    if (floor.count() > 0) out.push_back({"floor", "floor", std::move(floor), 1.0});
  }
  return out;
}

MockImageEditor::MockImageEditor(std::shared_ptr<const SceneFixture> fixture) : fixture_(std::move(fixture)) {}

void MockImageEditor::set_response(PromptKind kind, RgbImage image) { responses_[kind] = std::move(image); }

RgbImage MockImageEditor::edit(const RgbImage& image, const PromptTemplate& prompt, std::uint64_t) {
  count_call();
  prompt.validate();
  if (const auto it = responses_.find(prompt.kind); it != responses_.end()) return it->second;
  if (prompt.kind == PromptKind::BackgroundRemoval && fixture_) return render_fixture(*fixture_, false).image;
  return image;
}

MockAssetGenerator::MockAssetGenerator(std::shared_ptr<const SceneFixture> fixture) : fixture_(std::move(fixture)) {}

void MockAssetGenerator::set_asset(const std::string& id, TriMesh mesh) { assets_[id] = std::move(mesh); }

TriMesh MockAssetGenerator::generate(const RgbImage&, const std::string& object_id, std::uint64_t) {
  count_call();
  if (const auto it = assets_.find(object_id); it != assets_.end()) return it->second;
  if (fixture_) {
    if (const FixtureObject* o = fixture_->find(object_id)) return o->asset();
  }
  return unit_cube();
}

MockGeometryEstimator::MockGeometryEstimator(std::shared_ptr<const SceneFixture> fixture)
    : fixture_(std::move(fixture)) {
  require_fixture(fixture_, "mock geometry estimator");
}

std::vector<GeometryEstimate> MockGeometryEstimator::estimate(const std::vector<RgbImage>& images, std::uint64_t) {
  count_call();
  if (images.empty()) throw Error(ErrorCode::EmptyInput, "geometry estimation needs at least one image");
  std::vector<GeometryEstimate> out;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].width != fixture_->camera.width || images[i].height != fixture_->camera.height) {
      throw Error(ErrorCode::ShapeMismatch, "image does not match the fixture camera");
    }
    SceneFixture f = *fixture_;
    f.seed = fixture_->seed + i;
    GeometryEstimate est{render_fixture(f, i == 0).points, f.camera};
    if (i > 0) {
      for (std::size_t k = 0; k < est.points.points.size(); ++k) {
        if (est.points.valid[k]) est.points.points[k] += fixture_->empty_room_offset;
      }
    }
    out.push_back(std::move(est));
  }
  return out;
}

void ServiceEndpoint::validate(const std::string& service) const {
  if (backend != "mock" && backend != "http") {
    throw Error(ErrorCode::InvalidArgument, service + ": unknown backend '" + backend + "'");
  }
  if (backend == "http" && base_url.empty()) throw Error(ErrorCode::InvalidArgument, service + ": base_url is empty");
  if (!(timeout_s > 0)) throw Error(ErrorCode::InvalidArgument, service + ": timeout_s must be positive");
  if (retries < 0) throw Error(ErrorCode::InvalidArgument, service + ": retries must be >= 0");
}

ServiceSuite make_service_suite(const ServicesConfig& cfg, std::shared_ptr<const SceneFixture> fixture) {
  cfg.segmenter.validate("segmenter");
  cfg.image_editor.validate("image_editor");
  cfg.asset_generator.validate("asset_generator");
  cfg.geometry_estimator.validate("geometry_estimator");
  ServiceSuite suite;
  if (cfg.segmenter.backend == "mock") {
    suite.segmenter = std::make_shared<MockSegmenter>(fixture, cfg.mask_mode);
  } else {
    suite.segmenter = std::make_shared<HttpSegmenter>(cfg.segmenter);
  }
  if (cfg.image_editor.backend == "mock") {
    suite.image_editor = std::make_shared<MockImageEditor>(fixture);
  } else {
    suite.image_editor = std::make_shared<HttpImageEditor>(cfg.image_editor);
  }
  if (cfg.asset_generator.backend == "mock") {
    suite.asset_generator = std::make_shared<MockAssetGenerator>(fixture);
  } else {
    suite.asset_generator = std::make_shared<HttpAssetGenerator>(cfg.asset_generator);
  }
  if (cfg.geometry_estimator.backend == "mock") {
    suite.geometry_estimator = std::make_shared<MockGeometryEstimator>(fixture);
  } else {
    suite.geometry_estimator = std::make_shared<HttpGeometryEstimator>(cfg.geometry_estimator);
  }
  return suite;
}

}  // namespace rescene
