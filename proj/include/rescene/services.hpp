#pragma once

// The four external model services behind abstract interfaces, their
// deterministic mocks, and the suite factory. Implementations must be safe
// to call from several worker threads at once.

#include "rescene/aq.hpp"
#include "rescene/fixture.hpp"
#include "rescene/image.hpp"
#include "rescene/types.hpp"

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace rescene {

class Service {
 public:
  virtual ~Service() = default;
  virtual std::string name() const = 0;
  int call_count() const { return calls_.load(); }

 protected:
  void count_call() { calls_.fetch_add(1); }

 private:
  std::atomic<int> calls_{0};
};

struct Detection {
  std::string id;
  std::string label;
  BinaryMask mask;
  double score = 1.0;
};

class Segmenter : public Service {
 public:
  virtual std::vector<Detection> segment(const RgbImage& image, const std::vector<std::string>& labels,
                                         std::uint64_t seed) = 0;
};

class ImageEditor : public Service {
 public:
  virtual RgbImage edit(const RgbImage& image, const PromptTemplate& prompt, std::uint64_t seed) = 0;
};

class AssetGenerator : public Service {
 public:
  virtual TriMesh generate(const RgbImage& object_image, const std::string& object_id, std::uint64_t seed) = 0;
};

struct GeometryEstimate {
  OrganizedPointMap points;
  Camera camera;
};

class GeometryEstimator : public Service {
 public:
  // One estimate per input image, in order, in a shared world frame.
  virtual std::vector<GeometryEstimate> estimate(const std::vector<RgbImage>& images, std::uint64_t seed) = 0;
};

struct ServiceSuite {
  std::shared_ptr<Segmenter> segmenter;
  std::shared_ptr<ImageEditor> image_editor;
  std::shared_ptr<AssetGenerator> asset_generator;
  std::shared_ptr<GeometryEstimator> geometry_estimator;

  void validate() const;
  int total_calls() const;
};

// ---------------------------------------------------------------- mocks

enum class MockMaskMode { Render, Rect, Empty };

// Masks come from the fixture's ray-cast instance ids (Render), their
// bounding rectangles (Rect), or nothing at all (Empty). The floor is
// reported under id and label "floor".
class MockSegmenter final : public Segmenter {
 public:
  MockSegmenter(std::shared_ptr<const SceneFixture> fixture, MockMaskMode mode = MockMaskMode::Render);
  std::string name() const override { return "mock-segmenter"; }
  std::vector<Detection> segment(const RgbImage& image, const std::vector<std::string>& labels,
                                 std::uint64_t seed) override;

 private:
  std::shared_ptr<const SceneFixture> fixture_;
  MockMaskMode mode_;
};

// Identity completion by default. Background removal returns the fixture's
// empty room when a fixture is set; explicit images per prompt kind win.
class MockImageEditor final : public ImageEditor {
 public:
  explicit MockImageEditor(std::shared_ptr<const SceneFixture> fixture = nullptr);
  std::string name() const override { return "mock-image-editor"; }
  void set_response(PromptKind kind, RgbImage image);
  RgbImage edit(const RgbImage& image, const PromptTemplate& prompt, std::uint64_t seed) override;

 private:
  std::shared_ptr<const SceneFixture> fixture_;
  std::map<PromptKind, RgbImage> responses_;
};

// Fixture asset by object id; unit cube otherwise.
class MockAssetGenerator final : public AssetGenerator {
 public:
  explicit MockAssetGenerator(std::shared_ptr<const SceneFixture> fixture = nullptr);
  std::string name() const override { return "mock-asset-generator"; }
  void set_asset(const std::string& id, TriMesh mesh);
  TriMesh generate(const RgbImage& object_image, const std::string& object_id, std::uint64_t seed) override;

 private:
  std::shared_ptr<const SceneFixture> fixture_;
  std::map<std::string, TriMesh> assets_;
};

// Image 0 is the furnished scene, image 1 the empty room shifted by the
// fixture's empty_room_offset.
class MockGeometryEstimator final : public GeometryEstimator {
 public:
  explicit MockGeometryEstimator(std::shared_ptr<const SceneFixture> fixture);
  std::string name() const override { return "mock-geometry-estimator"; }
  std::vector<GeometryEstimate> estimate(const std::vector<RgbImage>& images, std::uint64_t seed) override;

 private:
  std::shared_ptr<const SceneFixture> fixture_;
};

// ---------------------------------------------------------------- config

struct ServiceEndpoint {
  std::string backend = "mock";  // "mock" or "http"
  std::string base_url;
  std::string auth_env;           // env var holding a bearer token
  double timeout_s = 120.0;
  int retries = 2;

  void validate(const std::string& service) const;
};

struct ServicesConfig {
  ServiceEndpoint segmenter;
  ServiceEndpoint image_editor;
  ServiceEndpoint asset_generator;
  ServiceEndpoint geometry_estimator;
  MockMaskMode mask_mode = MockMaskMode::Render;
};

// Mock endpoints need `fixture`; a missing fixture with a mock geometry
// estimator or segmenter is an InvalidArgument.
ServiceSuite make_service_suite(const ServicesConfig& cfg, std::shared_ptr<const SceneFixture> fixture);

}  // namespace rescene
