#pragma once

// JSON-over-HTTP clients for the four services. Images travel as base64 PNG,
// point maps as base64 PMAP, meshes as OBJ text.
//
//   POST /segment   {image, labels, seed}          -> {detections: [{id, label, mask, score}]}
//   POST /edit      {image, prompt, kind, seed}    -> {image}
//   POST /generate  {image, object_id, seed}       -> {obj}
//   POST /estimate  {images, seed}                 -> {results: [{pmap, camera}]}
//
// A bearer token is sent when the endpoint's auth_env names a set variable.
// Non-2xx responses and transport failures are retried `retries` times, then
// raise ServiceError.

#include "rescene/services.hpp"

#include <string>

namespace rescene {

class HttpSegmenter final : public Segmenter {
 public:
  explicit HttpSegmenter(ServiceEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  std::string name() const override { return "http-segmenter"; }
  std::vector<Detection> segment(const RgbImage& image, const std::vector<std::string>& labels,
                                 std::uint64_t seed) override;

 private:
  ServiceEndpoint endpoint_;
};

class HttpImageEditor final : public ImageEditor {
 public:
  explicit HttpImageEditor(ServiceEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  std::string name() const override { return "http-image-editor"; }
  RgbImage edit(const RgbImage& image, const PromptTemplate& prompt, std::uint64_t seed) override;

 private:
  ServiceEndpoint endpoint_;
};

class HttpAssetGenerator final : public AssetGenerator {
 public:
  explicit HttpAssetGenerator(ServiceEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  std::string name() const override { return "http-asset-generator"; }
  TriMesh generate(const RgbImage& object_image, const std::string& object_id, std::uint64_t seed) override;

 private:
  ServiceEndpoint endpoint_;
};

class HttpGeometryEstimator final : public GeometryEstimator {
 public:
  explicit HttpGeometryEstimator(ServiceEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  std::string name() const override { return "http-geometry-estimator"; }
  std::vector<GeometryEstimate> estimate(const std::vector<RgbImage>& images, std::uint64_t seed) override;

 private:
  ServiceEndpoint endpoint_;
};

}  // namespace rescene
