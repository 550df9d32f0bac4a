#include "rescene/http_services.hpp"

#include "rescene/config.hpp"
#include "rescene/error.hpp"
#include "rescene/hash.hpp"
#include "rescene/io.hpp"

#include "httplib.h"

#include <spdlog/spdlog.h>

#include <cstdlib>

namespace rescene {

namespace {

Json post(const ServiceEndpoint& ep, const std::string& route, const Json& body) {
  httplib::Client client(ep.base_url);
  const auto secs = static_cast<time_t>(ep.timeout_s);
  const auto usecs = static_cast<time_t>((ep.timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!ep.auth_env.empty()) {
    if (const char* token = std::getenv(ep.auth_env.c_str()); token != nullptr && *token != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }
  const std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 0; attempt <= ep.retries; ++attempt) {
    auto res = client.Post(route, headers, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
    } else if (res->status < 200 || res->status >= 300) {
      last_error = "HTTP " + std::to_string(res->status);
    } else {
      return parse_json(res->body, ep.base_url + route);
    }
    spdlog::warn("{}{}: attempt {} failed: {}", ep.base_url, route, attempt + 1, last_error);
  }
  throw Error(ErrorCode::ServiceError, ep.base_url + route + ": " + last_error);
}

std::string png_b64(const RgbImage& image) { return base64_encode(encode_png(image)); }

RgbImage image_from_b64(const Json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw Error(ErrorCode::ServiceError, std::string("response lacks '") + key + "'");
  }
  return decode_png(base64_decode(j.at(key).get<std::string>()));
}

}  // namespace

std::vector<Detection> HttpSegmenter::segment(const RgbImage& image, const std::vector<std::string>& labels,
                                              std::uint64_t seed) {
  count_call();
  const Json res = post(endpoint_, "/segment", {{"image", png_b64(image)}, {"labels", labels}, {"seed", seed}});
  std::vector<Detection> out;
  if (!res.contains("detections") || !res["detections"].is_array()) {
    throw Error(ErrorCode::ServiceError, "segment response lacks 'detections'");
  }
  for (const auto& d : res["detections"]) {
    Detection det;
    det.id = d.value("id", std::string());
    det.label = d.value("label", std::string());
    det.score = d.value("score", 1.0);
    det.mask = mask_from_image(image_from_b64(d, "mask"));
    if (det.id.empty()) throw Error(ErrorCode::ServiceError, "detection without id");
    out.push_back(std::move(det));
  }
  return out;
}

RgbImage HttpImageEditor::edit(const RgbImage& image, const PromptTemplate& prompt, std::uint64_t seed) {
  count_call();
  const Json res = post(endpoint_, "/edit",
                        {{"image", png_b64(image)},
                         {"prompt", prompt.text},
                         {"kind", std::string(to_string(prompt.kind))},
                         {"seed", seed}});
  return image_from_b64(res, "image");
}

TriMesh HttpAssetGenerator::generate(const RgbImage& object_image, const std::string& object_id,
                                     std::uint64_t seed) {
  count_call();
  const Json res =
      post(endpoint_, "/generate", {{"image", png_b64(object_image)}, {"object_id", object_id}, {"seed", seed}});
  if (!res.contains("obj") || !res["obj"].is_string()) throw Error(ErrorCode::ServiceError, "response lacks 'obj'");
  return parse_obj(res["obj"].get<std::string>());
}

std::vector<GeometryEstimate> HttpGeometryEstimator::estimate(const std::vector<RgbImage>& images,
                                                              std::uint64_t seed) {
  count_call();
  Json imgs = Json::array();
  for (const auto& im : images) imgs.push_back(png_b64(im));
  const Json res = post(endpoint_, "/estimate", {{"images", imgs}, {"seed", seed}});
  if (!res.contains("results") || !res["results"].is_array() || res["results"].size() != images.size()) {
    throw Error(ErrorCode::ServiceError, "estimate response must hold one result per image");
  }
  std::vector<GeometryEstimate> out;
  for (const auto& r : res["results"]) {
    if (!r.contains("pmap") || !r.contains("camera")) throw Error(ErrorCode::ServiceError, "result lacks pmap/camera");
    out.push_back({decode_pmap(base64_decode(r["pmap"].get<std::string>())), camera_from_json(r["camera"])});
  }
  return out;
}

}  // namespace rescene
