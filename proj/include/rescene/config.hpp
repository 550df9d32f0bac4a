#pragma once

// JSON configuration and result documents.

#include "rescene/aq.hpp"
#include "rescene/fixture.hpp"
#include "rescene/losses.hpp"
#include "rescene/metrics.hpp"
#include "rescene/pose.hpp"
#include "rescene/scene_geometry.hpp"
#include "rescene/services.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rescene {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct ObjectConfig {
  std::string id;
  std::string label;
  fs::path mask;
  fs::path asset;  // empty: generated by the asset service (pipeline only)
};

struct SceneConfig {
  fs::path base_dir;  // directory of the config file; relative paths resolve here

  // fit
  std::optional<Camera> camera;
  fs::path pointmap;
  fs::path background_pointmap;
  fs::path floor_mask;
  std::vector<ObjectConfig> objects;
  fs::path output_dir = "out";
  fs::path gt_dir;  // optional: evaluate against <gt_dir>/*.obj

  // pipeline
  fs::path image;
  fs::path fixture;  // mock backends render this scene
  fs::path work_dir = "work";
  ServicesConfig services;
  PromptSet prompts;
  AqLayout layout;
  bool aq_cleanup = false;

  // shared
  OptimizerConfig optimizer;
  RansacConfig ransac;
  IcpConfig background_icp{50, 1e-9, 0.1, true, true};
  MetricConfig metrics;
  double bg_percentile = 0.005;
  int dilation_px = 2;
  double min_confidence = 0.0;
  bool disable_planar = false;
  bool disable_aq = false;
  int workers = 0;  // 0: hardware concurrency
  std::uint64_t seed = 0;

  fs::path resolve(const fs::path& p) const { return p.empty() || p.is_absolute() ? p : base_dir / p; }
  void validate_fit() const;
};

struct ObjectResult {
  std::string id;
  std::string label;
  std::string status = "ok";  // ok | failed
  std::string error;
  PoseModel model = PoseModel::Regular5;
  PoseParams4 planar;
  PoseParams5 regular;
  Vec3 pivot = Vec3::Zero();
  std::string mesh;  // transformed mesh, relative to the result directory
  LossBreakdown loss;
  LossBreakdown initial_loss;
  int iterations = 0;
  int best_iteration = 0;
  bool improved = false;
  bool non_finite = false;
  std::optional<double> ground_min;  // Planar4: min plane-local height of the result
};

struct SceneResult {
  std::string status = "ok";  // ok | partial | explicit_empty | failed
  Camera camera;
  std::optional<Plane> plane;
  std::optional<Aabb> background_bounds;
  Vec3 background_shift = Vec3::Zero();
  std::vector<ObjectResult> objects;
  std::optional<MetricReport> metrics;
  std::vector<std::string> warnings;
};

Json parse_json(std::string_view text, const std::string& origin);
Json load_json(const fs::path& path);
// Pretty-printed, newline-terminated; written atomically.
void save_json(const fs::path& path, const Json& j);

Json to_json(const Vec3& v);
Vec3 vec3_from_json(const Json& j);
Json to_json(const Camera& c);
Camera camera_from_json(const Json& j);
Json to_json(const Plane& p);
Plane plane_from_json(const Json& j);
Json to_json(const Aabb& b);
Aabb aabb_from_json(const Json& j);
Json to_json(const LossBreakdown& l);
LossBreakdown loss_from_json(const Json& j);
Json to_json(const MetricReport& r);
MetricReport metric_report_from_json(const Json& j);
Json to_json(const MetricConfig& m);
Json to_json(const OptimizerConfig& o);

Json to_json(const SceneFixture& f);
SceneFixture fixture_from_json(const Json& j);
SceneFixture load_fixture(const fs::path& path);

Json to_json(const ObjectResult& r);
ObjectResult object_result_from_json(const Json& j);
Json to_json(const SceneResult& r);
SceneResult scene_result_from_json(const Json& j);

// Reads and validates field types; path existence is checked by validate_fit
// or the pipeline.
SceneConfig scene_config_from_json(const Json& j, const fs::path& base_dir);
SceneConfig load_scene_config(const fs::path& path);
Json to_json(const SceneConfig& c);

}  // namespace rescene
