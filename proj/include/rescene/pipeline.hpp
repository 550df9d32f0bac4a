#pragma once

// Scene assembly: the fit stage shared by `fit` and `pipeline run`, the
// content-addressed stage cache, and the end-to-end orchestrator.
//
// Work directory layout:
//   masks/      index.json + one PNG per detection
//   aq/         <id>_query.png, <id>_response.png, <id>_object.png, empty_room.png
//   assets/     <id>.obj as returned by the asset service
//   geometry/   scene.pmap, empty.pmap, cameras.json
//   poses/      <id>.obj (placed mesh), <id>.json, <id>_loss.csv
//   scene.json  SceneResult
//   report.json stage cache hits, service call counts, per-object status
//   .cache/     <stage>.key content hashes

#include "rescene/config.hpp"
#include "rescene/services.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rescene {

class StageCache {
 public:
  explicit StageCache(fs::path work_dir) : dir_(std::move(work_dir)) {}

  // True iff the stored key equals `key` and every artifact exists.
  bool hit(const std::string& stage, const std::string& key, const std::vector<fs::path>& artifacts) const;
  void commit(const std::string& stage, const std::string& key) const;

 private:
  fs::path key_path(const std::string& stage) const;
  fs::path dir_;
};

// SHA-256 over length-prefixed parts.
std::string content_key(const std::vector<std::string>& parts);

struct FitObjectInput {
  std::string id;
  std::string label;
  BinaryMask mask;
  TriMesh mesh;
  std::string key;  // content key of the mesh source, for the pose cache
};

struct FitSceneInput {
  Camera camera;
  OrganizedPointMap scene;
  std::optional<OrganizedPointMap> background;
  std::optional<BinaryMask> floor_mask;
  std::vector<FitObjectInput> objects;
  std::vector<ObjectResult> failed;  // objects that never reached the fit stage
};

// Floor plane, background alignment and bounds, then one pose fit per object
// on `cfg.workers` threads. Writes poses/ under out_dir. Per-object failures
// are recorded, not thrown. With a cache, `stages` receives "pose:<id>" ->
// "run" | "cached".
SceneResult fit_scene(const FitSceneInput& input, const SceneConfig& cfg, const fs::path& out_dir,
                      const StageCache* cache = nullptr, std::map<std::string, std::string>* stages = nullptr);

// Loads <dir>/*.obj in name order.
std::vector<TriMesh> load_mesh_dir(const fs::path& dir);

struct PipelineReport {
  std::map<std::string, std::string> stages;  // stage -> "run" | "cached"
  std::map<std::string, int> service_calls;
  double wall_seconds = 0.0;
};

struct PipelineOutput {
  SceneResult result;
  PipelineReport report;
};

PipelineOutput run_pipeline(const SceneConfig& cfg, ServiceSuite& services);

}  // namespace rescene
