#include "rescene/pipeline.hpp"

#include "rescene/error.hpp"
#include "rescene/hash.hpp"
#include "rescene/io.hpp"
#include "rescene/parallel.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <mutex>
#include <thread>

namespace rescene {

fs::path StageCache::key_path(const std::string& stage) const {
  std::string name = stage;
  std::replace(name.begin(), name.end(), ':', '_');
  return dir_ / ".cache" / (name + ".key");
}

bool StageCache::hit(const std::string& stage, const std::string& key, const std::vector<fs::path>& artifacts) const {
  const fs::path kp = key_path(stage);
  if (!fs::exists(kp)) return false;
  if (read_file(kp) != key) return false;
  return std::all_of(artifacts.begin(), artifacts.end(), [](const fs::path& p) { return fs::exists(p); });
}

void StageCache::commit(const std::string& stage, const std::string& key) const { atomic_write(key_path(stage), key); }

std::string content_key(const std::vector<std::string>& parts) {
  std::string buf;
  for (const auto& p : parts) {
    buf += std::to_string(p.size());
    buf += ':';
    buf += p;
  }
  return sha256_hex(buf);
}

std::vector<TriMesh> load_mesh_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".obj") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::EmptyInput, "no .obj files in " + dir.string());
  std::vector<TriMesh> out;
  for (const auto& f : files) out.push_back(load_obj(f));
  return out;
}

namespace {

int worker_count(const SceneConfig& cfg) {
  if (cfg.workers > 0) return cfg.workers;
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

// Runs fn(i) for i in [0, n) on up to `workers` threads; exceptions escape
// from the lowest failing index.
void for_each_worker(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto loop = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = static_cast<int>(std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers))));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(loop);
  loop();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string mask_key(const BinaryMask& m) {
  return content_key({std::to_string(m.width), std::to_string(m.height),
                      std::string(reinterpret_cast<const char*>(m.bits.data()), m.bits.size())});
}

PointCloud every_nth(const PointCloud& cloud, std::size_t max_points) {
  if (cloud.size() <= max_points) return cloud;
  const std::size_t stride = (cloud.size() + max_points - 1) / max_points;
  PointCloud out;
  for (std::size_t i = 0; i < cloud.size(); i += stride) out.points.push_back(cloud.points[i]);
  return out;
}

ObjectResult failed_object(const std::string& id, const std::string& label, const std::string& why) {
  ObjectResult r;
  r.id = id;
  r.label = label;
  r.status = "failed";
  r.error = why;
  return r;
}

std::string summarize_status(const std::vector<ObjectResult>& objects) {
  if (objects.empty()) return "explicit_empty";
  const auto ok = std::count_if(objects.begin(), objects.end(), [](const ObjectResult& o) { return o.status == "ok"; });
  if (ok == static_cast<long>(objects.size())) return "ok";
  return ok == 0 ? "failed" : "partial";
}

}  // namespace

SceneResult fit_scene(const FitSceneInput& input, const SceneConfig& cfg, const fs::path& out_dir,
                      const StageCache* cache, std::map<std::string, std::string>* stages) {
  std::mutex stages_mutex;
  auto mark = [&](const std::string& stage, const char* how) {
    if (stages == nullptr) return;
    std::lock_guard lock(stages_mutex);
    (*stages)[stage] = how;
  };
  const Camera& cam = input.camera;
  cam.validate();
  if (input.scene.width != cam.width || input.scene.height != cam.height) {
    throw Error(ErrorCode::ShapeMismatch, "point map does not match the camera");
  }
  SceneResult result;
  result.camera = cam;

  // Floor plane from the floor-mask stencil.
  if (input.floor_mask) {
    const PointCloud floor = stencil_pointmap(input.scene, *input.floor_mask, cfg.min_confidence);
    RansacConfig rc = cfg.ransac;
    rc.up_hint = -cam.pose.rotation.col(1);
    try {
      result.plane = ransac_plane(floor, rc);
    } catch (const Error& e) {
      result.warnings.push_back(std::string("floor plane: ") + e.what());
      spdlog::warn("floor plane unavailable: {}", e.what());
    }
  }

  // Background: everything outside the (dilated) object masks, optionally
  // replaced by the empty-room estimate shifted onto it.
  BinaryMask objects_mask(cam.width, cam.height);
  for (const auto& o : input.objects) {
    if (!o.mask.same_shape(objects_mask)) throw Error(ErrorCode::ShapeMismatch, "mask of '" + o.id + "' has the wrong size");
    for (std::size_t i = 0; i < o.mask.bits.size(); ++i) objects_mask.bits[i] |= o.mask.bits[i];
  }
  BinaryMask free = dilate(objects_mask, cfg.dilation_px);
  for (auto& b : free.bits) b = b ? 0 : 1;
  const PointCloud scene_bg = stencil_pointmap(input.scene, free, cfg.min_confidence);
  PointCloud background = scene_bg;
  if (input.background) {
    background = input.background->valid_cloud();
    try {
      IcpConfig icp = cfg.background_icp;
      const IcpResult shift = icp_align(every_nth(background, 5000), every_nth(scene_bg, 20000), icp);
      for (auto& p : background.points) p = shift.transform.apply(p);
      result.background_shift = shift.transform.translation;
    } catch (const Error& e) {
      result.warnings.push_back(std::string("background alignment: ") + e.what());
      spdlog::warn("background alignment skipped: {}", e.what());
    }
  }
  if (!background.empty()) result.background_bounds = background_bounds(background, cfg.bg_percentile);

  const std::string scene_key =
      content_key({sha256_hex(encode_pmap(input.scene)), result.plane ? to_json(*result.plane).dump() : "none",
                   result.background_bounds ? to_json(*result.background_bounds).dump() : "none",
                   to_json(cfg.optimizer).dump(), std::to_string(cfg.dilation_px), std::to_string(cfg.min_confidence),
                   cfg.disable_planar ? "no-planar" : "planar"});

  std::vector<ObjectResult> fitted(input.objects.size());
  for_each_worker(input.objects.size(), worker_count(cfg), [&](std::size_t i) {
    const FitObjectInput& obj = input.objects[i];
    const std::string stage = "pose:" + obj.id;
    const fs::path mesh_path = out_dir / "poses" / (obj.id + ".obj");
    const fs::path json_path = out_dir / "poses" / (obj.id + ".json");
    const fs::path csv_path = out_dir / "poses" / (obj.id + "_loss.csv");
    const std::string key = content_key({scene_key, obj.key, mask_key(obj.mask)});
    if (cache != nullptr && cache->hit(stage, key, {mesh_path, json_path, csv_path})) {
      fitted[i] = object_result_from_json(load_json(json_path));
      mark(stage, "cached");
      return;
    }
    mark(stage, "run");
    ObjectResult r;
    r.id = obj.id;
    r.label = obj.label;
    try {
      FitObject fo{obj.mesh, obj.mask, stencil_pointmap(input.scene, obj.mask, cfg.min_confidence)};
      if (fo.target.empty()) throw Error(ErrorCode::EmptyInput, "no valid points under the mask");
      PoseModel model = PoseModel::Regular5;
      if (!cfg.disable_planar && result.plane && input.floor_mask) {
        model = select_model(obj.mask, *input.floor_mask, cfg.dilation_px);
      }
      const FitScene fs_scene{cam, result.plane, result.background_bounds};
      const FitResult fit = fit_pose(fo, fs_scene, model, cfg.optimizer);
      r.model = fit.model;
      r.planar = fit.planar;
      r.regular = fit.regular;
      r.pivot = fit.pivot;
      r.loss = fit.best;
      r.initial_loss = fit.history.front();
      r.iterations = static_cast<int>(fit.history.size());
      r.best_iteration = fit.best_iteration;
      r.improved = fit.improved;
      r.non_finite = fit.non_finite;
      if (model == PoseModel::Planar4) r.ground_min = min_plane_height(fit.transformed, *result.plane);
      r.mesh = (fs::path("poses") / (obj.id + ".obj")).generic_string();
      save_obj(mesh_path, fit.transformed);
      atomic_write(csv_path, format_loss_csv(fit.history));
      save_json(json_path, to_json(r));
      if (cache != nullptr) cache->commit(stage, key);
      spdlog::info("{}: {} total {:.6g} -> {:.6g} in {} iterations", obj.id, to_string(model),
                   r.initial_loss.total, r.loss.total, r.iterations);
    } catch (const Error& e) {
      spdlog::error("{}: {}", obj.id, e.what());
      r = failed_object(obj.id, obj.label, e.what());
    }
    fitted[i] = std::move(r);
  });

  result.objects = input.failed;
  for (auto& r : fitted) result.objects.push_back(std::move(r));
  std::sort(result.objects.begin(), result.objects.end(),
            [](const ObjectResult& a, const ObjectResult& b) { return a.id < b.id; });
  result.status = summarize_status(result.objects);
  return result;
}

namespace {

struct Detections {
  std::vector<Detection> objects;
  std::optional<BinaryMask> floor;
};

Json detection_index(const std::vector<Detection>& dets) {
  Json idx = Json::array();
  for (const auto& d : dets) idx.push_back({{"id", d.id}, {"label", d.label}, {"score", d.score}, {"mask", d.id + ".png"}});
  return idx;
}

Detections split_detections(std::vector<Detection> dets) {
  Detections out;
  for (auto& d : dets) {
    if (d.label == "floor") {
      if (!out.floor) {
        out.floor = d.mask;
      } else {
        for (std::size_t i = 0; i < d.mask.bits.size(); ++i) out.floor->bits[i] |= d.mask.bits[i];
      }
    } else {
      out.objects.push_back(std::move(d));
    }
  }
  std::sort(out.objects.begin(), out.objects.end(), [](const Detection& a, const Detection& b) { return a.id < b.id; });
  return out;
}

bool safe_id(const std::string& id) {
  return !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

}  // namespace

PipelineOutput run_pipeline(const SceneConfig& cfg, ServiceSuite& services) {
  const auto t0 = std::chrono::steady_clock::now();
  services.validate();
  cfg.layout.validate();
  const fs::path work = cfg.resolve(cfg.work_dir);
  fs::create_directories(work);
  const StageCache cache(work);
  PipelineOutput out;
  std::mutex report_mutex;
  auto mark = [&](const std::string& stage, bool cached) {
    std::lock_guard lock(report_mutex);
    out.report.stages[stage] = cached ? "cached" : "run";
  };

  const fs::path image_path = cfg.resolve(cfg.image);
  if (image_path.empty() || !fs::exists(image_path)) {
    throw Error(ErrorCode::InvalidArgument, "input image not found: " + image_path.string());
  }
  const std::string image_bytes = read_file(image_path);
  const RgbImage image = decode_png(image_bytes);
  const std::string image_key = sha256_hex(image_bytes);
  const std::string seed = std::to_string(cfg.seed);

  // 1. Segmentation.
  const std::vector<std::string> labels = segmentation_labels(cfg.prompts.segmentation_labels);
  std::string label_blob;
  for (const auto& l : labels) label_blob += l + "\n";
  const std::string seg_key = content_key({"segment", image_key, label_blob, seed, services.segmenter->name()});
  const fs::path mask_dir = work / "masks";
  std::vector<Detection> dets;
  if (cache.hit("segment", seg_key, {mask_dir / "index.json"})) {
    for (const auto& e : load_json(mask_dir / "index.json")) {
      dets.push_back({e.at("id").get<std::string>(), e.at("label").get<std::string>(),
                      load_mask(mask_dir / e.at("mask").get<std::string>()), e.at("score").get<double>()});
    }
    mark("segment", true);
  } else {
    dets = services.segmenter->segment(image, labels, cfg.seed);
    for (const auto& d : dets) {
      if (!safe_id(d.id)) throw Error(ErrorCode::ServiceError, "detection id '" + d.id + "' is not a safe file name");
      if (d.mask.width != image.width || d.mask.height != image.height) {
        throw Error(ErrorCode::ShapeMismatch, "mask of '" + d.id + "' does not match the image");
      }
      save_mask(mask_dir / (d.id + ".png"), d.mask);
    }
    save_json(mask_dir / "index.json", detection_index(dets));
    cache.commit("segment", seg_key);
    mark("segment", false);
  }
  Detections split = split_detections(std::move(dets));

  auto finish = [&](SceneResult result) {
    if (!cfg.gt_dir.empty() && result.status != "explicit_empty") {
      std::vector<TriMesh> pred;
      for (const auto& o : result.objects) {
        if (o.status == "ok") pred.push_back(load_obj(work / o.mesh));
      }
      if (!pred.empty()) {
        const std::vector<TriMesh> gt = load_mesh_dir(cfg.resolve(cfg.gt_dir));
        result.metrics = evaluate_scene(pred, gt, cfg.metrics);
      }
    }
    save_json(work / "scene.json", to_json(result));
    out.report.service_calls = {{"segmenter", services.segmenter->call_count()},
                                {"image_editor", services.image_editor->call_count()},
                                {"asset_generator", services.asset_generator->call_count()},
                                {"geometry_estimator", services.geometry_estimator->call_count()}};
    out.report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Json objects = Json::array();
    for (const auto& o : result.objects) {
      objects.push_back({{"id", o.id},
                         {"status", o.status},
                         {"model", std::string(to_string(o.model))},
                         {"total_loss", o.loss.total},
                         {"error", o.error}});
    }
    Json stages = Json::object();
    for (const auto& [k, v] : out.report.stages) stages[k] = v;
    Json calls = Json::object();
    for (const auto& [k, v] : out.report.service_calls) calls[k] = v;
    save_json(work / "report.json", {{"status", result.status},
                                     {"stages", stages},
                                     {"service_calls", calls},
                                     {"objects", objects},
                                     {"wall_seconds", out.report.wall_seconds}});
    out.result = std::move(result);
    return out;
  };

  if (split.objects.empty()) {
    SceneResult empty;
    empty.status = "explicit_empty";
    if (cfg.camera) {
      empty.camera = *cfg.camera;
    } else {
      empty.camera.width = image.width;
      empty.camera.height = image.height;
      empty.camera.fx = empty.camera.fy = std::max(image.width, image.height);
      empty.camera.cx = 0.5 * (image.width - 1);
      empty.camera.cy = 0.5 * (image.height - 1);
    }
    empty.warnings.push_back("segmenter returned no object masks");
    spdlog::warn("segmenter returned no object masks; writing an empty scene");
    return finish(std::move(empty));
  }

  // 2. Empty-room image.
  const fs::path aq_dir = work / "aq";
  const fs::path empty_path = aq_dir / "empty_room.png";
  const std::string bg_key =
      content_key({"background", image_key, cfg.prompts.background_removal.text, seed, services.image_editor->name()});
  RgbImage empty_room;
  if (cache.hit("background", bg_key, {empty_path})) {
    empty_room = load_png(empty_path);
    mark("background", true);
  } else {
    empty_room = services.image_editor->edit(image, cfg.prompts.background_removal, cfg.seed);
    save_png(empty_path, empty_room);
    cache.commit("background", bg_key);
    mark("background", false);
  }

  // 3. Geometry for [scene, empty room]; the scene camera is kept.
  const fs::path geo_dir = work / "geometry";
  const std::string geo_key = content_key({"geometry", image_key, sha256_hex(encode_png(empty_room)), seed,
                                           services.geometry_estimator->name()});
  OrganizedPointMap scene_map;
  OrganizedPointMap empty_map;
  Camera camera;
  if (cache.hit("geometry", geo_key, {geo_dir / "scene.pmap", geo_dir / "empty.pmap", geo_dir / "cameras.json"})) {
    scene_map = load_pmap(geo_dir / "scene.pmap");
    empty_map = load_pmap(geo_dir / "empty.pmap");
    camera = camera_from_json(load_json(geo_dir / "cameras.json").at("scene"));
    mark("geometry", true);
  } else {
    auto est = services.geometry_estimator->estimate({image, empty_room}, cfg.seed);
    if (est.size() != 2) throw Error(ErrorCode::ServiceError, "geometry estimator must return two estimates");
    // Stored as float32; continue from the stored values so a resumed run
    // sees exactly what a fresh one did.
    save_pmap(geo_dir / "scene.pmap", est[0].points);
    save_pmap(geo_dir / "empty.pmap", est[1].points);
    scene_map = load_pmap(geo_dir / "scene.pmap");
    empty_map = load_pmap(geo_dir / "empty.pmap");
    camera = est[0].camera;
    save_json(geo_dir / "cameras.json", {{"scene", to_json(camera)}, {"empty_room", to_json(est[1].camera)}});
    cache.commit("geometry", geo_key);
    mark("geometry", false);
  }
  if (cfg.camera) camera = *cfg.camera;

  // 4. Per-object completion and asset generation.
  const Json layout_json = {{"w", cfg.layout.canvas_width},
                            {"h", cfg.layout.canvas_height},
                            {"ctx", {cfg.layout.context.x, cfg.layout.context.y, cfg.layout.context.width, cfg.layout.context.height}},
                            {"task", {cfg.layout.task.x, cfg.layout.task.y, cfg.layout.task.width, cfg.layout.task.height}},
                            {"t", cfg.layout.outline_thickness}};
  std::vector<std::optional<FitObjectInput>> prepared(split.objects.size());
  std::vector<std::optional<ObjectResult>> prep_failed(split.objects.size());
  for_each_worker(split.objects.size(), worker_count(cfg), [&](std::size_t i) {
    const Detection& det = split.objects[i];
    try {
      const std::string aq_stage = "aq:" + det.id;
      const std::string aq_key =
          content_key({"aq", image_key, mask_key(det.mask), layout_json.dump(), cfg.prompts.object_extraction.text,
                       seed, cfg.disable_aq ? "direct" : "edit", cfg.aq_cleanup ? "clean" : "raw",
                       services.image_editor->name()});
      const fs::path object_path = aq_dir / (det.id + "_object.png");
      RgbImage object_image;
      if (cache.hit(aq_stage, aq_key, {object_path})) {
        object_image = load_png(object_path);
        mark(aq_stage, true);
      } else {
        if (cfg.disable_aq) {
          object_image = build_task_panel(image, det.mask, cfg.layout);
        } else {
          const RgbImage query = build_aq_query(image, det.mask, cfg.layout);
          save_png(aq_dir / (det.id + "_query.png"), query);
          AqParseResult parsed;
          for (int attempt = 0; attempt < kAqMaxAttempts; ++attempt) {
            const RgbImage response = services.image_editor->edit(query, cfg.prompts.object_extraction,
                                                                  cfg.seed + static_cast<std::uint64_t>(attempt));
            parsed = parse_aq_response(response, cfg.layout, cfg.aq_cleanup);
            save_png(aq_dir / (det.id + "_response.png"), response);
            if (!parsed.empty_content) break;
            spdlog::warn("{}: completion attempt {} is {:.1f}% white", det.id, attempt + 1,
                         100.0 * parsed.white_fraction);
          }
          if (parsed.empty_content) spdlog::warn("{}: keeping a near-empty completion", det.id);
          object_image = std::move(parsed.object);
        }
        save_png(object_path, object_image);
        cache.commit(aq_stage, aq_key);
        mark(aq_stage, false);
      }

      const std::string asset_stage = "asset:" + det.id;
      const std::string asset_key =
          content_key({"asset", aq_key, sha256_hex(encode_png(object_image)), seed, services.asset_generator->name()});
      const fs::path asset_path = work / "assets" / (det.id + ".obj");
      TriMesh mesh;
      if (cache.hit(asset_stage, asset_key, {asset_path})) {
        mesh = load_obj(asset_path);
        mark(asset_stage, true);
      } else {
        mesh = services.asset_generator->generate(object_image, det.id, cfg.seed);
        mesh.validate();
        mesh.drop_degenerate_faces();
        save_obj(asset_path, mesh);
        cache.commit(asset_stage, asset_key);
        mark(asset_stage, false);
      }
      prepared[i] = FitObjectInput{det.id, det.label, det.mask, std::move(mesh), asset_key};
    } catch (const Error& e) {
      spdlog::error("{}: {}", det.id, e.what());
      prep_failed[i] = failed_object(det.id, det.label, e.what());
    }
  });

  // 5. Layout.
  FitSceneInput fit_input;
  fit_input.camera = camera;
  fit_input.scene = std::move(scene_map);
  fit_input.background = std::move(empty_map);
  fit_input.floor_mask = split.floor;
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    if (prepared[i]) fit_input.objects.push_back(std::move(*prepared[i]));
    if (prep_failed[i]) fit_input.failed.push_back(std::move(*prep_failed[i]));
  }
  SceneResult result = fit_scene(fit_input, cfg, work, &cache, &out.report.stages);
  return finish(std::move(result));
}

}  // namespace rescene
