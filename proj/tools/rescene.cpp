// rescene: command-line front end. Results go to files, logs to stderr.
// Exit codes: 0 success, 2 invalid input or usage, 3 numerical failure.

#include "rescene/aq.hpp"
#include "rescene/config.hpp"
#include "rescene/error.hpp"
#include "rescene/fixture.hpp"
#include "rescene/hash.hpp"
#include "rescene/io.hpp"
#include "rescene/metrics.hpp"
#include "rescene/parallel.hpp"
#include "rescene/pipeline.hpp"
#include "rescene/rasterizer.hpp"
#include "rescene/scene_geometry.hpp"
#include "rescene/services.hpp"

#include "CLI11.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <iostream>
#include <optional>

namespace {

using namespace rescene;

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string config;
  bool verbose = false;
};

// --config holds a JSON merge patch applied on top of the command's own
// configuration document.
Json apply_overrides(Json base, const GlobalOptions& g) {
  if (!g.config.empty()) base.merge_patch(load_json(g.config));
  if (g.seed) base["seed"] = *g.seed;
  if (g.threads > 0) base["workers"] = g.threads;
  return base;
}

SceneConfig load_with_overrides(const fs::path& path, const GlobalOptions& g) {
  try {
    return scene_config_from_json(apply_overrides(load_json(path), g), path.parent_path());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

// ------------------------------------------------------------------- fit

int cmd_fit(const std::string& config_path, const GlobalOptions& g) {
  const SceneConfig cfg = load_with_overrides(config_path, g);
  cfg.validate_fit();

  // Everything is read before the output directory is touched.
  FitSceneInput input;
  input.camera = *cfg.camera;
  input.scene = load_pmap(cfg.resolve(cfg.pointmap));
  if (!cfg.background_pointmap.empty()) input.background = load_pmap(cfg.resolve(cfg.background_pointmap));
  if (!cfg.floor_mask.empty()) input.floor_mask = load_mask(cfg.resolve(cfg.floor_mask));
  for (const auto& o : cfg.objects) {
    const std::string mesh_bytes = read_file(cfg.resolve(o.asset));
    input.objects.push_back({o.id, o.label, load_mask(cfg.resolve(o.mask)), parse_obj(mesh_bytes), sha256_hex(mesh_bytes)});
  }
  std::vector<TriMesh> gt;
  if (!cfg.gt_dir.empty()) gt = load_mesh_dir(cfg.resolve(cfg.gt_dir));

  const fs::path out = cfg.resolve(cfg.output_dir);
  SceneResult result = fit_scene(input, cfg, out);
  if (!gt.empty()) {
    std::vector<TriMesh> pred;
    for (const auto& o : result.objects) {
      if (o.status == "ok") pred.push_back(load_obj(out / o.mesh));
    }
    if (!pred.empty()) result.metrics = evaluate_scene(pred, gt, cfg.metrics);
  }
  save_json(out / "scene.json", to_json(result));
  spdlog::info("scene status {}, {} objects -> {}", result.status, result.objects.size(), (out / "scene.json").string());
  return result.status == "failed" ? 3 : 0;
}

// -------------------------------------------------------------- evaluate

struct EvaluateOptions {
  std::string pred;
  std::string gt;
  std::string out;
  bool no_icp = false;
  bool independent = false;
};

int cmd_evaluate(const EvaluateOptions& o, const GlobalOptions& g) {
  MetricConfig mc;
  Json overrides = apply_overrides(Json::object(), g);
  if (overrides.contains("metrics")) mc = scene_config_from_json({{"metrics", overrides["metrics"]}}, ".").metrics;
  if (g.seed) mc.seed = *g.seed;
  if (o.no_icp) mc.icp_align = false;
  if (o.independent) mc.shared_normalization = false;
  const auto pred = load_mesh_dir(o.pred);
  const auto gt = load_mesh_dir(o.gt);
  const MetricReport report = evaluate_scene(pred, gt, mc);
  const fs::path out = o.out.empty() ? fs::path(o.pred) / "metrics.json" : fs::path(o.out);
  save_json(out, to_json(report));
  spdlog::info("chamfer {:.6g}  f-score {:.4f}  iou {:.4f}  hausdorff {:.6g} -> {}", report.chamfer, report.fscore,
               report.bbox_iou, report.hausdorff, out.string());
  return 0;
}

// ------------------------------------------------------------ small tools

int cmd_stencil(const std::string& pmap, const std::string& mask, const std::string& out, double min_conf) {
  const PointCloud cloud = stencil_pointmap(load_pmap(pmap), load_mask(mask), min_conf);
  save_ply(out, cloud, PlyEncoding::BinaryLittleEndian);
  spdlog::info("{} points -> {}", cloud.size(), out);
  return 0;
}

int cmd_plane(const std::string& cloud_path, const std::string& out, const GlobalOptions& g) {
  RansacConfig rc;
  const Json overrides = apply_overrides(Json::object(), g);
  if (overrides.contains("ransac")) rc = scene_config_from_json({{"ransac", overrides["ransac"]}}, ".").ransac;
  if (g.seed) rc.seed = *g.seed;
  const RansacResult r = ransac_plane_detailed(load_ply(cloud_path), rc);
  Json j = to_json(r.plane);
  j["inliers"] = r.inliers;
  j["inlier_fraction"] = r.inlier_fraction;
  save_json(out, j);
  spdlog::info("normal ({:.4f}, {:.4f}, {:.4f}), {} inliers -> {}", r.plane.normal.x(), r.plane.normal.y(),
               r.plane.normal.z(), r.inliers, out);
  return 0;
}

int cmd_render_sil(const std::string& mesh, const std::string& camera, const std::string& out, double sigma,
                   bool hard) {
  const TriMesh m = load_obj(mesh);
  Json cj = load_json(camera);
  if (cj.contains("camera")) cj = cj["camera"];
  const Camera cam = camera_from_json(cj);
  if (hard) {
    save_mask(out, render_hard_silhouette(m, cam));
  } else {
    SoftRasterConfig rc;
    rc.sigma = sigma;
    save_prob_map(out, render_soft_silhouette(m, cam, rc));
  }
  spdlog::info("silhouette -> {}", out);
  return 0;
}

int cmd_aq_build(const std::string& image, const std::string& mask, const std::string& out,
                 const std::string& parse_response, bool cleanup) {
  const AqLayout layout;
  if (!parse_response.empty()) {
    const AqParseResult r = parse_aq_response(load_png(parse_response), layout, cleanup);
    save_png(out, r.object);
    spdlog::info("task panel {:.1f}% white{} -> {}", 100.0 * r.white_fraction, r.empty_content ? " (empty)" : "", out);
    return 0;
  }
  save_png(out, build_aq_query(load_png(image), load_mask(mask), layout));
  spdlog::info("query -> {}", out);
  return 0;
}

// -------------------------------------------------------------- pipeline

int cmd_pipeline(const std::string& config_path, const GlobalOptions& g) {
  const SceneConfig cfg = load_with_overrides(config_path, g);
  std::shared_ptr<const SceneFixture> fixture;
  if (!cfg.fixture.empty()) fixture = std::make_shared<const SceneFixture>(load_fixture(cfg.resolve(cfg.fixture)));
  ServiceSuite services = make_service_suite(cfg.services, fixture);
  const PipelineOutput out = run_pipeline(cfg, services);
  spdlog::info("scene status {}, {} objects, {} service calls, {:.2f} s", out.result.status, out.result.objects.size(),
               services.total_calls(), out.report.wall_seconds);
  return out.result.status == "failed" ? 3 : 0;
}

// ----------------------------------------------------------------- synth

int cmd_synth(const std::string& out_dir, const std::string& fixture_path, const GlobalOptions& g) {
  SceneFixture f = fixture_path.empty() ? default_fixture() : load_fixture(fixture_path);
  if (g.seed) f.seed = *g.seed;
  f.validate();
  const fs::path out(out_dir);
  save_json(out / "fixture.json", to_json(f));

  const FixtureRender scene = render_fixture(f, true);
  save_png(out / "image.png", scene.image);
  SceneFixture shifted = f;
  shifted.seed = f.seed + 1;
  FixtureRender empty = render_fixture(shifted, false);
  save_png(out / "empty_room.png", empty.image);
  for (std::size_t k = 0; k < empty.points.points.size(); ++k) {
    if (empty.points.valid[k]) empty.points.points[k] += f.empty_room_offset;
  }
  save_pmap(out / "scene.pmap", scene.points);
  save_pmap(out / "empty.pmap", empty.points);
  save_mask(out / "masks" / "floor.png", id_mask(scene, kFloorId));

  Json poses = Json::object();
  Json objects = Json::array();
  for (std::size_t i = 0; i < f.objects.size(); ++i) {
    const FixtureObject& o = f.objects[i];
    save_mask(out / "masks" / (o.id + ".png"), id_mask(scene, static_cast<int>(i)));
    save_obj(out / "assets" / (o.id + ".obj"), o.asset());
    save_obj(out / "gt" / (o.id + ".obj"), o.placed());
    poses[o.id] = {{"t", to_json(o.pose.t)}, {"r_y", o.pose.r_y}, {"s", o.pose.s}};
    objects.push_back({{"id", o.id}, {"label", o.label}, {"mask", "masks/" + o.id + ".png"}, {"asset", "assets/" + o.id + ".obj"}});
  }
  save_json(out / "gt_poses.json", poses);

  Json fit = {{"camera", to_json(f.camera)},
              {"pointmap", "scene.pmap"},
              {"background_pointmap", "empty.pmap"},
              {"floor_mask", "masks/floor.png"},
              {"objects", objects},
              {"output_dir", "fit_out"},
              {"gt_dir", "gt"},
              {"seed", f.seed}};
  save_json(out / "scene.json", fit);
  Json pipeline = {{"image", "image.png"}, {"fixture", "fixture.json"}, {"work_dir", "work"},
                   {"gt_dir", "gt"},       {"seed", f.seed}};
  save_json(out / "pipeline.json", pipeline);
  spdlog::info("synthetic room with {} objects -> {}", f.objects.size(), out.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("rescene");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");

  CLI::App app{"Single-image scene layout: pose fitting, evaluation and the mock-service pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--seed", g.seed, "Override every seed");
  app.add_option("--threads", g.threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--config", g.config, "JSON merge patch applied to the command's configuration")
      ->check(CLI::ExistingFile);
  app.add_flag("-v,--verbose", g.verbose, "Debug logging");

  std::function<int()> run;

  std::string fit_config;
  auto* fit = app.add_subcommand("fit", "Fit poses for a scene description and write the scene result");
  fit->add_option("scene", fit_config, "Scene JSON")->required();
  fit->callback([&] { run = [&] { return cmd_fit(fit_config, g); }; });

  EvaluateOptions ev;
  auto* evaluate = app.add_subcommand("evaluate", "Compare two directories of OBJ meshes");
  evaluate->add_option("--pred", ev.pred, "Predicted meshes")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--gt", ev.gt, "Ground-truth meshes")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--out", ev.out, "Metric report JSON (default: <pred>/metrics.json)");
  evaluate->add_flag("--no-icp", ev.no_icp, "Skip ICP pre-alignment");
  evaluate->add_flag("--independent-normalization", ev.independent, "Normalize each scene by its own bounds");
  evaluate->callback([&] { run = [&] { return cmd_evaluate(ev, g); }; });

  std::string st_pmap, st_mask, st_out;
  double st_conf = 0.0;
  auto* stencil = app.add_subcommand("stencil", "Cut the points under a mask out of a point map");
  stencil->add_option("--pointmap", st_pmap, "PMAP file")->required()->check(CLI::ExistingFile);
  stencil->add_option("--mask", st_mask, "Mask PNG")->required()->check(CLI::ExistingFile);
  stencil->add_option("--out", st_out, "Output PLY")->required();
  stencil->add_option("--min-confidence", st_conf, "Drop points below this confidence");
  stencil->callback([&] { run = [&] { return cmd_stencil(st_pmap, st_mask, st_out, st_conf); }; });

  std::string pl_cloud, pl_out;
  auto* plane = app.add_subcommand("plane", "RANSAC floor plane of a point cloud");
  plane->add_option("--cloud", pl_cloud, "PLY point cloud")->required()->check(CLI::ExistingFile);
  plane->add_option("--out", pl_out, "Plane JSON")->required();
  plane->callback([&] { run = [&] { return cmd_plane(pl_cloud, pl_out, g); }; });

  std::string rs_mesh, rs_camera, rs_out;
  double rs_sigma = SoftRasterConfig{}.sigma;
  bool rs_hard = false;
  auto* render = app.add_subcommand("render-sil", "Render a mesh silhouette to PNG");
  render->add_option("--mesh", rs_mesh, "OBJ mesh")->required()->check(CLI::ExistingFile);
  render->add_option("--camera", rs_camera, "Camera JSON (or a document with a 'camera' field)")
      ->required()
      ->check(CLI::ExistingFile);
  render->add_option("--out", rs_out, "Output PNG")->required();
  render->add_option("--sigma", rs_sigma, "Soft rasterizer sharpness")->check(CLI::PositiveNumber);
  render->add_flag("--hard", rs_hard, "Binary silhouette instead of coverage probability");
  render->callback([&] { run = [&] { return cmd_render_sil(rs_mesh, rs_camera, rs_out, rs_sigma, rs_hard); }; });

  std::string aq_image, aq_mask, aq_out, aq_parse;
  bool aq_cleanup = false;
  auto* aq = app.add_subcommand("aq-build", "Compose an object-completion query, or parse a response with --parse");
  aq->add_option("--image", aq_image, "Scene PNG")->check(CLI::ExistingFile);
  aq->add_option("--mask", aq_mask, "Object mask PNG")->check(CLI::ExistingFile);
  aq->add_option("--parse", aq_parse, "Editor response PNG to crop instead")->check(CLI::ExistingFile);
  aq->add_option("--out", aq_out, "Output PNG")->required();
  aq->add_flag("--cleanup", aq_cleanup, "Whiten near-white border regions when parsing");
  aq->callback([&] {
    if (aq_parse.empty() && (aq_image.empty() || aq_mask.empty())) {
      throw CLI::RequiredError("--image and --mask (or --parse)");
    }
    run = [&] { return cmd_aq_build(aq_image, aq_mask, aq_out, aq_parse, aq_cleanup); };
  });

  std::string pipe_config;
  auto* pipeline = app.add_subcommand("pipeline", "End-to-end reconstruction through the service suite");
  pipeline->require_subcommand(1);
  auto* pipeline_run = pipeline->add_subcommand("run", "Run (or resume) the pipeline for a config");
  pipeline_run->add_option("config", pipe_config, "Pipeline JSON")->required()->check(CLI::ExistingFile);
  pipeline_run->callback([&] { run = [&] { return cmd_pipeline(pipe_config, g); }; });

  std::string synth_out, synth_fixture;
  auto* synth = app.add_subcommand("synth", "Synthetic test scenes");
  synth->require_subcommand(1);
  auto* synth_gen = synth->add_subcommand("gen", "Write the synthetic room with GT masks, point maps and poses");
  synth_gen->add_option("--out", synth_out, "Output directory")->required();
  synth_gen->add_option("--fixture", synth_fixture, "Fixture JSON (default: bundled room)")->check(CLI::ExistingFile);
  synth_gen->callback([&] { run = [&] { return cmd_synth(synth_out, synth_fixture, g); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }

  spdlog::set_level(g.verbose ? spdlog::level::debug : spdlog::level::info);
  if (g.threads > 0) set_thread_count(g.threads);
  try {
    return run();
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return e.exit_code();
  } catch (const nlohmann::json::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 3;
  }
}
