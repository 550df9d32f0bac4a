// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Criteria 1-7 and 9 run in process; 8 drives the CLI binary.

#include "rescene/aq.hpp"
#include "rescene/config.hpp"
#include "rescene/hash.hpp"
#include "rescene/io.hpp"
#include "rescene/losses.hpp"
#include "rescene/metrics.hpp"
#include "rescene/pose.hpp"
#include "rescene/scene_geometry.hpp"

#include "support.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>

using namespace rescene;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Min plane-local height over every iteration of every Planar4 fit run here.
struct GroundLedger {
  std::size_t fits = 0;
  std::size_t samples = 0;
  double worst = 0.0;

  void add(const FitResult& r) {
    ++fits;
    for (double h : r.ground_heights) {
      ++samples;
      worst = std::max(worst, std::abs(h));
    }
  }
};

GroundLedger g_ground;

// ------------------------------------------------------------------ AC1

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto s = test::make_cube_scene(PoseParams4{0.1, -0.1, 0.3, 1.0}, 64, 200, 1);
  const Plane plane = *s.scene.plane;
  // A tight background box so the bbox term is active at most poses.
  FitScene scene = s.scene;
  scene.bg_bounds = Aabb{Vec3(-0.4, -1.0, -0.4), Vec3(0.4, 3.0, 0.4)};
  LossWeights w;
  w.w_bbox = 1.0;
  double worst = 0.0;
  std::ostringstream detail;
  bool pass = true;
  for (PoseModel model : {PoseModel::Planar4, PoseModel::Regular5}) {
    const Vec3 pivot = model == PoseModel::Planar4 ? planar_pivot(s.base, plane) : compute_obb(s.base.vertices).center;
    const PoseObjective obj{&s.object, &scene, model, &s.base, pivot, w, SoftRasterConfig{}};
    Rng rng(model == PoseModel::Planar4 ? 101 : 102);
    int accepted = 0, drawn = 0;
    while (accepted < 20 && drawn < 200) {
      ++drawn;
      Eigen::VectorXd th(obj.dof());
      if (model == PoseModel::Planar4) {
        th << rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-1, 1), std::log(rng.uniform(0.8, 1.25));
      } else {
        th << rng.uniform(-0.5, 0.5), rng.uniform(-0.1, 0.1), rng.uniform(-0.5, 0.5), rng.uniform(-1, 1),
            std::log(rng.uniform(0.8, 1.25));
      }
      const Eigen::VectorXd ad = obj.evaluate(th).gradient.head(obj.dof());
      const auto check = test::fd_check([&](const Eigen::VectorXd& x) { return obj.value(x); }, th, ad);
      if (!check.smooth) continue;
      ++accepted;
      worst = std::max(worst, check.error);
    }
    pass = pass && accepted == 20;
    detail << to_string(model) << " " << accepted << "/" << drawn << " poses; ";
  }
  const double secs = seconds_since(t0);
  pass = pass && worst < 1e-3 && secs < 60.0;
  detail << "max rel err " << fmt_g(worst) << ", " << fmt_g(secs) << " s";
  return {pass, detail.str()};
}

// ------------------------------------------------------------------ AC3 (+AC2 data)

double min_height(const TriMesh& m, const Plane& plane) {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& v : m.vertices) lo = std::min(lo, plane.signed_distance(v));
  return lo;
}

Outcome pose_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2024);
  int recovered = 0, lifted = 0;
  double worst_t = 0.0, worst_yaw = 0.0, worst_s = 0.0, max_lift = 0.0;
  for (int seed = 0; seed < 10; ++seed) {
    const PoseParams4 gt{rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.6, 0.6), 1.0};
    auto s = test::make_cube_scene(gt, 256, 2000, 100 + seed);
    PoseStart start;
    start.model = PoseModel::Planar4;
    start.base = s.base;
    start.planar = PoseParams4{gt.t_x + 0.2, gt.t_z + 0.1, gt.r_y + test::deg(10), gt.s * 1.15};
    const FitResult r = fit_pose(s.object, s.scene, start, OptimizerConfig{});
    g_ground.add(r);
    const double extent = gt.s;  // cube side
    const double et = std::hypot(r.planar.t_x - gt.t_x, r.planar.t_z - gt.t_z) / extent;
    const double eyaw = std::abs(std::remainder(r.planar.r_y - gt.r_y, kPi / 2));  // cube yaw symmetry
    const double es = std::abs(r.planar.s / gt.s - 1.0);
    worst_t = std::max(worst_t, et);
    worst_yaw = std::max(worst_yaw, eyaw);
    worst_s = std::max(worst_s, es);
    if (et <= 0.02 && eyaw <= test::deg(2) && es <= 0.02) ++recovered;

    // Ablation: unconstrained model from the same start, no bbox term.
    OptimizerConfig ablate;
    ablate.weights.w_bbox = 0.0;
    PoseStart free_start;
    free_start.model = PoseModel::Regular5;
    free_start.base = s.base;
    free_start.regular = PoseParams5{Vec3(start.planar.t_x, 0.0, start.planar.t_z), start.planar.r_y, start.planar.s};
    const FitResult f = fit_pose(s.object, s.scene, free_start, ablate);
    const double lift = std::abs(min_height(f.transformed, *s.scene.plane));
    max_lift = std::max(max_lift, lift);
    if (lift > 1e-3) ++lifted;
  }
  const double secs = seconds_since(t0);
  const bool pass = recovered == 10 && lifted >= 1 && secs < 300.0;
  std::ostringstream d;
  d << "planar4 " << recovered << "/10 (worst t " << fmt_g(100 * worst_t) << "% of extent, yaw "
    << fmt_g(worst_yaw * 180 / kPi) << " deg, scale " << fmt_g(100 * worst_s) << "%); regular5 off-plane in " << lifted
    << "/10 (max " << fmt_g(max_lift) << "); " << fmt_g(secs) << " s";
  return {pass, d.str()};
}

// Extra Planar4 fits on a tilted floor, for the ground ledger.
void tilted_plane_fits() {
  const Vec3 n = Eigen::AngleAxisd(test::deg(10), Vec3::UnitX()) * Vec3::UnitY();
  const Plane plane = Plane::from_normal_point(n, Vec3(0.0, 0.1, 0.0));
  TriMesh on_plane = test::grounded_cube();
  on_plane = transformed(on_plane, plane.frame);
  Rng rng(7);
  for (int i = 0; i < 3; ++i) {
    const PoseParams4 gt{rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-1, 1), rng.uniform(0.8, 1.2)};
    const TriMesh gt_mesh = apply_pose_planar(on_plane, gt, plane, false).mesh;
    const Camera cam = test::cube_camera(128);
    // Unit cube at the origin: the fit must ground it itself.
    const FitObject obj{unit_cube(), render_hard_silhouette(gt_mesh, cam), sample_surface(gt_mesh, 1000, 50 + i)};
    const FitScene scene{cam, plane, Aabb{Vec3(-2, -1, -2), Vec3(2, 3, 2)}};
    OptimizerConfig cfg;
    cfg.iterations = 120;
    g_ground.add(fit_pose(obj, scene, PoseModel::Planar4, cfg));
  }
}

Outcome planar_guarantee() {
  const bool pass = g_ground.fits > 0 && g_ground.samples > 0 && g_ground.worst <= 1e-6;
  return {pass, std::to_string(g_ground.fits) + " Planar4 fits, " + std::to_string(g_ground.samples) +
                    " iterate heights, max |min y| " + fmt_g(g_ground.worst)};
}

// ------------------------------------------------------------------ AC4

double nearest(const Vec3& p, const PointCloud& c) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : c.points) best = std::min(best, (p - q).norm());
  return best;
}

Outcome metric_oracles() {
  Rng rng(44);
  double worst = 0.0;
  bool ordered = true;
  for (int t = 0; t < 20; ++t) {
    PointCloud a, b;
    const std::size_t n = 1 + rng.index(500), m = 1 + rng.index(500);
    const Vec3 off(rng.uniform(0, 2), rng.uniform(-0.5, 0.5), 0.0);
    for (std::size_t i = 0; i < n; ++i) a.points.emplace_back(rng.normal(), rng.normal(), rng.normal());
    for (std::size_t i = 0; i < m; ++i) b.points.push_back(off + Vec3(rng.normal(), rng.normal(), rng.normal()));
    const double tau = rng.uniform(0.05, 0.5);

    double ab = 0, ba = 0, h = 0;
    std::size_t pa = 0, rb = 0;
    for (const auto& p : a.points) {
      const double d = nearest(p, b);
      ab += d;
      h = std::max(h, d);
      pa += d <= tau;
    }
    for (const auto& p : b.points) {
      const double d = nearest(p, a);
      ba += d;
      h = std::max(h, d);
      rb += d <= tau;
    }
    const double cd = 0.5 * (ab / n + ba / m);
    const double prec = static_cast<double>(pa) / n, rec = static_cast<double>(rb) / m;
    const double f = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    const Aabb ba_box = compute_aabb(a), bb_box = compute_aabb(b);
    double inter = 1.0;
    for (int k = 0; k < 3; ++k) {
      inter *= std::max(0.0, std::min(ba_box.max[k], bb_box.max[k]) - std::max(ba_box.min[k], bb_box.min[k]));
    }
    const double va = ba_box.extent().prod(), vb = bb_box.extent().prod();
    const double iou = inter / (va + vb - inter);

    const FScore fs = fscore(a, b, tau);
    const double got_cd = chamfer(a, b), got_h = hausdorff(a, b);
    for (double e : {got_cd - cd, got_h - h, fs.precision - prec, fs.recall - rec, fs.f - f, bbox_iou3d(a, b) - iou}) {
      worst = std::max(worst, std::abs(e));
    }
    ordered = ordered && got_cd <= got_h;
  }
  return {worst <= 1e-9 && ordered,
          "20 pairs, max |metric - oracle| " + fmt_g(worst) + (ordered ? ", chamfer <= hausdorff" : ", ORDER VIOLATED")};
}

// ------------------------------------------------------------------ AC5

Outcome registration() {
  // Asymmetric shape so the registration has a unique answer.
  const TriMesh shape = merge_meshes(std::vector<TriMesh>{
      make_box(Vec3(1.0, 0.6, 0.3)), transformed(make_box(Vec3(0.3, 0.3, 0.3)), RigidTransform::from_translation(Vec3(0.5, 0.4, 0.1)))});
  const PointCloud src = sample_surface(shape, 2000, 5);
  const double diag = compute_aabb(src).diagonal();
  Rng rng(55);
  IcpConfig cfg;
  cfg.max_iterations = 200;
  cfg.convergence_eps = 1e-14;
  cfg.max_correspondence_dist = 0.0;
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Mat3 rot = Eigen::AngleAxisd(rng.uniform(0, test::deg(15)), rng.unit_vector()).toRotationMatrix();
    const Vec3 shift = rng.unit_vector() * rng.uniform(0, 0.3 * diag);
    const RigidTransform truth{rot, shift};
    PointCloud dst = src;
    for (auto& p : dst.points) p = truth.apply(p);
    const auto r = icp_align(src, dst, cfg);
    worst = std::max({worst, (r.transform.rotation - rot).cwiseAbs().maxCoeff(),
                      (r.transform.translation - shift).cwiseAbs().maxCoeff()});
  }
  IcpConfig tonly;
  tonly.translation_only = true;
  double worst_shift = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Vec3 shift = rng.unit_vector() * rng.uniform(0, 0.3 * diag);
    PointCloud dst = src;
    for (auto& p : dst.points) p += shift;
    const auto r = icp_align(src, dst, tonly);
    worst_shift = std::max(worst_shift, (r.transform.translation - shift).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-5 && worst_shift <= 1e-9,
          "20 rigid, max error " + fmt_g(worst) + "; 20 translation-only, max error " + fmt_g(worst_shift)};
}

// ------------------------------------------------------------------ AC6

Outcome ransac() {
  Rng rng(66);
  int good = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 n = rng.unit_vector();
    const Plane truth = Plane::from_normal_point(n, Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)));
    PointCloud c;
    for (int i = 0; i < 800; ++i) {
      c.points.push_back(truth.frame.apply(Vec3(rng.uniform(-1, 1), 0.002 * rng.normal(), rng.uniform(-1, 1))));
    }
    for (int i = 0; i < 200; ++i) {
      c.points.push_back(truth.origin + Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)));
    }
    RansacConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const Plane p = ransac_plane(c, cfg);
    const double angle = std::acos(std::min(1.0, std::abs(p.normal.dot(n))));
    if (angle <= test::deg(1)) ++good;
  }
  return {good >= 99, std::to_string(good) + "/100 trials within 1 deg"};
}

// ------------------------------------------------------------------ AC7

Outcome aq_protocol() {
  const fs::path dir = fs::path(RESCENE_SOURCE_DIR) / "fixtures" / "aq";
  const Json golden = load_json(dir / "golden.json");
  const AqLayout layout;
  int round_trips = 0, digests = 0;
  const auto pairs = test::aq_fixture_pairs();
  for (const auto& p : pairs) {
    const RgbImage query = build_aq_query(p.image, p.mask, layout);
    const RgbImage panel = build_task_panel(p.image, p.mask, layout);
    if (parse_aq_response(query, layout).object == panel) ++round_trips;
    if (golden.contains(p.name) && golden[p.name]["query"] == test::image_digest(query) &&
        golden[p.name]["panel"] == test::image_digest(panel)) {
      ++digests;
    }
  }
  const RgbImage response = decode_png(read_file(dir / "response.png"));
  const bool crop_ok = parse_aq_response(response, layout, true).object == decode_png(read_file(dir / "crop.png"));
  const bool pass = pairs.size() == 10 && round_trips == 10 && digests == 10 && crop_ok;
  return {pass, std::to_string(round_trips) + "/10 bit-identical round trips, " + std::to_string(digests) +
                    "/10 golden digests, golden crop " + (crop_ok ? "matches" : "DIFFERS")};
}

// ------------------------------------------------------------------ AC8

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + RESCENE_CLI + "\" " + args + " >>\"" + log.string() + "\" 2>&1";
  return std::system(cmd.c_str());
}

int total_calls(const fs::path& report) {
  int n = 0;
  for (const auto& [k, v] : load_json(report).at("service_calls").items()) n += v.get<int>();
  return n;
}

Outcome end_to_end() {
  const fs::path root = test::scratch_dir("acceptance_e2e");
  const fs::path log = root / "cli.log";
  const std::string fixture = std::string("\"") + RESCENE_FIXTURE + "\"";
  std::string hashes[2];
  for (int k = 0; k < 2; ++k) {
    const fs::path d = root / ("run" + std::to_string(k));
    if (run_cli("synth gen --out \"" + d.string() + "\" --fixture " + fixture, log) != 0 ||
        run_cli("pipeline run \"" + (d / "pipeline.json").string() + "\"", log) != 0) {
      return {false, "CLI failed, see " + log.string()};
    }
    hashes[k] = sha256_hex(read_file(d / "work" / "scene.json"));
  }
  const fs::path d = root / "run0";
  if (run_cli("pipeline run \"" + (d / "pipeline.json").string() + "\"", log) != 0) return {false, "rerun failed"};
  const int rerun_calls = total_calls(d / "work" / "report.json");
  const bool rerun_same = sha256_hex(read_file(d / "work" / "scene.json")) == hashes[0];
  if (run_cli("evaluate --pred \"" + (d / "work" / "poses").string() + "\" --gt \"" + (d / "gt").string() +
                  "\" --out \"" + (root / "metrics.json").string() + "\"",
              log) != 0) {
    return {false, "evaluate failed"};
  }
  const double cd = load_json(root / "metrics.json").at("chamfer").get<double>();
  const bool pass = hashes[0] == hashes[1] && rerun_same && rerun_calls == 0 && cd <= 5e-3;
  std::ostringstream s;
  s << "fresh runs " << (hashes[0] == hashes[1] ? "identical" : "DIFFER") << " (" << hashes[0].substr(0, 12)
    << "), rerun " << rerun_calls << " service calls" << (rerun_same ? "" : " HASH CHANGED") << ", chamfer "
    << fmt_g(cd);
  return {pass, s.str()};
}

// ------------------------------------------------------------------ AC9

Outcome loss_values() {
  auto prob = [](int w, int h, std::vector<double> v) {
    ProbMap p;
    p.width = w;
    p.height = h;
    p.values = std::move(v);
    return p;
  };
  BinaryMask top(2, 2);
  top.set(0, 0, true);
  top.set(1, 0, true);
  const double dice = dice_loss(prob(2, 2, {1, 1, 1, 1}), top).v;
  const double focal = focal_loss(prob(1, 1, {0.5}), BinaryMask(1, 1, true), 0.25, 2.0).v;

  const Aabb box{Vec3(-1, -1, -1), Vec3(1, 1, 1)};
  const std::vector<Vec3> below{Vec3(0, -50, 0), Vec3(0.5, 40, -0.5)};
  const double bbox_y = bbox_loss(below, box);

  TriMesh square;
  square.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 0, 1), Vec3(0, 0, 1)};
  square.faces = {{0, 2, 1}, {0, 3, 2}};
  PointCloud pt;
  pt.points = {Vec3(0.25, 0.5, 0.25)};
  PosedMesh posed;
  posed.mesh = square;
  const double p2m = point_to_mesh_loss(pt, posed).v;

  const double e_dice = std::abs(dice - 1.0 / 3.0);
  const double e_focal = std::abs(focal - 0.25 * 0.25 * std::log(2.0));
  const double e_p2m = std::abs(p2m - 0.25);
  const bool pass = e_dice <= 1e-9 && e_focal <= 1e-9 && bbox_y == 0.0 && e_p2m <= 1e-9;
  return {pass, "dice err " + fmt_g(e_dice) + ", focal err " + fmt_g(e_focal) + ", bbox off-Y " + fmt_g(bbox_y) +
                    ", point-to-mesh err " + fmt_g(e_p2m)};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  // AC2 reads the ground heights recorded by the fits in AC3 and the tilted-floor fits.
  const std::vector<Criterion> criteria{
      {"AC1 gradient suite", gradient_suite},
      {"AC3 synthetic pose recovery", pose_recovery},
      {"AC2 planar ground guarantee",
       [] {
         tilted_plane_fits();
         return planar_guarantee();
       }},
      {"AC4 metric oracles", metric_oracles},
      {"AC5 ICP registration", registration},
      {"AC6 RANSAC plane", ransac},
      {"AC7 A-Q protocol", aq_protocol},
      {"AC8 end-to-end mock pipeline", end_to_end},
      {"AC9 loss unit values", loss_values},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << std::endl;
  }
  std::cout << (failures == 0 ? "all 9 criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
