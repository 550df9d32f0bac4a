#include "rescene/pose.hpp"

#include "rescene/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

namespace rescene {

std::string_view to_string(PoseModel model) {
  return model == PoseModel::Planar4 ? "planar4" : "regular5";
}

PoseModel pose_model_from_string(std::string_view name) {
  if (name == "planar4") return PoseModel::Planar4;
  if (name == "regular5") return PoseModel::Regular5;
  throw Error(ErrorCode::InvalidArgument, "unknown pose model '" + std::string(name) + "'");
}

PoseModel select_model(const BinaryMask& object_mask, const BinaryMask& floor_mask, int dilation_px) {
  return mask_iou(object_mask, floor_mask, dilation_px) > 0.0 ? PoseModel::Planar4 : PoseModel::Regular5;
}

namespace {

template <class T>
V3<T> yaw_scale(const V3<T>& d, const T& yaw, const T& s) {
  const T c = cos(yaw);
  const T sn = sin(yaw);
  return {(c * d.x + sn * d.z) * s, d.y * s, (c * d.z - sn * d.x) * s};
}

template <class T>
std::vector<V3<T>> regular_vertices(const TriMesh& mesh, const Vec3& pivot, const V3<T>& t, const T& yaw,
                                    const T& s) {
  std::vector<V3<T>> out;
  out.reserve(mesh.vertices.size());
  const V3<T> c(pivot);
  for (const auto& v : mesh.vertices) {
    out.push_back(yaw_scale(V3<T>(Vec3(v - pivot)), yaw, s) + c + t);
  }
  return out;
}

template <class T>
std::vector<V3<T>> planar_vertices(const TriMesh& mesh, const RigidTransform& frame, const Vec3& pivot_local,
                                   const T& tx, const T& tz, const T& yaw, const T& s) {
  std::vector<V3<T>> out;
  out.reserve(mesh.vertices.size());
  const Mat3 rt = frame.rotation.transpose();
  const V3<T> q(pivot_local);
  const V3<T> shift(tx, T(0.0), tz);
  const V3<T> origin(frame.translation);
  for (const auto& v : mesh.vertices) {
    const Vec3 local = rt * (v - frame.translation);
    const V3<T> moved = yaw_scale(V3<T>(Vec3(local - pivot_local)), yaw, s) + q + shift;
    out.push_back(mat_mul(frame.rotation, moved) + origin);
  }
  return out;
}

PosedMesh to_posed(const TriMesh& mesh, const std::vector<V3<double>>& verts) {
  PosedMesh out;
  out.mesh = mesh;
  for (std::size_t i = 0; i < verts.size(); ++i) out.mesh.vertices[i] = verts[i].value();
  return out;
}

PosedMesh to_posed(const TriMesh& mesh, const std::vector<V3<Dual>>& verts, int active) {
  PosedMesh out;
  out.mesh = mesh;
  out.tangents.active = active;
  out.tangents.per_vertex.resize(verts.size());
  for (std::size_t i = 0; i < verts.size(); ++i) {
    out.mesh.vertices[i] = verts[i].value();
    out.tangents.per_vertex[i].row(0) = verts[i].x.d.transpose();
    out.tangents.per_vertex[i].row(1) = verts[i].y.d.transpose();
    out.tangents.per_vertex[i].row(2) = verts[i].z.d.transpose();
  }
  return out;
}

double wrap_half_open(double angle, double period) {
  // Representative in (-period/2, period/2].
  double r = std::fmod(angle, period);
  if (r <= -period / 2) r += period;
  if (r > period / 2) r -= period;
  return r;
}

struct Footprint {
  Vec3 axis;      // principal horizontal direction (unit, y = 0)
  double major = 0.0;
  double minor = 0.0;
};

Footprint horizontal_footprint(const Obb& box) {
  int vertical = 0;
  box.axes.row(1).cwiseAbs().maxCoeff(&vertical);
  int a = (vertical + 1) % 3;
  int b = (vertical + 2) % 3;
  if (box.half_extents[b] > box.half_extents[a]) std::swap(a, b);
  Vec3 axis = box.axes.col(a);
  axis.y() = 0.0;
  if (axis.norm() < 1e-9) axis = Vec3::UnitX();
  return {axis.normalized(), box.half_extents[a], box.half_extents[b]};
}

double yaw_of(const Vec3& dir) { return std::atan2(-dir.z(), dir.x()); }

double extent_ratio(const Obb& target, const Obb& mesh) {
  if (!(mesh.half_extents[0] > 0.0)) throw Error(ErrorCode::DegenerateCloud, "mesh has zero extent");
  const double s = target.half_extents[0] / mesh.half_extents[0];
  return s > 0.0 ? s : 1.0;
}

std::vector<Vec3> plane_local(const TriMesh& mesh, const Plane& plane) {
  const RigidTransform inv = plane.frame.inverse();
  std::vector<Vec3> out;
  out.reserve(mesh.vertices.size());
  for (const auto& v : mesh.vertices) out.push_back(inv.apply(v));
  return out;
}

}  // namespace

PoseParams5 init_regular(const TriMesh& mesh, const PointCloud& target) {
  if (mesh.empty() || target.empty()) throw Error(ErrorCode::EmptyInput, "init needs a mesh and a target");
  const Obb mesh_box = compute_obb(mesh.vertices);
  const Obb target_box = compute_obb(target.points);

  PoseParams5 p;
  p.s = extent_ratio(target_box, mesh_box);
  const Footprint fm = horizontal_footprint(mesh_box);
  const Footprint ft = horizontal_footprint(target_box);
  const bool square = fm.minor > 0.9 * fm.major || ft.minor > 0.9 * ft.major;
  const double period = square ? std::numbers::pi / 2 : std::numbers::pi;
  p.r_y = wrap_half_open(yaw_of(ft.axis) - yaw_of(fm.axis), period);
  if (std::abs(p.r_y) < 1e-9) p.r_y = 0.0;
  p.t = target_box.center - mesh_box.center;
  return p;
}

Vec3 planar_pivot(const TriMesh& mesh, const Plane& plane) {
  if (mesh.vertices.empty()) throw Error(ErrorCode::EmptyInput, "pivot of an empty mesh");
  const std::vector<Vec3> local = plane_local(mesh, plane);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& l : local) {
    lo = std::min(lo, l.y());
    hi = std::max(hi, l.y());
  }
  const double band = lo + 0.02 * (hi - lo);
  double sx = 0.0;
  double sz = 0.0;
  int n = 0;
  for (const auto& l : local) {
    if (l.y() <= band) {
      sx += l.x();
      sz += l.z();
      ++n;
    }
  }
  return {sx / n, lo, sz / n};
}

double min_plane_height(const TriMesh& mesh, const Plane& plane) {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& v : mesh.vertices) lo = std::min(lo, plane.normal.dot(v - plane.origin));
  return lo;
}

PlanarInit init_planar(const TriMesh& mesh, const Plane& plane, const PointCloud& target) {
  if (mesh.empty() || target.empty()) throw Error(ErrorCode::EmptyInput, "init needs a mesh and a target");
  PlanarInit out;
  out.grounded = mesh;
  const double lift = min_plane_height(mesh, plane);
  for (auto& v : out.grounded.vertices) v -= lift * plane.normal;

  out.params.s = extent_ratio(compute_obb(target.points), compute_obb(mesh.vertices));
  out.params.r_y = 0.0;
  const RigidTransform inv = plane.frame.inverse();
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : target.points) centroid += inv.apply(p);
  centroid /= static_cast<double>(target.size());
  const Vec3 pivot = planar_pivot(out.grounded, plane);
  out.params.t_x = centroid.x() - pivot.x();
  out.params.t_z = centroid.z() - pivot.z();
  return out;
}

PosedMesh apply_pose_regular(const TriMesh& mesh, const PoseParams5& p, bool with_tangents) {
  return apply_pose_regular(mesh, p, compute_obb(mesh.vertices).center, with_tangents);
}

PosedMesh apply_pose_regular(const TriMesh& mesh, const PoseParams5& p, const Vec3& pivot, bool with_tangents) {
  if (!(p.s > 0.0)) throw Error(ErrorCode::InvalidArgument, "scale must be positive");
  if (!with_tangents) {
    return to_posed(mesh, regular_vertices<double>(mesh, pivot, V3<double>(p.t), p.r_y, p.s));
  }
  const V3<Dual> t(Dual::variable(p.t.x(), 0), Dual::variable(p.t.y(), 1), Dual::variable(p.t.z(), 2));
  return to_posed(mesh, regular_vertices<Dual>(mesh, pivot, t, Dual::variable(p.r_y, 3), Dual::variable(p.s, 4)),
                  5);
}

PosedMesh apply_pose_planar(const TriMesh& mesh, const PoseParams4& p, const Plane& plane, bool with_tangents) {
  return apply_pose_planar(mesh, p, plane, planar_pivot(mesh, plane), with_tangents);
}

PosedMesh apply_pose_planar(const TriMesh& mesh, const PoseParams4& p, const Plane& plane, const Vec3& pivot_local,
                            bool with_tangents) {
  if (!(p.s > 0.0)) throw Error(ErrorCode::InvalidArgument, "scale must be positive");
  if (!with_tangents) {
    return to_posed(mesh, planar_vertices<double>(mesh, plane.frame, pivot_local, p.t_x, p.t_z, p.r_y, p.s));
  }
  return to_posed(mesh,
                  planar_vertices<Dual>(mesh, plane.frame, pivot_local, Dual::variable(p.t_x, 0),
                                        Dual::variable(p.t_z, 1), Dual::variable(p.r_y, 2), Dual::variable(p.s, 3)),
                  4);
}

Eigen::VectorXd to_theta(const PoseParams4& p) {
  Eigen::VectorXd th(4);
  th << p.t_x, p.t_z, p.r_y, std::log(p.s);
  return th;
}

Eigen::VectorXd to_theta(const PoseParams5& p) {
  Eigen::VectorXd th(5);
  th << p.t.x(), p.t.y(), p.t.z(), p.r_y, std::log(p.s);
  return th;
}

PoseParams4 planar_from_theta(const Eigen::VectorXd& th) { return {th[0], th[1], th[2], std::exp(th[3])}; }

PoseParams5 regular_from_theta(const Eigen::VectorXd& th) {
  return {Vec3(th[0], th[1], th[2]), th[3], std::exp(th[4])};
}

PosedMesh PoseObjective::pose(const Eigen::VectorXd& th, bool with_tangents) const {
  if (model == PoseModel::Planar4) {
    if (!scene->plane) throw Error(ErrorCode::InvalidArgument, "Planar4 requires a floor plane");
    if (!with_tangents) {
      return to_posed(*base, planar_vertices<double>(*base, scene->plane->frame, pivot, th[0], th[1], th[2],
                                                     std::exp(th[3])));
    }
    return to_posed(*base,
                    planar_vertices<Dual>(*base, scene->plane->frame, pivot, Dual::variable(th[0], 0),
                                          Dual::variable(th[1], 1), Dual::variable(th[2], 2),
                                          exp(Dual::variable(th[3], 3))),
                    4);
  }
  if (!with_tangents) {
    return to_posed(*base, regular_vertices<double>(*base, pivot, V3<double>(th[0], th[1], th[2]), th[3],
                                                    std::exp(th[4])));
  }
  const V3<Dual> t(Dual::variable(th[0], 0), Dual::variable(th[1], 1), Dual::variable(th[2], 2));
  return to_posed(*base, regular_vertices<Dual>(*base, pivot, t, Dual::variable(th[3], 3),
                                                exp(Dual::variable(th[4], 4))),
                  5);
}

LossBreakdown PoseObjective::evaluate(const Eigen::VectorXd& th) const {
  const PosedMesh posed = pose(th, true);
  const ProbMap prob = render_soft_silhouette(posed.mesh, scene->camera, raster, &posed.tangents);
  return total_loss(prob, object->mask, object->target, posed, scene->bg_bounds, weights);
}

double PoseObjective::value(const Eigen::VectorXd& th) const {
  const PosedMesh posed = pose(th, false);
  const ProbMap prob = render_soft_silhouette(posed.mesh, scene->camera, raster);
  return total_loss(prob, object->mask, object->target, posed, scene->bg_bounds, weights).total;
}

void OptimizerConfig::validate() const {
  if (iterations < 1) throw Error(ErrorCode::InvalidArgument, "iterations must be >= 1");
  if (!(learning_rate > 0)) throw Error(ErrorCode::InvalidArgument, "learning_rate must be positive");
  if (final_learning_rate < 0) throw Error(ErrorCode::InvalidArgument, "final_learning_rate must be >= 0");
  weights.validate();
  raster.validate();
}

PoseStart make_start(const FitObject& object, const FitScene& scene, PoseModel model) {
  PoseStart start;
  start.model = model;
  if (model == PoseModel::Planar4) {
    if (!scene.plane) throw Error(ErrorCode::InvalidArgument, "Planar4 requires a floor plane");
    PlanarInit init = init_planar(object.mesh, *scene.plane, object.target);
    start.base = std::move(init.grounded);
    start.planar = init.params;
  } else {
    start.base = object.mesh;
    start.regular = init_regular(object.mesh, object.target);
  }
  return start;
}

namespace {

struct RunResult {
  Eigen::VectorXd best_theta;
  LossBreakdown best;
  int best_iteration = 0;
  std::vector<LossBreakdown> history;
  bool non_finite = false;
};

RunResult run_adam(const PoseObjective& objective, Eigen::VectorXd theta, const OptimizerConfig& cfg,
                   std::vector<double>* ground_heights) {
  const int k = objective.dof();
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  Eigen::VectorXd m = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(k);
  RunResult run;
  run.best.total = std::numeric_limits<double>::infinity();
  double reference = run.best.total;
  int stall = 0;
  for (int it = 0; it < cfg.iterations; ++it) {
    LossBreakdown loss;
    try {
      const PosedMesh posed = objective.pose(theta, true);
      if (ground_heights != nullptr) ground_heights->push_back(min_plane_height(posed.mesh, *objective.scene->plane));
      const ProbMap prob = render_soft_silhouette(posed.mesh, objective.scene->camera, objective.raster, &posed.tangents);
      loss = total_loss(prob, objective.object->mask, objective.object->target, posed, objective.scene->bg_bounds,
                        objective.weights);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFinite || it == 0) throw;
      run.non_finite = true;
      break;
    }
    run.history.push_back(loss);
    if (loss.total < run.best.total) {
      run.best = loss;
      run.best_theta = theta;
      run.best_iteration = it;
    }
    if (reference - run.best.total > cfg.early_stop_eps) {
      reference = run.best.total;
      stall = 0;
    } else if (++stall >= cfg.early_stop_patience) {
      break;
    }

    const double progress = static_cast<double>(it) / std::max(1, cfg.iterations - 1);
    const double lr = cfg.final_learning_rate +
                      0.5 * (cfg.learning_rate - cfg.final_learning_rate) * (1.0 + std::cos(std::numbers::pi * progress));
    const Eigen::VectorXd g = loss.gradient.head(k);
    m = kBeta1 * m + (1 - kBeta1) * g;
    v = kBeta2 * v + (1 - kBeta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(kBeta1, it + 1);
    const double c2 = 1.0 - std::pow(kBeta2, it + 1);
    theta -= lr * ((m / c1).array() / ((v / c2).array().sqrt() + kEps)).matrix();
  }
  return run;
}

}  // namespace

FitResult fit_pose(const FitObject& object, const FitScene& scene, const PoseStart& start, const OptimizerConfig& cfg) {
  cfg.validate();
  if (object.mesh.empty() || start.base.empty()) throw Error(ErrorCode::EmptyMesh, "object mesh is empty");
  if (object.target.empty()) throw Error(ErrorCode::EmptyInput, "object target cloud is empty");
  if (object.mask.width != scene.camera.width || object.mask.height != scene.camera.height) {
    throw Error(ErrorCode::ShapeMismatch, "object mask does not match the camera");
  }
  const auto t0 = std::chrono::steady_clock::now();

  FitResult result;
  result.model = start.model;
  result.base = start.base;

  PoseObjective objective{&object, &scene, start.model, &result.base, Vec3::Zero(), cfg.weights, cfg.raster};
  Eigen::VectorXd theta;
  int yaw_slot = 0;
  if (start.model == PoseModel::Planar4) {
    if (!scene.plane) throw Error(ErrorCode::InvalidArgument, "Planar4 requires a floor plane");
    objective.pivot = planar_pivot(result.base, *scene.plane);
    theta = to_theta(start.planar);
    yaw_slot = 2;
  } else {
    objective.pivot = compute_obb(result.base.vertices).center;
    theta = to_theta(start.regular);
    yaw_slot = 3;
  }
  result.pivot = objective.pivot;

  std::vector<double>* heights = start.model == PoseModel::Planar4 ? &result.ground_heights : nullptr;
  RunResult best = run_adam(objective, theta, cfg, heights);
  if (cfg.flip_restart) {
    Eigen::VectorXd flipped = theta;
    flipped[yaw_slot] += std::numbers::pi;
    RunResult alt = run_adam(objective, flipped, cfg, heights);
    if (alt.best.total < best.best.total) best = std::move(alt);
  }

  result.history = std::move(best.history);
  result.best = best.best;
  result.best_iteration = best.best_iteration;
  result.non_finite = best.non_finite;
  result.improved = !result.history.empty() && result.best.total < result.history.front().total;
  if (start.model == PoseModel::Planar4) {
    result.planar = planar_from_theta(best.best_theta);
  } else {
    result.regular = regular_from_theta(best.best_theta);
  }
  result.transformed = objective.pose(best.best_theta, false).mesh;
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

FitResult fit_pose(const FitObject& object, const FitScene& scene, PoseModel model, const OptimizerConfig& cfg) {
  return fit_pose(object, scene, make_start(object, scene, model), cfg);
}

}  // namespace rescene
