#pragma once

// Object pose models and the fitting loop.
//
// Regular5: v' = R_y(r_y) * s * (v - c) + c + t, c = mesh OBB center.
// Planar4:  in the plane-local frame, l' = R_y(r) * s * (l - q) + q + (t_x, 0, t_z)
//           where q = (footprint centroid x, min local y, footprint centroid z);
//           the result is mapped back with the fixed world_from_plane frame.
//           The lowest vertex keeps its plane-local height under all four
//           parameters.

#include "rescene/losses.hpp"
#include "rescene/rasterizer.hpp"
#include "rescene/scene_geometry.hpp"
#include "rescene/types.hpp"

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace rescene {

enum class PoseModel { Planar4, Regular5 };

std::string_view to_string(PoseModel model);
PoseModel pose_model_from_string(std::string_view name);

struct PoseParams5 {
  Vec3 t = Vec3::Zero();
  double r_y = 0.0;
  double s = 1.0;
};

struct PoseParams4 {
  double t_x = 0.0;
  double t_z = 0.0;
  double r_y = 0.0;
  double s = 1.0;
};

PoseModel select_model(const BinaryMask& object_mask, const BinaryMask& floor_mask, int dilation_px = 2);

PoseParams5 init_regular(const TriMesh& mesh, const PointCloud& target);

struct PlanarInit {
  PoseParams4 params;
  TriMesh grounded;  // input mesh translated along the normal onto the plane
};

PlanarInit init_planar(const TriMesh& mesh, const Plane& plane, const PointCloud& target);

// Pivot of the Planar4 model in plane-local coordinates.
Vec3 planar_pivot(const TriMesh& mesh, const Plane& plane);

// Tangent slots: (t_x, t_y, t_z, r_y, s).
PosedMesh apply_pose_regular(const TriMesh& mesh, const PoseParams5& p, bool with_tangents);
PosedMesh apply_pose_regular(const TriMesh& mesh, const PoseParams5& p, const Vec3& pivot, bool with_tangents);

// Tangent slots: (t_x', t_z', r_y', s).
PosedMesh apply_pose_planar(const TriMesh& mesh, const PoseParams4& p, const Plane& plane, bool with_tangents);
PosedMesh apply_pose_planar(const TriMesh& mesh, const PoseParams4& p, const Plane& plane,
                            const Vec3& pivot_local, bool with_tangents);

// Minimum plane-local height over the vertices.
double min_plane_height(const TriMesh& mesh, const Plane& plane);

struct OptimizerConfig {
  int iterations = 300;
  double learning_rate = 0.05;
  double final_learning_rate = 0.005;  // cosine schedule end point
  LossWeights weights;
  SoftRasterConfig raster;
  double early_stop_eps = 1e-6;
  int early_stop_patience = 30;
  bool flip_restart = true;  // also fit from yaw + pi, keep the better run
  std::uint64_t seed = 0;

  void validate() const;
};

struct FitObject {
  TriMesh mesh;
  BinaryMask mask;
  PointCloud target;
};

struct FitScene {
  Camera camera;
  std::optional<Plane> plane;
  std::optional<Aabb> bg_bounds;
};

struct PoseStart {
  PoseModel model = PoseModel::Regular5;
  TriMesh base;  // Planar4: grounded mesh
  PoseParams4 planar;
  PoseParams5 regular;
};

PoseStart make_start(const FitObject& object, const FitScene& scene, PoseModel model);

struct FitResult {
  PoseModel model = PoseModel::Regular5;
  PoseParams4 planar;
  PoseParams5 regular;
  TriMesh base;
  Vec3 pivot = Vec3::Zero();
  TriMesh transformed;
  std::vector<LossBreakdown> history;  // winning run
  // Planar4 only: min plane-local vertex height at every iteration of every run.
  std::vector<double> ground_heights;
  LossBreakdown best;
  int best_iteration = 0;
  bool improved = false;
  bool non_finite = false;
  double wall_seconds = 0.0;
};

FitResult fit_pose(const FitObject& object, const FitScene& scene, const PoseStart& start,
                   const OptimizerConfig& cfg);
FitResult fit_pose(const FitObject& object, const FitScene& scene, PoseModel model, const OptimizerConfig& cfg);

// One loss/gradient evaluation in the optimizer's parameterization
// (log-scale in the last slot). Used by the fitting loop and gradient checks.
struct PoseObjective {
  const FitObject* object;
  const FitScene* scene;
  PoseModel model;
  const TriMesh* base;
  Vec3 pivot;
  LossWeights weights;
  SoftRasterConfig raster;

  int dof() const { return model == PoseModel::Planar4 ? 4 : 5; }
  PosedMesh pose(const Eigen::VectorXd& theta, bool with_tangents) const;
  LossBreakdown evaluate(const Eigen::VectorXd& theta) const;
  double value(const Eigen::VectorXd& theta) const;
};

Eigen::VectorXd to_theta(const PoseParams4& p);
Eigen::VectorXd to_theta(const PoseParams5& p);
PoseParams4 planar_from_theta(const Eigen::VectorXd& theta);
PoseParams5 regular_from_theta(const Eigen::VectorXd& theta);

}  // namespace rescene
