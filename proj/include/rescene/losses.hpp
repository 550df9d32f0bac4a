#pragma once

#include "rescene/dual.hpp"
#include "rescene/rasterizer.hpp"
#include "rescene/types.hpp"

#include <optional>
#include <span>

namespace rescene {

struct LossWeights {
  double w_sil = 1.0;
  double w_3d = 1.0;
  double w_bbox = 0.1;
  double lambda_dice = 1.0;
  double lambda_focal = 1.0;
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;

  void validate() const;
};

struct LossBreakdown {
  double silhouette = 0.0;  // lambda_dice * dice + lambda_focal * focal, unweighted by w_sil
  double geometric = 0.0;
  double bbox = 0.0;
  double total = 0.0;
  int active = 0;
  Grad gradient = Grad::Zero();
};

// A mesh after the pose transform, optionally with d(vertex)/d(theta).
struct PosedMesh {
  TriMesh mesh;
  TangentField tangents;

  bool has_tangents() const { return !tangents.per_vertex.empty(); }
  V3<Dual> dual_vertex(std::size_t i) const;
};

// Dice is 1 - 2 sum(p m) / (sum p + sum m); a total mass below kDiceEpsilon
// counts as two empty maps and scores 0.
inline constexpr double kDiceEpsilon = 1e-6;
inline constexpr double kFocalClamp = 1e-6;

Dual dice_loss(const ProbMap& pred, const BinaryMask& target);
Dual focal_loss(const ProbMap& pred, const BinaryMask& target, double alpha, double gamma);

// Mean squared distance from each target point to its nearest triangle. The
// tangent holds the nearest triangle and barycentric foot fixed.
Dual point_to_mesh_loss(const PointCloud& targets, const PosedMesh& mesh);

// Mean over vertices of the squared X/Z excursion outside the box. Y is
// never penalized.
double bbox_loss(std::span<const Vec3> vertices, const Aabb& box);
Dual bbox_loss(const PosedMesh& mesh, const Aabb& box);

LossBreakdown total_loss(const ProbMap& pred, const BinaryMask& target_mask, const PointCloud& target_cloud,
                         const PosedMesh& mesh, const std::optional<Aabb>& bbox, const LossWeights& weights);

}  // namespace rescene
