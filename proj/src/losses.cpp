#include "rescene/losses.hpp"

#include "rescene/error.hpp"
#include "rescene/spatial.hpp"

#include <algorithm>
#include <cmath>

namespace rescene {

void LossWeights::validate() const {
  if (w_sil < 0 || w_3d < 0 || w_bbox < 0 || lambda_dice < 0 || lambda_focal < 0) {
    throw Error(ErrorCode::InvalidArgument, "loss weights must be non-negative");
  }
  if (!(w_sil > 0 || w_3d > 0)) {
    throw Error(ErrorCode::InvalidArgument, "at least one of w_sil, w_3d must be positive");
  }
  if (!(focal_alpha > 0 && focal_alpha < 1)) {
    throw Error(ErrorCode::InvalidArgument, "focal_alpha must lie in (0, 1)");
  }
  if (focal_gamma < 0) throw Error(ErrorCode::InvalidArgument, "focal_gamma must be >= 0");
}

V3<Dual> PosedMesh::dual_vertex(std::size_t i) const {
  const Vec3& v = mesh.vertices[i];
  if (!has_tangents()) return V3<Dual>(v);
  const VertexTangent& t = tangents.per_vertex[i];
  return {Dual(v.x(), t.row(0).transpose()), Dual(v.y(), t.row(1).transpose()),
          Dual(v.z(), t.row(2).transpose())};
}

namespace {

void check_shape(const ProbMap& pred, const BinaryMask& target) {
  if (pred.width != target.width || pred.height != target.height ||
      pred.values.size() != target.bits.size()) {
    throw Error(ErrorCode::ShapeMismatch, "prediction and mask sizes differ");
  }
}

}  // namespace

Dual dice_loss(const ProbMap& pred, const BinaryMask& target) {
  check_shape(pred, target);
  Dual inter;
  Dual mass;
  double target_mass = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Dual p = pred.dual_at(i);
    mass += p;
    if (target.bits[i]) {
      inter += p;
      target_mass += 1.0;
    }
  }
  // Below kDiceEpsilon total mass both maps are empty: a perfect match.
  const Dual denom = mass + target_mass;
  if (denom.v < kDiceEpsilon) return Dual(0.0);
  return 1.0 - 2.0 * inter / denom;
}

Dual focal_loss(const ProbMap& pred, const BinaryMask& target, double alpha, double gamma) {
  check_shape(pred, target);
  if (pred.size() == 0) return Dual(0.0);
  Dual sum;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    Dual p = pred.dual_at(i);
    if (p.v < kFocalClamp) p = Dual(kFocalClamp);
    if (p.v > 1.0 - kFocalClamp) p = Dual(1.0 - kFocalClamp);
    if (target.bits[i]) {
      sum -= alpha * pow(1.0 - p, gamma) * log(p);
    } else {
      sum -= (1.0 - alpha) * pow(p, gamma) * log(1.0 - p);
    }
  }
  return sum / static_cast<double>(pred.size());
}

Dual point_to_mesh_loss(const PointCloud& targets, const PosedMesh& mesh) {
  if (targets.empty() || mesh.mesh.empty()) {
    throw Error(ErrorCode::EmptyInput, "point-to-mesh loss needs points and faces");
  }
  const TriangleBvh bvh(mesh.mesh);
  Dual sum;
  for (const Vec3& q : targets.points) {
    const MeshFoot hit = bvh.nearest(q);
    if (!mesh.has_tangents()) {
      sum += hit.foot.distance2;
      continue;
    }
    const auto& f = mesh.mesh.faces[hit.face];
    const Vec3& w = hit.foot.barycentric;
    const V3<Dual> foot = mesh.dual_vertex(f[0]) * Dual(w[0]) + mesh.dual_vertex(f[1]) * Dual(w[1]) +
                          mesh.dual_vertex(f[2]) * Dual(w[2]);
    const V3<Dual> diff = V3<Dual>(q) - foot;
    Dual d2 = diff.dot(diff);
    d2.v = hit.foot.distance2;
    sum += d2;
  }
  return sum / static_cast<double>(targets.size());
}

double bbox_loss(std::span<const Vec3> vertices, const Aabb& box) {
  if (vertices.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& v : vertices) {
    for (int a : {0, 2}) {
      const double over = std::max(0.0, v[a] - box.max[a]);
      const double under = std::max(0.0, box.min[a] - v[a]);
      sum += over * over + under * under;
    }
  }
  return sum / static_cast<double>(vertices.size());
}

Dual bbox_loss(const PosedMesh& mesh, const Aabb& box) {
  const auto& verts = mesh.mesh.vertices;
  if (verts.empty()) return Dual(0.0);
  Dual sum;
  for (std::size_t i = 0; i < verts.size(); ++i) {
    const V3<Dual> v = mesh.dual_vertex(i);
    for (int a : {0, 2}) {
      const Dual& c = a == 0 ? v.x : v.z;
      if (c.v > box.max[a]) {
        const Dual e = c - box.max[a];
        sum += e * e;
      } else if (c.v < box.min[a]) {
        const Dual e = box.min[a] - c;
        sum += e * e;
      }
    }
  }
  return sum / static_cast<double>(verts.size());
}

LossBreakdown total_loss(const ProbMap& pred, const BinaryMask& target_mask, const PointCloud& target_cloud,
                         const PosedMesh& mesh, const std::optional<Aabb>& bbox, const LossWeights& weights) {
  weights.validate();
  Dual sil(0.0);
  if (weights.w_sil > 0) {
    if (weights.lambda_dice > 0) sil += weights.lambda_dice * dice_loss(pred, target_mask);
    if (weights.lambda_focal > 0) {
      sil += weights.lambda_focal * focal_loss(pred, target_mask, weights.focal_alpha, weights.focal_gamma);
    }
  }
  Dual geo(0.0);
  if (weights.w_3d > 0) geo = point_to_mesh_loss(target_cloud, mesh);
  Dual box(0.0);
  if (weights.w_bbox > 0 && bbox) box = bbox_loss(mesh, *bbox);

  const Dual total = weights.w_sil * sil + weights.w_3d * geo + weights.w_bbox * box;
  LossBreakdown out;
  out.silhouette = sil.v;
  out.geometric = geo.v;
  out.bbox = box.v;
  out.total = total.v;
  out.active = mesh.has_tangents() ? mesh.tangents.active : pred.active;
  out.gradient = total.d;
  if (!std::isfinite(out.total) || !out.gradient.allFinite()) {
    throw Error(ErrorCode::NonFinite, "loss or gradient is not finite");
  }
  return out;
}

}  // namespace rescene
