#include "rescene/scene_geometry.hpp"

#include "rescene/error.hpp"
#include "rescene/sampling.hpp"
#include "rescene/spatial.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace rescene {

Plane Plane::from_normal_point(const Vec3& normal, const Vec3& origin) {
  Plane p;
  p.normal = normal.normalized();
  p.origin = origin;
  p.frame = plane_local_frame(p);
  return p;
}

RigidTransform plane_local_frame(const Plane& plane) {
  const Vec3 y = plane.normal.normalized();
  Vec3 x = Vec3::UnitX() - Vec3::UnitX().dot(y) * y;
  if (x.norm() < 1e-6) x = Vec3::UnitZ() - Vec3::UnitZ().dot(y) * y;
  x.normalize();
  const Vec3 z = x.cross(y);
  RigidTransform t;
  t.rotation.col(0) = x;
  t.rotation.col(1) = y;
  t.rotation.col(2) = z;
  t.translation = plane.origin;
  return t;
}

void RansacConfig::validate() const {
  if (iterations < 1) throw Error(ErrorCode::InvalidArgument, "RANSAC needs at least one iteration");
  if (min_inlier_fraction < 0 || min_inlier_fraction > 1) {
    throw Error(ErrorCode::InvalidArgument, "min_inlier_fraction must lie in [0, 1]");
  }
}

namespace {

struct LsqPlane {
  Vec3 normal;
  Vec3 centroid;
};

LsqPlane fit_plane(const std::vector<Vec3>& pts) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) cov += (p - c) * (p - c).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  return {solver.eigenvectors().col(0).normalized(), c};
}

}  // namespace

RansacResult ransac_plane_detailed(const PointCloud& cloud, const RansacConfig& cfg) {
  cfg.validate();
  const auto& pts = cloud.points;
  if (pts.size() < 3) throw Error(ErrorCode::InsufficientPoints, "plane fitting needs at least 3 points");
  const double threshold =
      cfg.inlier_threshold > 0 ? cfg.inlier_threshold : 0.01 * compute_aabb(pts).diagonal();

  Rng rng(cfg.seed);
  std::size_t best_count = 0;
  Vec3 best_n = Vec3::UnitY();
  Vec3 best_p = pts.front();
  const std::size_t n = pts.size();
  for (int it = 0; it < cfg.iterations; ++it) {
    const std::size_t i0 = rng.index(n);
    std::size_t i1 = rng.index(n);
    std::size_t i2 = rng.index(n);
    if (i0 == i1 || i0 == i2 || i1 == i2) continue;
    const Vec3 normal = (pts[i1] - pts[i0]).cross(pts[i2] - pts[i0]);
    const double len = normal.norm();
    if (len < 1e-12) continue;
    const Vec3 unit = normal / len;
    std::size_t count = 0;
    for (const auto& p : pts) {
      if (std::abs(unit.dot(p - pts[i0])) <= threshold) ++count;
    }
    if (count > best_count) {
      best_count = count;
      best_n = unit;
      best_p = pts[i0];
    }
  }
  const double fraction = static_cast<double>(best_count) / static_cast<double>(n);
  if (best_count < 3 || fraction < cfg.min_inlier_fraction) {
    throw Error(ErrorCode::NoConsensus, "best plane explains too few points");
  }

  std::vector<Vec3> inliers;
  inliers.reserve(best_count);
  for (const auto& p : pts) {
    if (std::abs(best_n.dot(p - best_p)) <= threshold) inliers.push_back(p);
  }
  LsqPlane refined = fit_plane(inliers);
  Vec3 normal = refined.normal;
  const double up_dot = normal.dot(Vec3::UnitY());
  if (std::abs(up_dot) < 1e-6) {
    if (normal.dot(cfg.up_hint) < 0) normal = -normal;
  } else if (up_dot < 0) {
    normal = -normal;
  }
  RansacResult out;
  out.plane = Plane::from_normal_point(normal, refined.centroid);
  out.inliers = inliers.size();
  out.inlier_fraction = fraction;
  return out;
}

PointCloud stencil_pointmap(const OrganizedPointMap& map, const BinaryMask& mask, double min_confidence) {
  if (map.width != mask.width || map.height != mask.height) {
    throw Error(ErrorCode::ShapeMismatch, "point map and mask sizes differ");
  }
  PointCloud out;
  for (std::size_t i = 0; i < map.points.size(); ++i) {
    if (mask.bits[i] && map.valid[i] && map.confidence[i] >= min_confidence) {
      out.points.push_back(map.points[i]);
      out.confidence.push_back(map.confidence[i]);
    }
  }
  return out;
}

Aabb background_bounds(const PointCloud& background, double percentile) {
  const auto& pts = background.points;
  if (pts.empty()) throw Error(ErrorCode::EmptyInput, "background cloud is empty");
  if (percentile < 0 || percentile >= 0.5) {
    throw Error(ErrorCode::InvalidArgument, "percentile must lie in [0, 0.5)");
  }
  Aabb box;
  std::vector<double> axis(pts.size());
  const std::size_t last = pts.size() - 1;
  const auto lo_rank = static_cast<std::size_t>(std::floor(percentile * static_cast<double>(last)));
  const auto hi_rank = last - lo_rank;
  for (int a = 0; a < 3; ++a) {
    for (std::size_t i = 0; i < pts.size(); ++i) axis[i] = pts[i][a];
    std::nth_element(axis.begin(), axis.begin() + static_cast<std::ptrdiff_t>(lo_rank), axis.end());
    box.min[a] = axis[lo_rank];
    std::nth_element(axis.begin(), axis.begin() + static_cast<std::ptrdiff_t>(hi_rank), axis.end());
    box.max[a] = axis[hi_rank];
  }
  return box;
}

void IcpConfig::validate() const {
  if (max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "ICP needs at least one iteration");
  if (!(convergence_eps > 0)) throw Error(ErrorCode::InvalidArgument, "ICP eps must be positive");
}

namespace {

Vec3 centroid(const std::vector<Vec3>& pts) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  return c / static_cast<double>(pts.size());
}

struct Matches {
  std::vector<Vec3> src;
  std::vector<Vec3> dst;
  double rms = 0.0;
};

Matches match(const std::vector<Vec3>& src, const PointCloud& dst, const KdTree& tree,
              const RigidTransform& t, double max_dist) {
  Matches m;
  double sum = 0.0;
  const double max2 = max_dist > 0 ? max_dist * max_dist : std::numeric_limits<double>::infinity();
  for (const auto& p : src) {
    const Vec3 q = t.apply(p);
    const Neighbor nb = tree.nearest(q);
    if (nb.distance2 > max2) continue;
    m.src.push_back(q);
    m.dst.push_back(dst.points[nb.index]);
    sum += nb.distance2;
  }
  if (!m.src.empty()) m.rms = std::sqrt(sum / static_cast<double>(m.src.size()));
  return m;
}

RigidTransform solve_rigid(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  const Vec3 ca = centroid(a);
  const Vec3 cb = centroid(b);
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < a.size(); ++i) h += (a[i] - ca) * (b[i] - cb).transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 v = svd.matrixV();
  Mat3 r = v * svd.matrixU().transpose();
  if (r.determinant() < 0) {
    v.col(2) = -v.col(2);
    r = v * svd.matrixU().transpose();
  }
  return {r, cb - r * ca};
}

}  // namespace

IcpResult icp_align(const PointCloud& src, const PointCloud& dst, const IcpConfig& cfg) {
  cfg.validate();
  const std::size_t min_points = cfg.translation_only ? 1 : 3;
  if (src.size() < min_points || dst.size() < min_points) {
    throw Error(ErrorCode::InsufficientPoints, "ICP needs more points");
  }
  const KdTree tree(dst.points);
  IcpResult out;
  if (cfg.init_centroid) out.transform.translation = centroid(dst.points) - centroid(src.points);

  double prev_rms = std::numeric_limits<double>::infinity();
  int growth = 0;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    const Matches m = match(src.points, dst, tree, out.transform, cfg.max_correspondence_dist);
    if (m.src.size() < min_points) {
      throw Error(ErrorCode::InsufficientPoints, "too few correspondences within max distance");
    }
    out.iterations = it + 1;
    if (m.rms > prev_rms) {
      if (++growth >= 5) throw Error(ErrorCode::Diverged, "ICP rms grew for 5 consecutive iterations");
    } else {
      growth = 0;
    }
    const bool converged = std::abs(prev_rms - m.rms) < cfg.convergence_eps;
    prev_rms = m.rms;
    if (converged) break;

    RigidTransform step;
    if (cfg.translation_only) {
      step.translation = centroid(m.dst) - centroid(m.src);
    } else {
      step = solve_rigid(m.src, m.dst);
    }
    out.transform = step * out.transform;
    if (step.translation.norm() < 1e-15 && (step.rotation - Mat3::Identity()).norm() < 1e-15) break;
  }
  const Matches final_match = match(src.points, dst, tree, out.transform, cfg.max_correspondence_dist);
  out.rms = final_match.rms;
  out.inliers = final_match.src.size();
  return out;
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
  if (radius <= 0) return mask;
  // Separable square structuring element.
  BinaryMask horiz(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y) {
    int last = -1000000;
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(x, y)) last = x;
      if (x - last <= radius) horiz.set(x, y, true);
    }
    last = 1000000;
    for (int x = mask.width - 1; x >= 0; --x) {
      if (mask.at(x, y)) last = x;
      if (last - x <= radius) horiz.set(x, y, true);
    }
  }
  BinaryMask out(mask.width, mask.height);
  for (int x = 0; x < mask.width; ++x) {
    int last = -1000000;
    for (int y = 0; y < mask.height; ++y) {
      if (horiz.at(x, y)) last = y;
      if (y - last <= radius) out.set(x, y, true);
    }
    last = 1000000;
    for (int y = mask.height - 1; y >= 0; --y) {
      if (horiz.at(x, y)) last = y;
      if (last - y <= radius) out.set(x, y, true);
    }
  }
  return out;
}

double mask_iou(const BinaryMask& a, const BinaryMask& b, int dilation_px) {
  if (!a.same_shape(b)) throw Error(ErrorCode::ShapeMismatch, "mask sizes differ");
  if (dilation_px < 0) throw Error(ErrorCode::InvalidArgument, "dilation must be >= 0");
  const BinaryMask da = dilate(a, dilation_px);
  const BinaryMask db = dilate(b, dilation_px);
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < da.bits.size(); ++i) {
    inter += (da.bits[i] && db.bits[i]) ? 1 : 0;
    uni += (da.bits[i] || db.bits[i]) ? 1 : 0;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace rescene
