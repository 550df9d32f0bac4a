#pragma once

#include "rescene/types.hpp"

#include <cstdint>
#include <optional>

namespace rescene {

struct Plane {
  Vec3 normal = Vec3::UnitY();
  Vec3 origin = Vec3::Zero();
  RigidTransform frame;  // world_from_plane; plane Y is the normal

  static Plane from_normal_point(const Vec3& normal, const Vec3& origin);
  double signed_distance(const Vec3& p) const { return normal.dot(p - origin); }
};

// World-from-plane frame: Y = normal, X = world X projected onto the plane
// (world Z when X is parallel to the normal), Z = X x Y.
RigidTransform plane_local_frame(const Plane& plane);

struct RansacConfig {
  int iterations = 512;
  // <= 0 selects 1% of the cloud's bounding-box diagonal.
  double inlier_threshold = 0.0;
  double min_inlier_fraction = 0.2;
  std::uint64_t seed = 0;
  // Orientation fallback for near-vertical planes (e.g. camera up in world).
  Vec3 up_hint = Vec3::UnitY();

  void validate() const;
};

struct RansacResult {
  Plane plane;
  std::size_t inliers = 0;
  double inlier_fraction = 0.0;
};

RansacResult ransac_plane_detailed(const PointCloud& points, const RansacConfig& cfg);
inline Plane ransac_plane(const PointCloud& points, const RansacConfig& cfg) {
  return ransac_plane_detailed(points, cfg).plane;
}

PointCloud stencil_pointmap(const OrganizedPointMap& map, const BinaryMask& mask, double min_confidence = 0.0);

// Per-axis [percentile, 1 - percentile] quantile box.
Aabb background_bounds(const PointCloud& background, double percentile = 0.005);

struct IcpConfig {
  int max_iterations = 50;
  double convergence_eps = 1e-9;
  double max_correspondence_dist = 0.1;  // <= 0 disables rejection
  bool translation_only = false;
  bool init_centroid = true;             // start from the centroid offset

  void validate() const;
};

struct IcpResult {
  RigidTransform transform;  // maps src into dst
  double rms = 0.0;
  int iterations = 0;
  std::size_t inliers = 0;
};

IcpResult icp_align(const PointCloud& src, const PointCloud& dst, const IcpConfig& cfg);

// Square (Chebyshev) dilation by `radius` pixels.
BinaryMask dilate(const BinaryMask& mask, int radius);

double mask_iou(const BinaryMask& a, const BinaryMask& b, int dilation_px = 0);

}  // namespace rescene
