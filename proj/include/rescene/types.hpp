#pragma once

// Shared geometric vocabulary. World units are meters. Camera frame is
// +X right, +Y down, +Z forward; pixel (u, v) is the center of column u,
// row v with v growing downward.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace rescene {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 apply_direction(const Vec3& d) const { return rotation * d; }

  RigidTransform inverse() const {
    const Mat3 rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }

  // (a * b).apply(p) == a.apply(b.apply(p))
  RigidTransform operator*(const RigidTransform& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }

  // Throws InvalidArgument unless R is orthonormal with det +1 (tolerance 1e-9).
  void validate() const;
};

struct Camera {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
  RigidTransform pose;  // world_from_camera

  void validate() const;

  Vec3 world_to_camera(const Vec3& p) const {
    return pose.rotation.transpose() * (p - pose.translation);
  }
  Vec3 center() const { return pose.translation; }
};

struct Projection {
  Vec2 pixel;
  double depth = 0.0;
};

Projection project_point(const Camera& camera, const Vec3& p);

// Returns the point in world coordinates. With an identity pose this is the
// camera-frame point.
Vec3 backproject_pixel(const Camera& camera, const Vec2& pixel, double depth);

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<Vec3> colors;  // optional, per vertex, [0,1]

  bool empty() const { return vertices.empty() || faces.empty(); }
  bool has_colors() const { return !colors.empty(); }
  double face_area(std::size_t f) const;
  double surface_area() const;

  // Checks index bounds, finiteness and color count. Throws InvalidArgument.
  void validate() const;
  // Drops faces with area <= 1e-12 m^2. Returns the number removed.
  std::size_t drop_degenerate_faces();
};

TriMesh merge_meshes(std::span<const TriMesh> meshes);
TriMesh transformed(const TriMesh& mesh, const RigidTransform& transform);

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<double> confidence;  // empty, or one per point

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_confidence() const { return !confidence.empty(); }
  void validate() const;
};

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int w, int h, bool fill = false)
      : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::size_t count() const;
  bool same_shape(const BinaryMask& other) const {
    return width == other.width && height == other.height;
  }
};

struct OrganizedPointMap {
  int width = 0;
  int height = 0;
  std::vector<Vec3> points;
  std::vector<double> confidence;
  std::vector<std::uint8_t> valid;

  OrganizedPointMap() = default;
  OrganizedPointMap(int w, int h);

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  void set(int x, int y, const Vec3& p, double conf);
  void invalidate(int x, int y);
  PointCloud valid_cloud() const;
};

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  Vec3 extent() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
  double diagonal() const { return extent().norm(); }
  double volume() const;
  bool contains(const Vec3& p, double tol = 0.0) const;
};

struct Obb {
  Vec3 center = Vec3::Zero();
  Mat3 axes = Mat3::Identity();  // columns, ordered by descending extent
  Vec3 half_extents = Vec3::Zero();

  double volume() const { return 8.0 * half_extents.prod(); }
  bool contains(const Vec3& p, double tol = 1e-9) const;
};

Aabb compute_aabb(std::span<const Vec3> points);
inline Aabb compute_aabb(const PointCloud& cloud) { return compute_aabb(cloud.points); }

// Covariance-eigenbasis box, refined toward minimum volume when the
// eigenbasis is ambiguous or loose. Never fails on flat or collinear input.
Obb compute_obb(std::span<const Vec3> points);
inline Obb compute_obb(const PointCloud& cloud) { return compute_obb(cloud.points); }

Mat3 rotation_y(double angle);

}  // namespace rescene
