#include "rescene/types.hpp"

#include "rescene/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace rescene {

namespace {

bool finite(const Vec3& v) { return v.allFinite(); }

}  // namespace

void RigidTransform::validate() const {
  const Mat3 err = rotation.transpose() * rotation - Mat3::Identity();
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "transform has non-finite entries");
  }
  if (err.cwiseAbs().maxCoeff() >= 1e-9 || std::abs(rotation.determinant() - 1.0) >= 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "rotation is not orthonormal with det +1");
  }
}

Mat3 rotation_y(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

void Camera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "camera focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::InvalidArgument, "camera image size must be positive");
  }
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
    throw Error(ErrorCode::InvalidArgument, "principal point outside the image");
  }
  pose.validate();
}

Projection project_point(const Camera& camera, const Vec3& p) {
  if (!finite(p)) throw Error(ErrorCode::InvalidArgument, "point is not finite");
  const Vec3 c = camera.world_to_camera(p);
  if (c.z() <= 1e-9) {
    throw Error(ErrorCode::DepthNonPositive, "point at or behind the camera plane");
  }
  return {Vec2(camera.fx * c.x() / c.z() + camera.cx, camera.fy * c.y() / c.z() + camera.cy),
          c.z()};
}

Vec3 backproject_pixel(const Camera& camera, const Vec2& pixel, double depth) {
  if (!(depth > 0.0)) throw Error(ErrorCode::DepthNonPositive, "depth must be positive");
  const Vec3 c((pixel.x() - camera.cx) / camera.fx * depth,
               (pixel.y() - camera.cy) / camera.fy * depth, depth);
  return camera.pose.apply(c);
}

double TriMesh::face_area(std::size_t f) const {
  const auto& t = faces[f];
  return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
}

double TriMesh::surface_area() const {
  double a = 0.0;
  for (std::size_t f = 0; f < faces.size(); ++f) a += face_area(f);
  return a;
}

void TriMesh::validate() const {
  const int n = static_cast<int>(vertices.size());
  for (const auto& v : vertices) {
    if (!finite(v)) throw Error(ErrorCode::InvalidArgument, "mesh vertex is not finite");
  }
  for (const auto& f : faces) {
    for (int idx : f) {
      if (idx < 0 || idx >= n) {
        throw Error(ErrorCode::InvalidArgument,
                    "face index " + std::to_string(idx) + " out of range");
      }
    }
  }
  if (!colors.empty() && colors.size() != vertices.size()) {
    throw Error(ErrorCode::InvalidArgument, "vertex color count does not match vertices");
  }
}

std::size_t TriMesh::drop_degenerate_faces() {
  const std::size_t before = faces.size();
  std::vector<std::array<int, 3>> kept;
  kept.reserve(faces.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    if (face_area(f) > 1e-12) kept.push_back(faces[f]);
  }
  faces = std::move(kept);
  return before - faces.size();
}

TriMesh merge_meshes(std::span<const TriMesh> meshes) {
  TriMesh out;
  bool colored = !meshes.empty();
  for (const auto& m : meshes) colored = colored && m.has_colors();
  for (const auto& m : meshes) {
    const int base = static_cast<int>(out.vertices.size());
    out.vertices.insert(out.vertices.end(), m.vertices.begin(), m.vertices.end());
    if (colored) out.colors.insert(out.colors.end(), m.colors.begin(), m.colors.end());
    for (const auto& f : m.faces) out.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
  }
  return out;
}

TriMesh transformed(const TriMesh& mesh, const RigidTransform& transform) {
  TriMesh out = mesh;
  for (auto& v : out.vertices) v = transform.apply(v);
  return out;
}

void PointCloud::validate() const {
  for (const auto& p : points) {
    if (!finite(p)) throw Error(ErrorCode::InvalidArgument, "point is not finite");
  }
  if (!confidence.empty() && confidence.size() != points.size()) {
    throw Error(ErrorCode::InvalidArgument, "confidence count does not match points");
  }
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(),
                                                [](std::uint8_t b) { return b != 0; }));
}

OrganizedPointMap::OrganizedPointMap(int w, int h)
    : width(w),
      height(h),
      points(static_cast<std::size_t>(w) * h, Vec3::Constant(std::numeric_limits<double>::quiet_NaN())),
      confidence(static_cast<std::size_t>(w) * h, 0.0),
      valid(static_cast<std::size_t>(w) * h, 0) {}

void OrganizedPointMap::set(int x, int y, const Vec3& p, double conf) {
  const auto i = index(x, y);
  points[i] = p;
  confidence[i] = conf;
  valid[i] = 1;
}

void OrganizedPointMap::invalidate(int x, int y) {
  const auto i = index(x, y);
  points[i] = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
  confidence[i] = 0.0;
  valid[i] = 0;
}

PointCloud OrganizedPointMap::valid_cloud() const {
  PointCloud out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (valid[i]) {
      out.points.push_back(points[i]);
      out.confidence.push_back(confidence[i]);
    }
  }
  return out;
}

double Aabb::volume() const {
  const Vec3 e = extent();
  return e.x() * e.y() * e.z();
}

bool Aabb::contains(const Vec3& p, double tol) const {
  return (p.array() >= min.array() - tol).all() && (p.array() <= max.array() + tol).all();
}

bool Obb::contains(const Vec3& p, double tol) const {
  const Vec3 local = axes.transpose() * (p - center);
  return (local.cwiseAbs().array() <= half_extents.array() + tol).all();
}

Aabb compute_aabb(std::span<const Vec3> points) {
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "cannot bound zero points");
  Aabb box{points.front(), points.front()};
  for (const auto& p : points) {
    box.min = box.min.cwiseMin(p);
    box.max = box.max.cwiseMax(p);
  }
  return box;
}

namespace {

struct Extents {
  Vec3 lo;
  Vec3 hi;
};

Extents project_extents(std::span<const Vec3> points, const Mat3& axes) {
  Extents e{Vec3::Constant(std::numeric_limits<double>::infinity()),
            Vec3::Constant(-std::numeric_limits<double>::infinity())};
  for (const auto& p : points) {
    const Vec3 q = axes.transpose() * p;
    e.lo = e.lo.cwiseMin(q);
    e.hi = e.hi.cwiseMax(q);
  }
  return e;
}

// Box "volume" with a floor on each side so flat inputs minimize area.
double box_measure(const Extents& e, double pad) {
  const Vec3 s = e.hi - e.lo;
  return (s.x() + pad) * (s.y() + pad) * (s.z() + pad);
}

Mat3 rotate_pair(const Mat3& axes, int i, int j, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 out = axes;
  out.col(i) = c * axes.col(i) + s * axes.col(j);
  out.col(j) = -s * axes.col(i) + c * axes.col(j);
  return out;
}

// Coordinate descent over the three planar rotations of the frame.
Mat3 refine_min_volume(std::span<const Vec3> points, Mat3 axes, double pad) {
  constexpr int kSamples = 90;
  constexpr double kQuarter = std::numbers::pi / 2.0;
  double best = box_measure(project_extents(points, axes), pad);
  for (int sweep = 0; sweep < 8; ++sweep) {
    const double sweep_start = best;
    for (int plane = 0; plane < 3; ++plane) {
      const int i = plane;
      const int j = (plane + 1) % 3;
      auto eval = [&](double a) { return box_measure(project_extents(points, rotate_pair(axes, i, j, a)), pad); };
      double best_angle = 0.0;
      double best_val = best;
      for (int k = 1; k < kSamples; ++k) {
        const double a = kQuarter * k / kSamples;
        const double v = eval(a);
        if (v < best_val) {
          best_val = v;
          best_angle = a;
        }
      }
      // Golden-section polish inside the winning bracket.
      const double step = kQuarter / kSamples;
      double lo = best_angle - step;
      double hi = best_angle + step;
      const double g = (std::sqrt(5.0) - 1.0) / 2.0;
      double x1 = hi - g * (hi - lo);
      double x2 = lo + g * (hi - lo);
      double f1 = eval(x1);
      double f2 = eval(x2);
      for (int it = 0; it < 60; ++it) {
        if (f1 < f2) {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi - g * (hi - lo);
          f1 = eval(x1);
        } else {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo + g * (hi - lo);
          f2 = eval(x2);
        }
      }
      const double polished = f1 < f2 ? x1 : x2;
      const double polished_val = std::min(f1, f2);
      if (polished_val < best_val) {
        best_val = polished_val;
        best_angle = polished;
      }
      if (best_val < best) {
        best = best_val;
        axes = rotate_pair(axes, i, j, best_angle);
      }
    }
    if (best >= sweep_start * (1.0 - 1e-12)) break;
  }
  return axes;
}

Mat3 orthonormalize(const Mat3& axes) {
  Mat3 out;
  out.col(0) = axes.col(0).normalized();
  Vec3 y = axes.col(1) - axes.col(1).dot(out.col(0)) * out.col(0);
  out.col(1) = y.normalized();
  out.col(2) = out.col(0).cross(out.col(1));
  return out;
}

}  // namespace

Obb compute_obb(std::span<const Vec3> points) {
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "cannot bound zero points");

  Vec3 centroid = Vec3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : points) {
    const Vec3 d = p - centroid;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(points.size());

  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  // Eigen sorts ascending; flip to descending.
  Mat3 axes;
  axes.col(0) = solver.eigenvectors().col(2);
  axes.col(1) = solver.eigenvectors().col(1);
  axes.col(2) = axes.col(0).cross(axes.col(1));
  if (!axes.allFinite() || std::abs(axes.determinant() - 1.0) > 1e-6) axes = Mat3::Identity();
  axes = orthonormalize(axes);

  const Aabb aabb = compute_aabb(points);
  const double diag = aabb.diagonal();
  if (diag > 0.0) {
    const double pad = 1e-9 * diag;
    const Mat3 refined = orthonormalize(refine_min_volume(points, axes, pad));
    if (box_measure(project_extents(points, refined), pad) <
        box_measure(project_extents(points, axes), pad)) {
      axes = refined;
    }
  }

  Extents e = project_extents(points, axes);
  Vec3 half = 0.5 * (e.hi - e.lo);
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return half[a] > half[b]; });

  Obb box;
  Vec3 mid_local;
  for (int k = 0; k < 3; ++k) {
    box.axes.col(k) = axes.col(order[k]);
    box.half_extents[k] = half[order[k]];
    mid_local[k] = 0.5 * (e.hi[order[k]] + e.lo[order[k]]);
  }
  if (box.axes.determinant() < 0.0) {
    box.axes.col(2) = -box.axes.col(2);
    mid_local[2] = -mid_local[2];
  }
  box.center = box.axes * mid_local;
  return box;
}

}  // namespace rescene
