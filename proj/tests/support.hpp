#pragma once

// Shared scene builders for the unit and acceptance tests.

#include "rescene/aq.hpp"
#include "rescene/fixture.hpp"
#include "rescene/hash.hpp"
#include "rescene/pose.hpp"
#include "rescene/rasterizer.hpp"
#include "rescene/sampling.hpp"
#include "rescene/scene_geometry.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace rescene::test {

inline double deg(double d) { return d * std::numbers::pi / 180.0; }

// Square pinhole camera at `eye`, pitched down by `pitch` radians, looking
// along world -Z.
inline Camera pitched_camera(int size, double focal, const Vec3& eye, double pitch) {
  Camera cam;
  cam.width = cam.height = size;
  cam.fx = cam.fy = focal;
  cam.cx = cam.cy = (size - 1) / 2.0;
  const Vec3 fwd(0.0, -std::sin(pitch), -std::cos(pitch));
  const Vec3 right(1.0, 0.0, 0.0);
  cam.pose.rotation.col(0) = right;
  cam.pose.rotation.col(1) = fwd.cross(right);
  cam.pose.rotation.col(2) = fwd;
  cam.pose.translation = eye;
  return cam;
}

// Camera used by the cube scenes: 30 degrees down from (0, 1.8, 3).
inline Camera cube_camera(int size) {
  return pitched_camera(size, 0.977 * size, Vec3(0.0, 1.8, 3.0), deg(30.0));
}

inline Plane floor_plane() { return Plane::from_normal_point(Vec3::UnitY(), Vec3::Zero()); }

// Unit cube resting on y = 0.
inline TriMesh grounded_cube() {
  TriMesh m = unit_cube();
  for (auto& v : m.vertices) v.y() += 0.5;
  return m;
}

struct CubeScene {
  TriMesh base;      // grounded cube at the origin
  TriMesh gt;        // cube at the ground-truth pose
  FitObject object;  // mask from hard rasterization, cloud from surface samples
  FitScene scene;
};

inline CubeScene make_cube_scene(const PoseParams4& gt_pose, int image_size, std::size_t cloud_points,
                                 std::uint64_t seed) {
  CubeScene s;
  s.base = grounded_cube();
  const Plane plane = floor_plane();
  s.gt = apply_pose_planar(s.base, gt_pose, plane, false).mesh;
  const Camera cam = cube_camera(image_size);
  s.object = FitObject{s.base, render_hard_silhouette(s.gt, cam), sample_surface(s.gt, cloud_points, seed)};
  s.scene = FitScene{cam, plane, Aabb{Vec3(-2.0, -1.0, -2.0), Vec3(2.0, 3.0, 2.0)}};
  return s;
}

// Central-difference gradient check. The objectives are piecewise smooth:
// nearest-edge and nearest-triangle switches put kinks on measure-zero sets,
// and a stencil that straddles one does not estimate the derivative. Such a
// stencil is detected by its step-h and step-h/2 estimates disagreeing by
// more than `screen` (relative), which for a smooth objective is O(h^2).
struct FdCheck {
  bool smooth = true;
  double error = 0.0;  // ||ad - fd||_inf / ||fd||_inf
  Eigen::VectorXd fd;
};

template <class F>
FdCheck fd_check(const F& f, const Eigen::VectorXd& x, const Eigen::VectorXd& ad, double h = 1e-4,
                 double screen = 1e-5) {
  const auto n = x.size();
  Eigen::VectorXd fd(n), fd_half(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd a = x, b = x;
    a[i] += h;
    b[i] -= h;
    fd[i] = (f(a) - f(b)) / (2.0 * h);
    a = x;
    b = x;
    a[i] += h / 2;
    b[i] -= h / 2;
    fd_half[i] = (f(a) - f(b)) / h;
  }
  const double scale = std::max(fd.cwiseAbs().maxCoeff(), 1e-12);
  FdCheck out;
  out.fd = fd;
  out.smooth = (fd - fd_half).cwiseAbs().maxCoeff() <= screen * scale;
  out.error = (ad - fd).cwiseAbs().maxCoeff() / scale;
  return out;
}

// Integer-only procedural image: identical bytes on every platform.
inline RgbImage procedural_image(int w, int h, int k) {
  RgbImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.set(x, y, {static_cast<std::uint8_t>((7 * x + 3 * y + 11 * k) % 256),
                     static_cast<std::uint8_t>((x * y + 29 * k) % 256), static_cast<std::uint8_t>((x ^ y) % 256)});
    }
  }
  return img;
}

// Axis-aligned ellipse, center (cx, cy), semi-axes (a, b), tested in integers.
inline BinaryMask ellipse_mask(int w, int h, int cx, int cy, int a, int b) {
  BinaryMask m(w, h);
  const long long aa = 1LL * a * a, bb = 1LL * b * b;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const long long dx = x - cx, dy = y - cy;
      m.set(x, y, dx * dx * bb + dy * dy * aa <= aa * bb);
    }
  }
  return m;
}

// Digest of the raw pixels; PNG container bytes depend on the zlib build.
inline std::string image_digest(const RgbImage& img) {
  const std::string header = std::to_string(img.width) + "x" + std::to_string(img.height) + "\n";
  return sha256_hex(header + std::string(img.data.begin(), img.data.end()));
}

struct AqPair {
  std::string name;
  RgbImage image;
  BinaryMask mask;
};

// Ten image/mask pairs: every instance of the bundled room (four objects,
// floor, walls) plus four procedural pairs with odd sizes and tiny masks.
inline std::vector<AqPair> aq_fixture_pairs() {
  std::vector<AqPair> out;
  const SceneFixture fixture = default_fixture();
  const FixtureRender render = render_fixture(fixture);
  for (std::size_t i = 0; i < fixture.objects.size(); ++i) {
    out.push_back({fixture.objects[i].id, render.image, id_mask(render, static_cast<int>(i))});
  }
  out.push_back({"floor", render.image, id_mask(render, kFloorId)});
  out.push_back({"walls", render.image, id_mask(render, kWallId)});
  out.push_back({"ellipse_wide", procedural_image(301, 97, 1), ellipse_mask(301, 97, 150, 48, 90, 30)});
  out.push_back({"ellipse_tall", procedural_image(64, 500, 2), ellipse_mask(64, 500, 10, 400, 8, 60)});
  BinaryMask dot(1000, 1000);
  dot.set(999, 0, true);
  out.push_back({"corner_pixel", procedural_image(1000, 1000, 3), dot});
  out.push_back({"full", procedural_image(50, 40, 4), BinaryMask(50, 40, true)});
  return out;
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("rescene_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace rescene::test
