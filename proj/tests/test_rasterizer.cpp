#include "rescene/error.hpp"
#include "rescene/parallel.hpp"
#include "rescene/rasterizer.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

using namespace rescene;
using rescene::test::fd_check;

namespace {

Camera identity_camera(int size = 101) {
  Camera c;
  c.fx = c.fy = 100.0;
  c.cx = c.cy = (size - 1) / 2.0;
  c.width = c.height = size;
  return c;
}

TriMesh triangle(const Vec3& a, const Vec3& b, const Vec3& c) {
  TriMesh m;
  m.vertices = {a, b, c};
  m.faces = {{0, 1, 2}};
  return m;
}

// Same triangle, wound to face a camera at the origin.
TriMesh facing_triangle(const Vec3& a, const Vec3& b, const Vec3& c) {
  TriMesh m = triangle(a, b, c);
  if ((b - a).cross(c - a).dot(a) >= 0.0) std::swap(m.faces[0][1], m.faces[0][2]);
  return m;
}

// Independent hard-mask oracle: signed areas of the projected triangle.
bool oracle_inside(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
  auto cross = [](const Vec2& o, const Vec2& u, const Vec2& v) {
    return (u - o).x() * (v - o).y() - (u - o).y() * (v - o).x();
  };
  const double s = cross(a, b, c);
  if (s == 0.0) return false;
  const double d0 = cross(a, b, p), d1 = cross(b, c, p), d2 = cross(c, a, p);
  return s > 0 ? (d0 >= 0 && d1 >= 0 && d2 >= 0) : (d0 <= 0 && d1 <= 0 && d2 <= 0);
}

}  // namespace

TEST(SoftRaster, EmptyMeshThrows) {
  try {
    render_soft_silhouette(TriMesh{}, identity_camera(), SoftRasterConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyMesh);
  }
}

TEST(SoftRaster, AllFacesBehindCameraThrows) {
  const TriMesh m = triangle(Vec3(-1, -1, -2), Vec3(1, -1, -2), Vec3(0, 1, -2));
  try {
    render_soft_silhouette(m, identity_camera(), SoftRasterConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllFacesCulled);
  }
}

TEST(SoftRaster, SaturatesDeepInsideHugeTriangle) {
  const TriMesh m = facing_triangle(Vec3(-50, -50, 2), Vec3(50, -50, 2), Vec3(0, 50, 2));
  const ProbMap p = render_soft_silhouette(m, identity_camera(), SoftRasterConfig{});
  EXPECT_GT(p.values[50 * 101 + 50], 0.999);
  for (double v : p.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(SoftRaster, PixelOnEdgeGivesHalf) {
  // The edge x = 0 projects onto column 50, through the center of pixel (50, 50).
  const TriMesh m = facing_triangle(Vec3(0, -1, 2), Vec3(0, 1, 2), Vec3(1, 0, 2));
  const ProbMap p = render_soft_silhouette(m, identity_camera(), SoftRasterConfig{});
  EXPECT_NEAR(p.values[50 * 101 + 50], 0.5, 1e-15);
}

TEST(SoftRaster, BackfaceCullingIsConfigurable) {
  TriMesh m = facing_triangle(Vec3(-1, -1, 2), Vec3(1, -1, 2), Vec3(0, 1, 2));
  std::swap(m.faces[0][1], m.faces[0][2]);
  SoftRasterConfig cfg;
  const ProbMap culled = render_soft_silhouette(m, identity_camera(), cfg);
  EXPECT_EQ(culled.values[50 * 101 + 50], 0.0);
  cfg.cull_backfaces = false;
  const ProbMap kept = render_soft_silhouette(m, identity_camera(), cfg);
  EXPECT_GT(kept.values[50 * 101 + 50], 0.999);
}

TEST(SoftRaster, ValuesDecreaseWithSigmaOutsideSilhouette) {
  const TriMesh cube = test::grounded_cube();
  const Camera cam = test::cube_camera(64);
  const BinaryMask hard = render_hard_silhouette(cube, cam);
  SoftRasterConfig wide, narrow;
  wide.sigma = 4e-4;
  narrow.sigma = 1e-4;
  const ProbMap a = render_soft_silhouette(cube, cam, wide);
  const ProbMap b = render_soft_silhouette(cube, cam, narrow);
  int checked = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (hard.bits[i] != 0 || a.values[i] < 1e-12) continue;
    EXPECT_LT(b.values[i], a.values[i]);
    ++checked;
  }
  EXPECT_GT(checked, 50);
}

TEST(SoftRaster, SmallSigmaThresholdMatchesHardMask) {
  const TriMesh cube = test::grounded_cube();
  const Camera cam = test::cube_camera(64);
  const BinaryMask hard = render_hard_silhouette(cube, cam);
  SoftRasterConfig cfg;
  cfg.sigma = 1e-10;
  const ProbMap soft = render_soft_silhouette(cube, cam, cfg);
  for (std::size_t i = 0; i < soft.size(); ++i) EXPECT_EQ(soft.values[i] >= 0.5, hard.bits[i] != 0) << i;
}

TEST(SoftRaster, BitIdenticalAcrossThreadCounts) {
  const TriMesh cube = test::grounded_cube();
  const Camera cam = test::cube_camera(96);
  const PosedMesh posed = apply_pose_regular(cube, PoseParams5{Vec3(0.1, 0.0, -0.2), 0.4, 1.1}, true);
  const int saved = thread_count();
  set_thread_count(1);
  const ProbMap one = render_soft_silhouette(posed.mesh, cam, SoftRasterConfig{}, &posed.tangents);
  set_thread_count(4);
  const ProbMap four = render_soft_silhouette(posed.mesh, cam, SoftRasterConfig{}, &posed.tangents);
  set_thread_count(saved);
  EXPECT_EQ(one.values, four.values);
  ASSERT_EQ(one.tangents.size(), four.tangents.size());
  for (std::size_t i = 0; i < one.tangents.size(); ++i) ASSERT_EQ(one.tangents[i], four.tangents[i]);
}

TEST(SoftRaster, TangentsMatchFiniteDifferences) {
  // Scalar: a fixed random weighting of the coverage map.
  const TriMesh cube = test::grounded_cube();
  const Camera cam = test::cube_camera(64);
  Rng rng(21);
  std::vector<double> weights(static_cast<std::size_t>(cam.width) * cam.height);
  for (auto& w : weights) w = rng.uniform(-1.0, 1.0);
  auto scalar = [&](const Eigen::VectorXd& x) {
    const PoseParams5 p{Vec3(x[0], x[1], x[2]), x[3], x[4]};
    const ProbMap m = render_soft_silhouette(apply_pose_regular(cube, p, false).mesh, cam, SoftRasterConfig{});
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s += weights[i] * m.values[i];
    return s;
  };
  int accepted = 0, drawn = 0;
  while (accepted < 20 && drawn < 200) {
    ++drawn;
    Eigen::VectorXd x(5);
    x << rng.uniform(-0.3, 0.3), rng.uniform(-0.1, 0.1), rng.uniform(-0.3, 0.3), rng.uniform(-1, 1),
        rng.uniform(0.8, 1.25);
    const PosedMesh posed = apply_pose_regular(cube, PoseParams5{Vec3(x[0], x[1], x[2]), x[3], x[4]}, true);
    const ProbMap m = render_soft_silhouette(posed.mesh, cam, SoftRasterConfig{}, &posed.tangents);
    ASSERT_EQ(m.active, 5);
    Eigen::VectorXd ad = Eigen::VectorXd::Zero(5);
    for (std::size_t i = 0; i < m.size(); ++i) ad += weights[i] * m.tangents[i].head(5);
    const auto check = fd_check(scalar, x, ad);
    if (!check.smooth) continue;
    ++accepted;
    EXPECT_LT(check.error, 1e-3) << "pose " << x.transpose();
  }
  EXPECT_EQ(accepted, 20) << "only " << accepted << " kink-free poses in " << drawn << " draws";
}

TEST(HardRaster, FullCoverageAndBehindCamera) {
  const TriMesh big = triangle(Vec3(-100, -100, 1), Vec3(100, -100, 1), Vec3(0, 100, 1));
  const BinaryMask full = render_hard_silhouette(big, identity_camera(21));
  EXPECT_EQ(full.count(), 21u * 21u);
  const TriMesh behind = triangle(Vec3(-100, -100, -1), Vec3(100, -100, -1), Vec3(0, 100, -1));
  EXPECT_EQ(render_hard_silhouette(behind, identity_camera(21)).count(), 0u);
}

TEST(HardRaster, MatchesBruteForceOnRandomConvexMeshes) {
  Rng rng(8);
  const Camera cam = test::cube_camera(48);
  for (int trial = 0; trial < 5; ++trial) {
    const PoseParams5 p{Vec3(rng.uniform(-0.4, 0.4), rng.uniform(0, 0.5), rng.uniform(-0.4, 0.4)),
                        rng.uniform(-3, 3), rng.uniform(0.5, 1.5)};
    const TriMesh mesh = apply_pose_regular(make_box(Vec3(rng.uniform(0.3, 1.2), rng.uniform(0.3, 1.2),
                                                          rng.uniform(0.3, 1.2))), p, false).mesh;
    const BinaryMask mask = render_hard_silhouette(mesh, cam);
    std::vector<Vec2> px;
    for (const auto& v : mesh.vertices) px.push_back(project_point(cam, v).pixel);
    for (int y = 0; y < cam.height; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        bool in = false;
        for (const auto& f : mesh.faces) in = in || oracle_inside(Vec2(x, y), px[f[0]], px[f[1]], px[f[2]]);
        ASSERT_EQ(mask.at(x, y), in) << x << "," << y;
      }
    }
  }
}

TEST(SoftRasterConfig, Validation) {
  SoftRasterConfig cfg;
  cfg.sigma = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = SoftRasterConfig{};
  cfg.max_faces_per_pixel = 0;
  EXPECT_THROW(cfg.validate(), Error);
}
