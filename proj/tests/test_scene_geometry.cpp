#include "rescene/error.hpp"
#include "rescene/sampling.hpp"
#include "rescene/scene_geometry.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <tuple>

using namespace rescene;
using rescene::test::deg;

namespace {

PointCloud noisy_plane_with_outliers(const Vec3& normal, const Vec3& origin, double noise, Rng& rng) {
  const Plane plane = Plane::from_normal_point(normal, origin);
  PointCloud c;
  for (int i = 0; i < 80; ++i) {
    const Vec3 local(rng.uniform(-1, 1), noise * rng.normal(), rng.uniform(-1, 1));
    c.points.push_back(plane.frame.apply(local));
  }
  for (int i = 0; i < 20; ++i) {
    c.points.push_back(origin + Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)));
  }
  return c;
}

double angle_between(const Vec3& a, const Vec3& b) {
  return std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0));
}

PointCloud random_box_cloud(std::size_t n, std::uint64_t seed) {
  return sample_surface(make_box(Vec3(1.0, 0.6, 0.3)), n, seed);
}

}  // namespace

TEST(Plane, FrameInvariants) {
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    Vec3 n = rng.unit_vector();
    if (i == 0) n = Vec3::UnitX();  // world X parallel to the normal
    const Vec3 p0(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
    const Plane pl = Plane::from_normal_point(3.0 * n, p0);
    EXPECT_NEAR(pl.normal.norm(), 1.0, 1e-9);
    EXPECT_LT((pl.frame.apply_direction(Vec3::UnitY()) - pl.normal).norm(), 1e-9);
    EXPECT_LT((pl.frame.apply(Vec3::Zero()) - p0).norm(), 1e-9);
    EXPECT_NO_THROW(pl.frame.validate());
    const auto round = pl.frame * pl.frame.inverse();
    EXPECT_LT((round.rotation - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT(round.translation.norm(), 1e-9);
    const Vec3 on_plane = pl.frame.apply(Vec3(rng.normal(), 0.0, rng.normal()));
    EXPECT_NEAR(pl.frame.inverse().apply(on_plane).y(), 0.0, 1e-9);
  }
}

TEST(PlaneLocalFrame, HandCases) {
  const auto id = plane_local_frame(Plane::from_normal_point(Vec3::UnitY(), Vec3::Zero()));
  EXPECT_LT((id.rotation - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(id.translation.norm(), 1e-12);
  const auto shifted = plane_local_frame(Plane::from_normal_point(Vec3::UnitY(), Vec3(1, 0, 2)));
  EXPECT_LT((shifted.rotation - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((shifted.translation - Vec3(1, 0, 2)).norm(), 1e-12);
  const Vec3 n(0, std::cos(deg(10)), std::sin(deg(10)));
  const Vec3 p0(0.3, -0.2, 1.0);
  const Plane tilted = Plane::from_normal_point(n, p0);
  const auto f = plane_local_frame(tilted);
  EXPECT_LT((f.inverse().apply(p0 + n) - Vec3(0, 1, 0)).norm(), 1e-9);
  // X is world X projected onto the plane.
  EXPECT_LT((f.rotation.col(0) - Vec3::UnitX()).norm(), 1e-9);
  EXPECT_NEAR(f.rotation.determinant(), 1.0, 1e-12);
}

TEST(Ransac, NoiselessFloor) {
  Rng rng(2);
  PointCloud c;
  for (int i = 0; i < 100; ++i) c.points.emplace_back(rng.uniform(-2, 2), 0.0, rng.uniform(-2, 2));
  const Plane p = ransac_plane(c, RansacConfig{});
  EXPECT_LT((p.normal - Vec3::UnitY()).norm(), 1e-9);
  EXPECT_LE(std::abs(p.normal.dot(p.origin)), 1e-9);
}

TEST(Ransac, NoisyInliersWithOutliers) {
  Rng rng(3);
  RansacConfig cfg;
  cfg.inlier_threshold = 0.01;
  const PointCloud c = noisy_plane_with_outliers(Vec3::UnitY(), Vec3::Zero(), 0.002, rng);
  EXPECT_LT(angle_between(ransac_plane(c, cfg).normal, Vec3::UnitY()), deg(1.0));
}

TEST(Ransac, Errors) {
  PointCloud two;
  two.points = {Vec3::Zero(), Vec3::UnitX()};
  try {
    ransac_plane(two, RansacConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientPoints);
  }
  Rng rng(4);
  PointCloud scatter;
  for (int i = 0; i < 200; ++i) scatter.points.push_back(rng.unit_vector() * rng.uniform(0, 5));
  RansacConfig cfg;
  cfg.inlier_threshold = 1e-4;
  cfg.min_inlier_fraction = 0.5;
  try {
    ransac_plane(scatter, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoConsensus);
  }
}

TEST(Ransac, DeterministicForSeedAndOrientedUp) {
  Rng rng(5);
  const PointCloud c = noisy_plane_with_outliers(Vec3(0.1, -1.0, 0.05), Vec3(0, 1, 0), 0.002, rng);
  RansacConfig cfg;
  cfg.seed = 77;
  const auto a = ransac_plane_detailed(c, cfg);
  const auto b = ransac_plane_detailed(c, cfg);
  EXPECT_EQ(a.plane.normal, b.plane.normal);
  EXPECT_EQ(a.plane.origin, b.plane.origin);
  EXPECT_EQ(a.inliers, b.inliers);
  EXPECT_GE(a.plane.normal.y(), 0.0);
}

TEST(Ransac, VerticalPlaneUsesUpHint) {
  Rng rng(6);
  PointCloud c;
  for (int i = 0; i < 100; ++i) c.points.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0);
  RansacConfig cfg;
  cfg.up_hint = Vec3(0, 0, -1);
  EXPECT_LT((ransac_plane(c, cfg).normal - Vec3(0, 0, -1)).norm(), 1e-9);
}

TEST(Stencil, FullEmptyAndRandom) {
  Rng rng(7);
  OrganizedPointMap m(9, 7);
  for (int y = 0; y < 7; ++y) {
    for (int x = 0; x < 9; ++x) m.set(x, y, Vec3(rng.normal(), rng.normal(), rng.normal()), rng.uniform());
  }
  EXPECT_EQ(stencil_pointmap(m, BinaryMask(9, 7, true)).size(), 63u);
  EXPECT_EQ(stencil_pointmap(m, BinaryMask(9, 7, false)).size(), 0u);

  m.invalidate(3, 3);
  m.invalidate(0, 6);
  BinaryMask mask(9, 7);
  for (auto& b : mask.bits) b = rng.uniform() < 0.5 ? 1 : 0;
  mask.set(3, 3, true);
  for (double min_conf : {0.0, 0.4}) {
    std::vector<std::tuple<double, double, double>> expected, got;
    for (int y = 0; y < 7; ++y) {
      for (int x = 0; x < 9; ++x) {
        const auto i = m.index(x, y);
        if (mask.at(x, y) && m.valid[i] && m.confidence[i] >= min_conf) {
          expected.emplace_back(m.points[i].x(), m.points[i].y(), m.points[i].z());
        }
      }
    }
    const PointCloud c = stencil_pointmap(m, mask, min_conf);
    for (const auto& p : c.points) got.emplace_back(p.x(), p.y(), p.z());
    EXPECT_EQ(got, expected);  // row-major order, so the sequences match exactly
    EXPECT_LE(c.size(), mask.count());
  }
  EXPECT_THROW(stencil_pointmap(m, BinaryMask(7, 9)), Error);
}

TEST(BackgroundBounds, QuantileCases) {
  Rng rng(8);
  PointCloud c;
  for (int i = 0; i < 1000; ++i) c.points.emplace_back(rng.uniform(), rng.uniform(), rng.uniform());
  const Aabb exact = compute_aabb(c);
  const Aabb zero = background_bounds(c, 0.0);
  EXPECT_EQ(zero.min, exact.min);
  EXPECT_EQ(zero.max, exact.max);
  for (int i = 0; i < 10; ++i) c.points.push_back(Vec3(0.5, 0.5, 0.5) + 100.0 * rng.unit_vector());
  const Aabb robust = background_bounds(c, 0.01);
  EXPECT_GE(robust.min.minCoeff(), -0.05);
  EXPECT_LE(robust.max.maxCoeff(), 1.05);
  PointCloud one;
  one.points = {Vec3(1, 2, 3)};
  const Aabb single = background_bounds(one, 0.005);
  EXPECT_EQ(single.min, Vec3(1, 2, 3));
  EXPECT_EQ(single.max, Vec3(1, 2, 3));
  EXPECT_THROW(background_bounds(PointCloud{}, 0.005), Error);
}

TEST(Icp, IdentityAndKnownTransform) {
  const PointCloud src = random_box_cloud(1500, 1);
  IcpConfig cfg;
  cfg.convergence_eps = 1e-12;
  cfg.max_iterations = 100;
  const auto same = icp_align(src, src, cfg);
  EXPECT_LE(same.rms, 1e-9);
  EXPECT_LT((same.transform.rotation - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);

  const RigidTransform truth{rotation_y(deg(5)), Vec3(0.1, 0, 0.05)};
  PointCloud dst = src;
  for (auto& p : dst.points) p = truth.apply(p);
  const auto r = icp_align(src, dst, cfg);
  EXPECT_LT((r.transform.rotation - truth.rotation).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((r.transform.translation - truth.translation).cwiseAbs().maxCoeff(), 1e-6);

  // Forward and backward registrations compose to the identity.
  const auto back = icp_align(dst, src, cfg);
  const auto round = back.transform * r.transform;
  EXPECT_LT((round.rotation - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_LT(round.translation.norm(), 1e-5);
}

TEST(Icp, TranslationOnlyRecoversShift) {
  const PointCloud src = random_box_cloud(1000, 2);
  PointCloud dst = src;
  for (auto& p : dst.points) p += Vec3(0.3, 0, 0);
  IcpConfig cfg;
  cfg.translation_only = true;
  const auto r = icp_align(src, dst, cfg);
  EXPECT_LT((r.transform.translation - Vec3(0.3, 0, 0)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_EQ(r.transform.rotation, Mat3::Identity());
}

TEST(Icp, Preconditions) {
  PointCloud two;
  two.points = {Vec3::Zero(), Vec3::UnitX()};
  EXPECT_THROW(icp_align(two, two, IcpConfig{}), Error);
  IcpConfig t;
  t.translation_only = true;
  PointCloud one;
  one.points = {Vec3::Zero()};
  EXPECT_NO_THROW(icp_align(one, one, t));
  IcpConfig bad;
  bad.max_iterations = 0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(MaskIou, HandCases) {
  BinaryMask a(4, 4), b(4, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      a.set(x, y, x < 2);
      b.set(x, y, y < 2);
    }
  }
  EXPECT_NEAR(mask_iou(a, b), 1.0 / 3.0, 1e-12);
  EXPECT_EQ(mask_iou(a, a), 1.0);
  BinaryMask c(8, 8), d(8, 8);
  c.set(0, 0, true);
  d.set(7, 7, true);
  EXPECT_EQ(mask_iou(c, d), 0.0);
  EXPECT_EQ(mask_iou(BinaryMask(3, 3), BinaryMask(3, 3)), 0.0);
  EXPECT_THROW(mask_iou(BinaryMask(3, 3), BinaryMask(3, 4)), Error);
}

TEST(Dilate, MatchesChebyshevOracle) {
  Rng rng(9);
  BinaryMask m(20, 15);
  for (auto& b : m.bits) b = rng.uniform() < 0.05 ? 1 : 0;
  for (int r : {0, 1, 3}) {
    const BinaryMask d = dilate(m, r);
    for (int y = 0; y < 15; ++y) {
      for (int x = 0; x < 20; ++x) {
        bool expect = false;
        for (int v = std::max(0, y - r); v <= std::min(14, y + r); ++v) {
          for (int u = std::max(0, x - r); u <= std::min(19, x + r); ++u) expect = expect || m.at(u, v);
        }
        ASSERT_EQ(d.at(x, y), expect);
      }
    }
  }
}
