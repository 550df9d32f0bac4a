#pragma once

// Scene-level 3D evaluation: normalization, ICP pre-alignment, and
// chamfer / F-score / bbox IoU / Hausdorff on sampled surface clouds.

#include "rescene/scene_geometry.hpp"
#include "rescene/types.hpp"

#include <cstdint>
#include <optional>
#include <span>

namespace rescene {

// p' = (p - center) * scale
struct Normalization {
  Vec3 center = Vec3::Zero();
  double scale = 1.0;

  Vec3 apply(const Vec3& p) const { return (p - center) * scale; }
  PointCloud apply(const PointCloud& cloud) const;
};

struct NormalizedCloud {
  PointCloud cloud;
  Normalization normalization;
};

// Centroid to the origin, AABB diagonal to 1.
NormalizedCloud normalize_cloud(const PointCloud& points);

double chamfer(const PointCloud& a, const PointCloud& b);

struct FScore {
  double f = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

FScore fscore(const PointCloud& pred, const PointCloud& gt, double tau);

double bbox_iou3d(const PointCloud& a, const PointCloud& b);
double hausdorff(const PointCloud& a, const PointCloud& b);

struct MetricConfig {
  std::size_t samples_per_scene = 20000;
  double fscore_tau = 0.05;
  // Thresholds for the reported precision/recall columns; unset means
  // fscore_tau, so f_score = 2PR/(P+R).
  std::optional<double> precision_tau;
  std::optional<double> recall_tau;
  IcpConfig icp{100, 1e-10, 0.1, false, true};
  bool shared_normalization = true;  // normalize pred with the GT transform
  bool icp_align = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct MetricReport {
  double chamfer = 0.0;
  double fscore = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double bbox_iou = 0.0;
  double hausdorff = 0.0;
  double icp_rms = 0.0;
  std::size_t pred_samples = 0;
  std::size_t gt_samples = 0;
};

MetricReport evaluate_clouds(const PointCloud& pred, const PointCloud& gt, const MetricConfig& cfg);
MetricReport evaluate_scene(std::span<const TriMesh> pred, std::span<const TriMesh> gt, const MetricConfig& cfg);

}  // namespace rescene
