#include "rescene/metrics.hpp"

#include "rescene/error.hpp"
#include "rescene/parallel.hpp"
#include "rescene/sampling.hpp"
#include "rescene/spatial.hpp"

#include <algorithm>
#include <cmath>

namespace rescene {

PointCloud Normalization::apply(const PointCloud& cloud) const {
  PointCloud out = cloud;
  for (auto& p : out.points) p = apply(p);
  return out;
}

NormalizedCloud normalize_cloud(const PointCloud& points) {
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "cannot normalize an empty cloud");
  Vec3 c = Vec3::Zero();
  for (const auto& p : points.points) c += p;
  c /= static_cast<double>(points.size());
  const double diag = compute_aabb(points.points).diagonal();
  if (!(diag > 0.0)) throw Error(ErrorCode::DegenerateCloud, "all points are identical");
  NormalizedCloud out;
  out.normalization = {c, 1.0 / diag};
  out.cloud = out.normalization.apply(points);
  return out;
}

namespace {

void require(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyInput, "metric needs two non-empty clouds");
}

// Nearest-neighbor distance from every point of `from` to the cloud `to`.
std::vector<double> nn_distances(const PointCloud& from, const PointCloud& to) {
  const KdTree tree(to.points);
  std::vector<double> out(from.size());
  parallel_for(from.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) out[i] = std::sqrt(tree.nearest(from.points[i]).distance2);
  });
  return out;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double fraction_within(const std::vector<double>& d, double tau) {
  const auto n = std::count_if(d.begin(), d.end(), [tau](double x) { return x <= tau; });
  return static_cast<double>(n) / static_cast<double>(d.size());
}

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

double chamfer(const PointCloud& a, const PointCloud& b) {
  require(a, b);
  return 0.5 * (mean(nn_distances(a, b)) + mean(nn_distances(b, a)));
}

FScore fscore(const PointCloud& pred, const PointCloud& gt, double tau) {
  require(pred, gt);
  if (!(tau > 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be positive");
  FScore out;
  out.precision = fraction_within(nn_distances(pred, gt), tau);
  out.recall = fraction_within(nn_distances(gt, pred), tau);
  out.f = harmonic(out.precision, out.recall);
  return out;
}

double bbox_iou3d(const PointCloud& a, const PointCloud& b) {
  require(a, b);
  const Aabb ba = compute_aabb(a.points);
  const Aabb bb = compute_aabb(b.points);
  const double va = ba.volume();
  const double vb = bb.volume();
  if (va <= 0.0 || vb <= 0.0) {
    return ba.min == bb.min && ba.max == bb.max ? 1.0 : 0.0;
  }
  double inter = 1.0;
  for (int k = 0; k < 3; ++k) {
    inter *= std::max(0.0, std::min(ba.max[k], bb.max[k]) - std::max(ba.min[k], bb.min[k]));
  }
  return inter / (va + vb - inter);
}

double hausdorff(const PointCloud& a, const PointCloud& b) {
  require(a, b);
  const auto ab = nn_distances(a, b);
  const auto ba = nn_distances(b, a);
  return std::max(*std::max_element(ab.begin(), ab.end()), *std::max_element(ba.begin(), ba.end()));
}

void MetricConfig::validate() const {
  if (samples_per_scene < 100) throw Error(ErrorCode::InvalidArgument, "samples_per_scene must be >= 100");
  if (!(fscore_tau > 0)) throw Error(ErrorCode::InvalidArgument, "fscore_tau must be positive");
  if (precision_tau && !(*precision_tau > 0)) throw Error(ErrorCode::InvalidArgument, "precision_tau must be positive");
  if (recall_tau && !(*recall_tau > 0)) throw Error(ErrorCode::InvalidArgument, "recall_tau must be positive");
  icp.validate();
}

MetricReport evaluate_clouds(const PointCloud& pred, const PointCloud& gt, const MetricConfig& cfg) {
  cfg.validate();
  require(pred, gt);
  const NormalizedCloud gt_norm = normalize_cloud(gt);
  PointCloud p = cfg.shared_normalization ? gt_norm.normalization.apply(pred) : normalize_cloud(pred).cloud;
  const PointCloud& g = gt_norm.cloud;

  MetricReport report;
  if (cfg.icp_align) {
    const IcpResult icp = icp_align(p, g, cfg.icp);
    for (auto& q : p.points) q = icp.transform.apply(q);
    report.icp_rms = icp.rms;
  }

  const std::vector<double> pg = nn_distances(p, g);
  const std::vector<double> gp = nn_distances(g, p);
  report.chamfer = 0.5 * (mean(pg) + mean(gp));
  report.hausdorff =
      std::max(*std::max_element(pg.begin(), pg.end()), *std::max_element(gp.begin(), gp.end()));
  report.bbox_iou = bbox_iou3d(p, g);
  report.precision = fraction_within(pg, cfg.precision_tau.value_or(cfg.fscore_tau));
  report.recall = fraction_within(gp, cfg.recall_tau.value_or(cfg.fscore_tau));
  report.fscore = harmonic(fraction_within(pg, cfg.fscore_tau), fraction_within(gp, cfg.fscore_tau));
  report.pred_samples = p.size();
  report.gt_samples = g.size();
  return report;
}

MetricReport evaluate_scene(std::span<const TriMesh> pred, std::span<const TriMesh> gt, const MetricConfig& cfg) {
  cfg.validate();
  if (pred.empty() || gt.empty()) throw Error(ErrorCode::EmptyInput, "both scenes need at least one mesh");
  const PointCloud pc = sample_surface(merge_meshes(pred), cfg.samples_per_scene, cfg.seed);
  const PointCloud gc = sample_surface(merge_meshes(gt), cfg.samples_per_scene, cfg.seed);
  return evaluate_clouds(pc, gc, cfg);
}

}  // namespace rescene
