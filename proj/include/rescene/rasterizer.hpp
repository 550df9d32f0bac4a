#pragma once

// Soft silhouette rasterizer. Each face f contributes
//   p_f = sigmoid(sign * d^2 / sigma)
// at a pixel center, where d is the distance to the projected triangle
// boundary in normalized device units (2 / min(width, height) per pixel)
// and sign is +1 inside the triangle. Coverage is 1 - prod_f (1 - p_f).

#include "rescene/dual.hpp"
#include "rescene/types.hpp"

#include <span>
#include <vector>

namespace rescene {

struct SoftRasterConfig {
  double sigma = 1e-4;
  double gamma_blend = 1e-4;  // reserved for shaded blending; unused by silhouettes
  int max_faces_per_pixel = 64;
  // Skip faces whose outward normal points away from the camera. On closed
  // meshes every silhouette edge then borders exactly one face, so the soft
  // coverage is not inflated by the coincident back-face edge.
  bool cull_backfaces = true;

  void validate() const;
};

using VertexTangent = Eigen::Matrix<double, 3, kMaxParams>;

// d(vertex)/d(theta) for the `active` leading pose parameters.
struct TangentField {
  int active = 0;
  std::vector<VertexTangent> per_vertex;
};

struct ProbMap {
  int width = 0;
  int height = 0;
  int active = 0;                 // tangent length; 0 when rendered without tangents
  std::vector<double> values;     // row-major, in [0, 1]
  std::vector<Grad> tangents;     // empty, or one per pixel

  bool has_tangents() const { return !tangents.empty(); }
  std::size_t size() const { return values.size(); }
  Dual dual_at(std::size_t i) const {
    return has_tangents() ? Dual(values[i], tangents[i]) : Dual(values[i]);
  }
};

ProbMap render_soft_silhouette(const TriMesh& mesh, const Camera& camera, const SoftRasterConfig& cfg,
                               const TangentField* tangents = nullptr);

// Same renderer over vertices that already carry their tangents.
ProbMap render_soft_silhouette(std::span<const V3<Dual>> vertices,
                               std::span<const std::array<int, 3>> faces, const Camera& camera,
                               const SoftRasterConfig& cfg, int active);

BinaryMask render_hard_silhouette(const TriMesh& mesh, const Camera& camera);

// Inclusive point-in-triangle test on projected pixel coordinates; false
// for zero-area triangles.
bool point_in_triangle_2d(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c);

}  // namespace rescene
