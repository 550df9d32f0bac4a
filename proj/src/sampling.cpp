#include "rescene/sampling.hpp"

#include "rescene/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rescene {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u = 0.0;
  while (u <= 0.0) u = uniform();
  const double v = uniform();
  const double r = std::sqrt(-2.0 * std::log(u));
  spare_ = r * std::sin(2.0 * std::numbers::pi * v);
  has_spare_ = true;
  return r * std::cos(2.0 * std::numbers::pi * v);
}

Vec3 Rng::unit_vector() {
  Vec3 v(normal(), normal(), normal());
  while (v.norm() < 1e-12) v = Vec3(normal(), normal(), normal());
  return v.normalized();
}

PointCloud sample_surface(const TriMesh& mesh, std::size_t count, std::uint64_t seed) {
  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    total += mesh.face_area(f);
    cumulative[f] = total;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::SamplingFailed, "mesh has zero surface area");

  Rng rng(seed);
  PointCloud out;
  out.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double pick = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    const std::size_t f = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                                                 cumulative.size() - 1);
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const auto& t = mesh.faces[f];
    out.points.push_back((1.0 - r1) * mesh.vertices[t[0]] + r1 * (1.0 - r2) * mesh.vertices[t[1]] +
                         r1 * r2 * mesh.vertices[t[2]]);
  }
  return out;
}

}  // namespace rescene
