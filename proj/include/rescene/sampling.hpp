#pragma once

#include "rescene/types.hpp"

#include <cstdint>
#include <random>

namespace rescene {

// Seeded generator with platform-independent real/normal draws (the
// std distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * n) % n; }
  double normal();
  Vec3 unit_vector();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Area-weighted uniform samples on the mesh surface. Meshes that share
// topology and relative face areas receive corresponding samples for the
// same seed.
PointCloud sample_surface(const TriMesh& mesh, std::size_t count, std::uint64_t seed);

}  // namespace rescene
