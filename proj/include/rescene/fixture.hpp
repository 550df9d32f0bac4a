#pragma once

// Declarative synthetic room: a floor, three walls and posed box assets seen
// through a pinhole camera. Ray casting it yields the input image, instance
// ids and the organized point map that the mock services hand out.

#include "rescene/image.hpp"
#include "rescene/pose.hpp"
#include "rescene/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rescene {

// Axis-aligned box centered at the origin, outward counter-clockwise faces.
TriMesh make_box(const Vec3& size);
inline TriMesh unit_cube() { return make_box(Vec3::Ones()); }

struct FixtureObject {
  std::string id;
  std::string label;
  Vec3 box_size = Vec3::Ones();  // canonical asset, centered at the origin
  PoseParams5 pose;               // world = R_y(r_y) * s * v + t
  Rgb color{180, 120, 60};

  TriMesh asset() const { return make_box(box_size); }
  TriMesh placed() const;
};

struct RoomShell {
  double x_min = -2.0;
  double x_max = 2.0;
  double z_min = -3.0;  // back wall
  double z_max = 3.0;   // floor extends behind the camera
  double height = 2.6;
  Rgb floor_color{150, 150, 150};
  Rgb wall_color{225, 220, 205};

  TriMesh floor() const;
  TriMesh walls() const;
};

struct SceneFixture {
  Camera camera;
  RoomShell room;
  std::vector<FixtureObject> objects;
  Vec3 empty_room_offset = Vec3::Zero();  // geometry estimator drift on the second image
  double point_noise = 0.0;               // Gaussian sigma added to estimated points
  std::uint64_t seed = 0;

  void validate() const;
  const FixtureObject* find(const std::string& id) const;
};

// Default bundled scene: three floor objects and one wall shelf.
SceneFixture default_fixture();

inline constexpr int kNoHit = -1;
inline constexpr int kFloorId = -2;
inline constexpr int kWallId = -3;

struct FixtureRender {
  RgbImage image;
  std::vector<int> ids;  // object index, kFloorId, kWallId or kNoHit per pixel
  OrganizedPointMap points;
};

// Ray-casts pixel centers. With include_objects = false only the room shell
// is visible.
FixtureRender render_fixture(const SceneFixture& fixture, bool include_objects = true);

BinaryMask id_mask(const FixtureRender& render, int id);

}  // namespace rescene
