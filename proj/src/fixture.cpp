#include "rescene/fixture.hpp"

#include "rescene/error.hpp"
#include "rescene/parallel.hpp"
#include "rescene/sampling.hpp"

#include <cmath>
#include <limits>

namespace rescene {

TriMesh make_box(const Vec3& size) {
  TriMesh m;
  const Vec3 h = 0.5 * size;
  for (int i = 0; i < 8; ++i) {
    m.vertices.emplace_back((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(), (i & 4) ? h.z() : -h.z());
  }
  m.faces = {{0, 4, 6}, {0, 6, 2}, {1, 3, 7}, {1, 7, 5}, {0, 1, 5}, {0, 5, 4},
             {2, 6, 7}, {2, 7, 3}, {0, 2, 3}, {0, 3, 1}, {4, 5, 7}, {4, 7, 6}};
  return m;
}

TriMesh FixtureObject::placed() const {
  TriMesh m = asset();
  const Mat3 r = rotation_y(pose.r_y);
  for (auto& v : m.vertices) v = r * (pose.s * v) + pose.t;
  return m;
}

namespace {

TriMesh quad(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  TriMesh m;
  m.vertices = {a, b, c, d};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

}  // namespace

TriMesh RoomShell::floor() const {
  return quad({x_min, 0, z_min}, {x_min, 0, z_max}, {x_max, 0, z_max}, {x_max, 0, z_min});
}

TriMesh RoomShell::walls() const {
  const TriMesh back = quad({x_min, 0, z_min}, {x_max, 0, z_min}, {x_max, height, z_min}, {x_min, height, z_min});
  const TriMesh left = quad({x_min, 0, z_max}, {x_min, 0, z_min}, {x_min, height, z_min}, {x_min, height, z_max});
  const TriMesh right = quad({x_max, 0, z_min}, {x_max, 0, z_max}, {x_max, height, z_max}, {x_max, height, z_min});
  const TriMesh parts[] = {back, left, right};
  return merge_meshes(parts);
}

void SceneFixture::validate() const {
  camera.validate();
  if (!(room.x_min < room.x_max && room.z_min < room.z_max && room.height > 0)) {
    throw Error(ErrorCode::InvalidArgument, "room shell is empty");
  }
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& o = objects[i];
    if (o.id.empty()) throw Error(ErrorCode::InvalidArgument, "fixture object without id");
    if ((o.box_size.array() <= 0).any() || !(o.pose.s > 0)) {
      throw Error(ErrorCode::InvalidArgument, "fixture object '" + o.id + "' has a non-positive size");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (objects[j].id == o.id) throw Error(ErrorCode::InvalidArgument, "duplicate fixture id '" + o.id + "'");
    }
  }
  if (point_noise < 0) throw Error(ErrorCode::InvalidArgument, "point_noise must be >= 0");
}

const FixtureObject* SceneFixture::find(const std::string& id) const {
  for (const auto& o : objects) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

SceneFixture default_fixture() {
  SceneFixture f;
  f.camera.width = 256;
  f.camera.height = 192;
  f.camera.fx = 200;
  f.camera.fy = 200;
  f.camera.cx = 127.5;
  f.camera.cy = 95.5;
  const double pitch = 22.0 * std::acos(-1.0) / 180.0;
  const double c = std::cos(pitch);
  const double s = std::sin(pitch);
  // Columns: camera X (right), Y (down), Z (forward) in world coordinates.
  f.camera.pose.rotation << 1, 0, 0, 0, -c, -s, 0, s, -c;
  f.camera.pose.translation = Vec3(0.0, 1.6, 2.2);

  FixtureObject table{"table", "table with decorations", {1.0, 0.6, 0.55}, {{-0.8, 0.33, -1.2}, 0.35, 1.1}, {170, 110, 60}};
  FixtureObject cabinet{"cabinet", "cabinet with decorations", {0.5, 1.0, 0.45}, {{1.05, 0.6, -2.0}, -0.25, 1.2}, {90, 120, 160}};
  FixtureObject ottoman{"ottoman", "furniture", {1.0, 0.5, 0.8}, {{0.35, 0.15, -0.4}, 0.8, 0.6}, {160, 60, 70}};
  FixtureObject shelf{"shelf", "shelf", {1.0, 0.3, 0.35}, {{-0.3, 1.35, -2.84}, 0.0, 0.9}, {110, 80, 50}};
  f.objects = {table, cabinet, ottoman, shelf};
  f.empty_room_offset = Vec3(0.01, -0.005, 0.008);
  return f;
}

namespace {

struct Tri {
  Vec3 a, b, c;
  Vec3 normal;
  int id;
};

bool intersect(const Vec3& o, const Vec3& d, const Tri& t, double& dist) {
  // Moller-Trumbore, double sided.
  const Vec3 e1 = t.b - t.a;
  const Vec3 e2 = t.c - t.a;
  const Vec3 p = d.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-14) return false;
  const double inv = 1.0 / det;
  const Vec3 s = o - t.a;
  const double u = s.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return false;
  const Vec3 q = s.cross(e1);
  const double v = d.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return false;
  dist = e2.dot(q) * inv;
  return dist > 1e-9;
}

std::uint8_t shade(std::uint8_t base, double factor) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(base * factor, 0.0, 255.0)));
}

}  // namespace

FixtureRender render_fixture(const SceneFixture& fixture, bool include_objects) {
  fixture.validate();
  std::vector<Tri> tris;
  auto add = [&tris](const TriMesh& m, int id) {
    for (const auto& f : m.faces) {
      const Vec3& a = m.vertices[f[0]];
      const Vec3& b = m.vertices[f[1]];
      const Vec3& c = m.vertices[f[2]];
      tris.push_back({a, b, c, (b - a).cross(c - a).normalized(), id});
    }
  };
  if (include_objects) {
    for (std::size_t i = 0; i < fixture.objects.size(); ++i) add(fixture.objects[i].placed(), static_cast<int>(i));
  }
  add(fixture.room.floor(), kFloorId);
  add(fixture.room.walls(), kWallId);

  const Camera& cam = fixture.camera;
  FixtureRender out;
  out.image = RgbImage(cam.width, cam.height);
  out.ids.assign(static_cast<std::size_t>(cam.width) * cam.height, kNoHit);
  out.points = OrganizedPointMap(cam.width, cam.height);
  const Vec3 origin = cam.center();
  const Vec3 light = Vec3(0.3, 1.0, 0.5).normalized();

  parallel_for(static_cast<std::size_t>(cam.height), [&](std::size_t y0, std::size_t y1) {
    for (std::size_t yy = y0; yy < y1; ++yy) {
      const int y = static_cast<int>(yy);
      for (int x = 0; x < cam.width; ++x) {
        const Vec3 dir_cam((x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0);
        const Vec3 dir = cam.pose.rotation * dir_cam;
        double best = std::numeric_limits<double>::infinity();
        const Tri* hit = nullptr;
        for (const auto& t : tris) {
          double dist = 0.0;
          if (intersect(origin, dir, t, dist) && dist < best) {
            best = dist;
            hit = &t;
          }
        }
        if (hit == nullptr) continue;
        const std::size_t i = out.points.index(x, y);
        out.ids[i] = hit->id;
        out.points.set(x, y, origin + best * dir, 1.0);
        Rgb base = hit->id == kFloorId  ? fixture.room.floor_color
                   : hit->id == kWallId ? fixture.room.wall_color
                                        : fixture.objects[static_cast<std::size_t>(hit->id)].color;
        const double factor = 0.55 + 0.45 * std::abs(hit->normal.dot(light));
        out.image.set(x, y, {shade(base[0], factor), shade(base[1], factor), shade(base[2], factor)});
      }
    }
  });

  if (fixture.point_noise > 0) {
    Rng rng(fixture.seed);
    for (std::size_t i = 0; i < out.points.points.size(); ++i) {
      if (!out.points.valid[i]) continue;
      out.points.points[i] += fixture.point_noise * Vec3(rng.normal(), rng.normal(), rng.normal());
    }
  }
  return out;
}

BinaryMask id_mask(const FixtureRender& render, int id) {
  BinaryMask m(render.image.width, render.image.height);
  for (std::size_t i = 0; i < render.ids.size(); ++i) m.bits[i] = render.ids[i] == id ? 1 : 0;
  return m;
}

}  // namespace rescene
