#include "rescene/rasterizer.hpp"

#include "rescene/error.hpp"
#include "rescene/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace rescene {

namespace {

// Faces whose sigmoid argument is below -kCutoff contribute < 1e-13.
constexpr double kCutoff = 30.0;
constexpr int kBinSize = 8;
constexpr double kNearDepth = 1e-9;

template <class T>
struct P2 {
  T x{}, y{};
};

template <class T>
T segment_distance2(const P2<T>& p, const P2<T>& a, const P2<T>& b) {
  const T ex = b.x - a.x;
  const T ey = b.y - a.y;
  const T px = p.x - a.x;
  const T py = p.y - a.y;
  const T len2 = ex * ex + ey * ey;
  T t(0.0);
  if (value_of(len2) > 0.0) {
    t = (px * ex + py * ey) / len2;
    if (value_of(t) < 0.0) t = T(0.0);
    if (value_of(t) > 1.0) t = T(1.0);
  }
  const T dx = px - t * ex;
  const T dy = py - t * ey;
  return dx * dx + dy * dy;
}

int clamped_pixel(double coord, int size) {
  return static_cast<int>(std::clamp(std::floor(coord), 0.0, static_cast<double>(size - 1)));
}

double edge_fn(const Vec2& a, const Vec2& b, const Vec2& p) {
  return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

struct ProjectedFace {
  int index = 0;
  Vec2 a, b, c;
  double min_x = 0, min_y = 0, max_x = 0, max_y = 0;  // expanded by the cutoff radius
};

template <class T>
struct ProjectedVertices {
  std::vector<P2<T>> pixel;
  std::vector<double> depth;
};

template <class T>
ProjectedVertices<T> project_all(std::span<const V3<T>> vertices, const Camera& camera) {
  ProjectedVertices<T> out;
  out.pixel.resize(vertices.size());
  out.depth.resize(vertices.size());
  const Mat3 rt = camera.pose.rotation.transpose();
  const V3<T> origin(camera.pose.translation);
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const V3<T> c = mat_mul(rt, vertices[i] - origin);
    out.depth[i] = value_of(c.z);
    if (value_of(c.z) > kNearDepth) {
      out.pixel[i] = {camera.fx * c.x / c.z + camera.cx, camera.fy * c.y / c.z + camera.cy};
    }
  }
  return out;
}

template <class T>
ProbMap render_impl(std::span<const V3<T>> vertices, std::span<const std::array<int, 3>> faces,
                    const Camera& camera, const SoftRasterConfig& cfg, int active) {
  if (vertices.empty() || faces.empty()) throw Error(ErrorCode::EmptyMesh, "nothing to render");
  cfg.validate();
  camera.validate();

  const ProjectedVertices<T> proj = project_all(vertices, camera);
  const int width = camera.width;
  const int height = camera.height;
  const double ndc_per_px = 2.0 / std::min(width, height);
  const double px2_to_arg = ndc_per_px * ndc_per_px / cfg.sigma;
  const double radius_px = std::sqrt(kCutoff / px2_to_arg);

  std::vector<ProjectedFace> kept;
  kept.reserve(faces.size());
  bool any_in_front = false;
  const Vec3 eye = camera.center();
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& t = faces[f];
    if (proj.depth[t[0]] <= kNearDepth || proj.depth[t[1]] <= kNearDepth ||
        proj.depth[t[2]] <= kNearDepth) {
      continue;
    }
    any_in_front = true;
    if (cfg.cull_backfaces) {
      const Vec3 a = vertices[t[0]].value();
      const Vec3 n = (vertices[t[1]].value() - a).cross(vertices[t[2]].value() - a);
      if (n.dot(a - eye) >= 0.0) continue;
    }
    ProjectedFace pf;
    pf.index = static_cast<int>(f);
    auto val = [&](int v) { return Vec2(value_of(proj.pixel[v].x), value_of(proj.pixel[v].y)); };
    pf.a = val(t[0]);
    pf.b = val(t[1]);
    pf.c = val(t[2]);
    pf.min_x = std::min({pf.a.x(), pf.b.x(), pf.c.x()}) - radius_px;
    pf.max_x = std::max({pf.a.x(), pf.b.x(), pf.c.x()}) + radius_px;
    pf.min_y = std::min({pf.a.y(), pf.b.y(), pf.c.y()}) - radius_px;
    pf.max_y = std::max({pf.a.y(), pf.b.y(), pf.c.y()}) + radius_px;
    kept.push_back(pf);
  }
  if (!any_in_front) throw Error(ErrorCode::AllFacesCulled, "every face is behind the camera");

  const int bins_x = (width + kBinSize - 1) / kBinSize;
  const int bins_y = (height + kBinSize - 1) / kBinSize;
  std::vector<std::vector<int>> bins(static_cast<std::size_t>(bins_x) * bins_y);
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const auto& pf = kept[k];
    if (pf.max_x < 0 || pf.max_y < 0 || pf.min_x > width - 1 || pf.min_y > height - 1) continue;
    const int bx0 = clamped_pixel(pf.min_x, width) / kBinSize;
    const int bx1 = clamped_pixel(pf.max_x, width) / kBinSize;
    const int by0 = clamped_pixel(pf.min_y, height) / kBinSize;
    const int by1 = clamped_pixel(pf.max_y, height) / kBinSize;
    for (int by = by0; by <= by1; ++by) {
      for (int bx = bx0; bx <= bx1; ++bx) bins[static_cast<std::size_t>(by) * bins_x + bx].push_back(static_cast<int>(k));
    }
  }

  ProbMap out;
  out.width = width;
  out.height = height;
  out.active = active;
  out.values.assign(static_cast<std::size_t>(width) * height, 0.0);
  constexpr bool kDual = std::is_same_v<T, Dual>;
  if constexpr (kDual) out.tangents.assign(out.values.size(), Grad::Zero());

  parallel_for(static_cast<std::size_t>(height), [&](std::size_t row_begin, std::size_t row_end) {
    struct Candidate {
      int kept_index;
      double arg;
    };
    std::vector<Candidate> cands;
    for (std::size_t y = row_begin; y < row_end; ++y) {
      for (int x = 0; x < width; ++x) {
        const Vec2 p(x, static_cast<double>(y));
        const auto& bin = bins[(y / kBinSize) * bins_x + x / kBinSize];
        cands.clear();
        for (int k : bin) {
          const auto& pf = kept[k];
          if (p.x() < pf.min_x || p.x() > pf.max_x || p.y() < pf.min_y || p.y() > pf.max_y) continue;
          const P2<double> q{p.x(), p.y()};
          const P2<double> a{pf.a.x(), pf.a.y()}, b{pf.b.x(), pf.b.y()}, c{pf.c.x(), pf.c.y()};
          double d2 = segment_distance2(q, a, b);
          d2 = std::min(d2, segment_distance2(q, b, c));
          d2 = std::min(d2, segment_distance2(q, c, a));
          const bool inside = point_in_triangle_2d(p, pf.a, pf.b, pf.c);
          const double arg = (inside ? 1.0 : -1.0) * d2 * px2_to_arg;
          if (arg < -kCutoff) continue;
          cands.push_back({k, arg});
        }
        if (cands.empty()) continue;
        const auto cap = static_cast<std::size_t>(cfg.max_faces_per_pixel);
        if (cands.size() > cap) {
          std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(cap), cands.end(),
                            [&](const Candidate& l, const Candidate& r) {
                              return l.arg > r.arg || (l.arg == r.arg && kept[l.kept_index].index < kept[r.kept_index].index);
                            });
          cands.resize(cap);
        }
        const std::size_t pix = y * static_cast<std::size_t>(width) + x;
        if constexpr (kDual) {
          T miss(1.0);
          const P2<T> q{T(p.x()), T(p.y())};
          for (const auto& cand : cands) {
            const auto& t = faces[kept[cand.kept_index].index];
            const auto& a = proj.pixel[t[0]];
            const auto& b = proj.pixel[t[1]];
            const auto& c = proj.pixel[t[2]];
            // Nearest edge chosen on values; lowest edge index wins ties.
            const double da = segment_distance2(P2<double>{p.x(), p.y()}, P2<double>{value_of(a.x), value_of(a.y)}, P2<double>{value_of(b.x), value_of(b.y)});
            const double db = segment_distance2(P2<double>{p.x(), p.y()}, P2<double>{value_of(b.x), value_of(b.y)}, P2<double>{value_of(c.x), value_of(c.y)});
            const double dc = segment_distance2(P2<double>{p.x(), p.y()}, P2<double>{value_of(c.x), value_of(c.y)}, P2<double>{value_of(a.x), value_of(a.y)});
            T d2;
            if (da <= db && da <= dc) {
              d2 = segment_distance2(q, a, b);
            } else if (db <= dc) {
              d2 = segment_distance2(q, b, c);
            } else {
              d2 = segment_distance2(q, c, a);
            }
            const double sign = cand.arg >= 0.0 ? 1.0 : -1.0;
            miss *= sigmoid(T(-sign * px2_to_arg) * d2);
          }
          const T value = 1.0 - miss;
          out.values[pix] = std::clamp(value.v, 0.0, 1.0);
          out.tangents[pix] = value.d;
        } else {
          double miss = 1.0;
          for (const auto& cand : cands) miss *= sigmoid(-cand.arg);
          out.values[pix] = std::clamp(1.0 - miss, 0.0, 1.0);
        }
      }
    }
  });
  return out;
}

}  // namespace

void SoftRasterConfig::validate() const {
  if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be positive");
  if (max_faces_per_pixel < 1) {
    throw Error(ErrorCode::InvalidArgument, "max_faces_per_pixel must be at least 1");
  }
}

bool point_in_triangle_2d(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
  const double area = edge_fn(a, b, c);
  if (area == 0.0) return false;
  const double w0 = edge_fn(b, c, p);
  const double w1 = edge_fn(c, a, p);
  const double w2 = edge_fn(a, b, p);
  if (area > 0.0) return w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0;
  return w0 <= 0.0 && w1 <= 0.0 && w2 <= 0.0;
}

ProbMap render_soft_silhouette(const TriMesh& mesh, const Camera& camera, const SoftRasterConfig& cfg,
                               const TangentField* tangents) {
  if (mesh.empty()) throw Error(ErrorCode::EmptyMesh, "mesh has no faces");
  if (tangents == nullptr) {
    std::vector<V3<double>> verts;
    verts.reserve(mesh.vertices.size());
    for (const auto& v : mesh.vertices) verts.emplace_back(v);
    return render_impl<double>(verts, mesh.faces, camera, cfg, 0);
  }
  if (tangents->per_vertex.size() != mesh.vertices.size() || tangents->active < 0 ||
      tangents->active > kMaxParams) {
    throw Error(ErrorCode::ShapeMismatch, "tangent field does not match the mesh");
  }
  std::vector<V3<Dual>> verts;
  verts.reserve(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    const auto& t = tangents->per_vertex[i];
    verts.emplace_back(Dual(v.x(), t.row(0).transpose()), Dual(v.y(), t.row(1).transpose()),
                       Dual(v.z(), t.row(2).transpose()));
  }
  return render_impl<Dual>(verts, mesh.faces, camera, cfg, tangents->active);
}

ProbMap render_soft_silhouette(std::span<const V3<Dual>> vertices,
                               std::span<const std::array<int, 3>> faces, const Camera& camera,
                               const SoftRasterConfig& cfg, int active) {
  return render_impl<Dual>(vertices, faces, camera, cfg, active);
}

BinaryMask render_hard_silhouette(const TriMesh& mesh, const Camera& camera) {
  if (mesh.empty()) throw Error(ErrorCode::EmptyMesh, "mesh has no faces");
  camera.validate();
  std::vector<V3<double>> verts;
  verts.reserve(mesh.vertices.size());
  for (const auto& v : mesh.vertices) verts.emplace_back(v);
  const ProjectedVertices<double> proj = project_all<double>(verts, camera);

  BinaryMask mask(camera.width, camera.height);
  for (const auto& t : mesh.faces) {
    if (proj.depth[t[0]] <= kNearDepth || proj.depth[t[1]] <= kNearDepth || proj.depth[t[2]] <= kNearDepth) {
      continue;
    }
    const Vec2 a(proj.pixel[t[0]].x, proj.pixel[t[0]].y);
    const Vec2 b(proj.pixel[t[1]].x, proj.pixel[t[1]].y);
    const Vec2 c(proj.pixel[t[2]].x, proj.pixel[t[2]].y);
    const int x0 = clamped_pixel(std::ceil(std::min({a.x(), b.x(), c.x()})), camera.width);
    const int x1 = clamped_pixel(std::floor(std::max({a.x(), b.x(), c.x()})), camera.width);
    const int y0 = clamped_pixel(std::ceil(std::min({a.y(), b.y(), c.y()})), camera.height);
    const int y1 = clamped_pixel(std::floor(std::max({a.y(), b.y(), c.y()})), camera.height);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (!mask.at(x, y) && point_in_triangle_2d(Vec2(x, y), a, b, c)) mask.set(x, y, true);
      }
    }
  }
  return mask;
}

}  // namespace rescene
