#include "rescene/spatial.hpp"

#include "rescene/error.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace rescene {

namespace {
constexpr std::size_t kLeafSize = 8;
}

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, points_.size(), 0);
  }
}

int KdTree::build(std::size_t begin, std::size_t end, int depth) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  Node node;
  node.begin = begin;
  node.end = end;
  if (end - begin <= kLeafSize) {
    nodes_[id] = node;
    return id;
  }
  Vec3 lo = points_[order_[begin]];
  Vec3 hi = lo;
  for (std::size_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) {
                     const double pa = points_[a][axis];
                     const double pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  node.axis = axis;
  node.split = points_[order_[mid]][axis];
  node.left = build(begin, mid, depth + 1);
  node.right = build(mid, end, depth + 1);
  nodes_[id] = node;
  return id;
}

void KdTree::search(int id, const Vec3& q, Neighbor& best) const {
  const Node& node = nodes_[id];
  if (node.axis < 0) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const std::size_t idx = order_[i];
      const double d2 = (points_[idx] - q).squaredNorm();
      if (d2 < best.distance2 || (d2 == best.distance2 && idx < best.index)) {
        best = {idx, d2};
      }
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const int near = diff < 0.0 ? node.left : node.right;
  const int far = diff < 0.0 ? node.right : node.left;
  search(near, q, best);
  // <= keeps equal-distance candidates reachable for the index tie-break.
  if (diff * diff <= best.distance2) search(far, q, best);
}

Neighbor KdTree::nearest(const Vec3& query) const {
  if (points_.empty()) throw Error(ErrorCode::EmptyInput, "nearest-neighbor query on empty tree");
  Neighbor best{std::numeric_limits<std::size_t>::max(), std::numeric_limits<double>::infinity()};
  search(0, query, best);
  return best;
}

TriangleFoot closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Voronoi-region walk over vertices, edges, then the face interior.
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  TriangleFoot out;
  auto finish = [&](double u, double v, double w) {
    out.barycentric = Vec3(u, v, w);
    out.point = u * a + v * b + w * c;
    out.distance2 = (p - out.point).squaredNorm();
    return out;
  };

  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return finish(1, 0, 0);

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return finish(0, 1, 0);

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return finish(1 - v, v, 0);
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return finish(0, 0, 1);

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return finish(1 - w, 0, w);
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return finish(0, 1 - w, w);
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  return finish(1 - v - w, v, w);
}

double box_distance2(const Aabb& box, const Vec3& p) {
  const Vec3 d = (box.min - p).cwiseMax(Vec3::Zero()).cwiseMax(p - box.max);
  return d.squaredNorm();
}

TriangleBvh::TriangleBvh(const TriMesh& mesh) : mesh_(&mesh) {
  if (mesh.empty()) throw Error(ErrorCode::EmptyInput, "BVH over an empty mesh");
  order_.resize(mesh.faces.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  nodes_.reserve(2 * mesh.faces.size() + 1);
  build(0, order_.size());
}

int TriangleBvh::build(std::size_t begin, std::size_t end) {
  const auto& verts = mesh_->vertices;
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  Node node;
  node.begin = begin;
  node.end = end;
  const auto& f0 = mesh_->faces[order_[begin]];
  node.box = {verts[f0[0]], verts[f0[0]]};
  Vec3 clo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 chi = -clo;
  for (std::size_t i = begin; i < end; ++i) {
    const auto& f = mesh_->faces[order_[i]];
    Vec3 centroid = Vec3::Zero();
    for (int k = 0; k < 3; ++k) {
      node.box.min = node.box.min.cwiseMin(verts[f[k]]);
      node.box.max = node.box.max.cwiseMax(verts[f[k]]);
      centroid += verts[f[k]];
    }
    centroid /= 3.0;
    clo = clo.cwiseMin(centroid);
    chi = chi.cwiseMax(centroid);
  }
  if (end - begin > 4) {
    int axis = 0;
    (chi - clo).maxCoeff(&axis);
    const std::size_t mid = begin + (end - begin) / 2;
    auto centroid_of = [&](std::size_t f) {
      const auto& t = mesh_->faces[f];
      return verts[t[0]][axis] + verts[t[1]][axis] + verts[t[2]][axis];
    };
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) {
                       const double ca = centroid_of(a);
                       const double cb = centroid_of(b);
                       return ca < cb || (ca == cb && a < b);
                     });
    node.left = build(begin, mid);
    node.right = build(mid, end);
  }
  nodes_[id] = node;
  return id;
}

void TriangleBvh::search(int id, const Vec3& q, MeshFoot& best, bool& found) const {
  const Node& node = nodes_[id];
  if (found && box_distance2(node.box, q) > best.foot.distance2) return;
  if (node.left < 0) {
    const auto& verts = mesh_->vertices;
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const std::size_t f = order_[i];
      const auto& t = mesh_->faces[f];
      const TriangleFoot foot = closest_point_on_triangle(q, verts[t[0]], verts[t[1]], verts[t[2]]);
      if (!found || foot.distance2 < best.foot.distance2 ||
          (foot.distance2 == best.foot.distance2 && f < best.face)) {
        best = {f, foot};
        found = true;
      }
    }
    return;
  }
  const double dl = box_distance2(nodes_[node.left].box, q);
  const double dr = box_distance2(nodes_[node.right].box, q);
  if (dl <= dr) {
    search(node.left, q, best, found);
    search(node.right, q, best, found);
  } else {
    search(node.right, q, best, found);
    search(node.left, q, best, found);
  }
}

MeshFoot TriangleBvh::nearest(const Vec3& query) const {
  MeshFoot best;
  bool found = false;
  search(0, query, best, found);
  return best;
}

}  // namespace rescene
