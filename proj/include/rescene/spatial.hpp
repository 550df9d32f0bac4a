#pragma once

#include "rescene/types.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace rescene {

struct Neighbor {
  std::size_t index = 0;
  double distance2 = 0.0;
};

// Exact nearest-neighbor queries over a static point set. Ties go to the
// lowest point index.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::span<const Vec3> points);

  bool empty() const { return points_.empty(); }
  std::size_t size() const { return points_.size(); }
  Neighbor nearest(const Vec3& query) const;

 private:
  struct Node {
    int axis = -1;  // -1 marks a leaf
    std::size_t begin = 0;
    std::size_t end = 0;
    double split = 0.0;
    int left = -1;
    int right = -1;
  };

  int build(std::size_t begin, std::size_t end, int depth);
  void search(int node, const Vec3& q, Neighbor& best) const;

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

struct TriangleFoot {
  Vec3 point = Vec3::Zero();
  Vec3 barycentric = Vec3::Zero();  // weights of vertices 0, 1, 2
  double distance2 = 0.0;
};

// Closest point on triangle (a, b, c) to p, with barycentric weights.
TriangleFoot closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

struct MeshFoot {
  std::size_t face = 0;
  TriangleFoot foot;
};

// Bounding-volume hierarchy over mesh triangles for nearest-surface queries.
class TriangleBvh {
 public:
  explicit TriangleBvh(const TriMesh& mesh);

  // Nearest triangle; ties go to the lowest face index.
  MeshFoot nearest(const Vec3& query) const;

 private:
  struct Node {
    Aabb box;
    int left = -1;
    int right = -1;
    std::size_t begin = 0;
    std::size_t end = 0;
  };

  int build(std::size_t begin, std::size_t end);
  void search(int node, const Vec3& q, MeshFoot& best, bool& found) const;

  const TriMesh* mesh_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

double box_distance2(const Aabb& box, const Vec3& p);

}  // namespace rescene
