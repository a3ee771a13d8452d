#pragma once

#include <Eigen/Geometry>

#include "surfkin/geometry/mesh.hpp"

namespace surfkin::geometry {

struct ClosestPoint {
  Vec3 point = Vec3::Zero();
  double distance = 0.0;
  int triangle = -1;
};

// Closest point on a single triangle (Voronoi-region walk).
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

// Axis-aligned bounding-volume hierarchy over a mesh: median split on the
// longest centroid axis, at most 8 triangles per leaf. The mesh is held by
// value so the query object is self-contained and immutable.
class MeshQuery {
 public:
  static constexpr int kLeafSize = 8;

  explicit MeshQuery(TriangleMesh mesh);

  const TriangleMesh& mesh() const { return mesh_; }
  ClosestPoint closest_point(const Vec3& q) const;

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    int left = -1;   // child index, or -1 for a leaf
    int right = -1;
    int begin = 0;   // range into order_ for leaves
    int end = 0;
  };

  int build(int begin, int end, std::vector<Eigen::AlignedBox3d>& boxes,
            std::vector<Vec3>& centroids);

  TriangleMesh mesh_;
  std::vector<Node> nodes_;
  std::vector<int> order_;
};

// One-shot query; builds a hierarchy each call. Prefer MeshQuery for repeats.
ClosestPoint closest_point(const Vec3& query, const TriangleMesh& mesh);

// Batched queries. The serial version is the reference; the OpenMP version
// writes each result to its own slot and must match it exactly.
std::vector<ClosestPoint> closest_points_serial(const MeshQuery& q, const Points& queries);
std::vector<ClosestPoint> closest_points(const MeshQuery& q, const Points& queries);

}  // namespace surfkin::geometry
