#include "surfkin/geometry/closest_point.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace surfkin::geometry {

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return a + v * ab;
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return a + w * ac;
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return b + w * (c - b);
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  return a + ab * v + ac * w;
}

MeshQuery::MeshQuery(TriangleMesh mesh) : mesh_(std::move(mesh)) {
  if (mesh_.empty()) throw InputError("empty mesh");
  const int nt = static_cast<int>(mesh_.triangles().size());
  std::vector<Eigen::AlignedBox3d> boxes(static_cast<std::size_t>(nt));
  std::vector<Vec3> centroids(static_cast<std::size_t>(nt));
  for (int t = 0; t < nt; ++t) {
    Eigen::AlignedBox3d b;
    for (int k = 0; k < 3; ++k) b.extend(mesh_.corner(t, k));
    boxes[t] = b;
    centroids[t] = (mesh_.corner(t, 0) + mesh_.corner(t, 1) + mesh_.corner(t, 2)) / 3.0;
  }
  order_.resize(static_cast<std::size_t>(nt));
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(static_cast<std::size_t>(2 * nt / kLeafSize + 2));
  build(0, nt, boxes, centroids);
}

int MeshQuery::build(int begin, int end, std::vector<Eigen::AlignedBox3d>& boxes,
                     std::vector<Vec3>& centroids) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox3d box;
  Eigen::AlignedBox3d cbox;
  for (int i = begin; i < end; ++i) {
    box.extend(boxes[order_[i]]);
    cbox.extend(centroids[order_[i]]);
  }
  nodes_[id].box = box;
  if (end - begin <= kLeafSize) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  int axis = 0;
  cbox.sizes().maxCoeff(&axis);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     const double ca = centroids[a][axis];
                     const double cb = centroids[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  const int left = build(begin, mid, boxes, centroids);
  const int right = build(mid, end, boxes, centroids);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

ClosestPoint MeshQuery::closest_point(const Vec3& q) const {
  ClosestPoint best;
  double best_d2 = std::numeric_limits<double>::infinity();
  int stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (node.box.squaredExteriorDistance(q) >= best_d2) continue;
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int t = order_[i];
        const Vec3 c = closest_point_on_triangle(q, mesh_.corner(t, 0), mesh_.corner(t, 1),
                                                 mesh_.corner(t, 2));
        const double d2 = (c - q).squaredNorm();
        // Ties resolve to the lowest triangle index so results are order independent.
        if (d2 < best_d2 || (d2 == best_d2 && t < best.triangle)) {
          best_d2 = d2;
          best.point = c;
          best.triangle = t;
        }
      }
      continue;
    }
    const double dl = nodes_[node.left].box.squaredExteriorDistance(q);
    const double dr = nodes_[node.right].box.squaredExteriorDistance(q);
    // Push the farther child first so the nearer one is visited next.
    if (dl <= dr) {
      stack[top++] = node.right;
      stack[top++] = node.left;
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  best.distance = std::sqrt(best_d2);
  return best;
}

ClosestPoint closest_point(const Vec3& query, const TriangleMesh& mesh) {
  if (mesh.empty()) throw InputError("empty mesh");
  return MeshQuery(mesh).closest_point(query);
}

std::vector<ClosestPoint> closest_points_serial(const MeshQuery& q, const Points& queries) {
  std::vector<ClosestPoint> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) out[i] = q.closest_point(queries[i]);
  return out;
}

std::vector<ClosestPoint> closest_points(const MeshQuery& q, const Points& queries) {
  std::vector<ClosestPoint> out(queries.size());
  const auto n = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = q.closest_point(queries[i]);
  return out;
}

}  // namespace surfkin::geometry
