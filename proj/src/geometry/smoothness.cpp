#include "surfkin/geometry/smoothness.hpp"

#include <Eigen/Dense>

#include <algorithm>

namespace surfkin::geometry {

std::vector<std::vector<int>> vertex_neighbors(const TriangleMesh& mesh) {
  std::vector<std::vector<int>> nb(mesh.vertices().size());
  for (const auto& t : mesh.triangles()) {
    for (int k = 0; k < 3; ++k) {
      nb[t[k]].push_back(t[(k + 1) % 3]);
      nb[t[k]].push_back(t[(k + 2) % 3]);
    }
  }
  for (auto& n : nb) {
    std::sort(n.begin(), n.end());
    n.erase(std::unique(n.begin(), n.end()), n.end());
  }
  return nb;
}

namespace {

std::vector<std::vector<int>> checked_neighbors(const TriangleMesh& mesh) {
  auto nb = vertex_neighbors(mesh);
  for (const auto& n : nb) {
    if (n.empty()) throw InputError("isolated vertex");
  }
  return nb;
}

Points laplacian_from(const TriangleMesh& mesh, const std::vector<std::vector<int>>& nb) {
  const auto& v = mesh.vertices();
  Points delta(v.size(), Vec3::Zero());
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (int j : nb[i]) delta[i] += v[i] - v[j];
    delta[i] /= static_cast<double>(nb[i].size());
  }
  return delta;
}

Points vertex_normals(const TriangleMesh& mesh) {
  Points n(mesh.vertices().size(), Vec3::Zero());
  for (std::size_t f = 0; f < mesh.triangles().size(); ++f) {
    const int t = static_cast<int>(f);
    const Vec3 fn = (mesh.corner(t, 1) - mesh.corner(t, 0)).cross(mesh.corner(t, 2) - mesh.corner(t, 0));
    for (int k = 0; k < 3; ++k) n[mesh.triangles()[f][k]] += fn;  // area weighted
  }
  for (auto& x : n) x.normalize();
  return n;
}

}  // namespace

Points umbrella_laplacian(const TriangleMesh& mesh) {
  return laplacian_from(mesh, checked_neighbors(mesh));
}

std::vector<double> laplacian_smoothness(const TriangleMesh& mesh) {
  const auto nb = checked_neighbors(mesh);
  const Points delta = laplacian_from(mesh, nb);
  const Points normals = vertex_normals(mesh);
  const auto& v = mesh.vertices();

  std::vector<double> mag(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) mag[i] = delta[i].norm();

  std::vector<double> s(v.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec3& n = normals[i];
    Vec3 e1 = n.unitOrthogonal();
    Vec3 e2 = n.cross(e1);
    const int k = static_cast<int>(nb[i].size());
    Eigen::MatrixX2d a(k, 2);
    VecX b(k);
    for (int r = 0; r < k; ++r) {
      const Vec3 d = v[nb[i][r]] - v[i];
      a(r, 0) = d.dot(e1);
      a(r, 1) = d.dot(e2);
      b(r) = mag[nb[i][r]] - mag[i];
    }
    const Eigen::Vector2d g = a.colPivHouseholderQr().solve(b);
    s[i] = g.norm();
  }
  return s;
}

}  // namespace surfkin::geometry
