#pragma once

#include "surfkin/geometry/mesh.hpp"

namespace surfkin::geometry {

// Per-vertex one-ring adjacency (sorted, unique) derived from triangle edges.
std::vector<std::vector<int>> vertex_neighbors(const TriangleMesh& mesh);

// Uniform-weight umbrella Laplacian (1/d_i) * sum_j (V_i - V_j).
Points umbrella_laplacian(const TriangleMesh& mesh);

// S_i = |grad |delta_i||: the gradient of the Laplacian magnitude field,
// estimated at each vertex by a least-squares linear fit over its one-ring in
// the vertex tangent plane. Throws "isolated vertex" for unreferenced vertices.
std::vector<double> laplacian_smoothness(const TriangleMesh& mesh);

}  // namespace surfkin::geometry
