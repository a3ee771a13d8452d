#pragma once

#include <array>
#include <filesystem>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "surfkin/common.hpp"

namespace surfkin::geometry {

using Triangle = std::array<int, 3>;

// Triangle mesh in millimeters. Validated on construction: indices in range,
// distinct per face, and strictly positive face area.
class TriangleMesh {
 public:
  TriangleMesh() = default;
  TriangleMesh(Points vertices, std::vector<Triangle> triangles);

  const Points& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  bool empty() const { return triangles_.empty(); }

  Vec3 corner(int tri, int k) const { return vertices_[triangles_[tri][k]]; }

 private:
  Points vertices_;
  std::vector<Triangle> triangles_;
};

// Regular (rows x cols) vertex grid triangulated into 2 triangles per cell.
// Vertex (r, c) lives at index r * cols + c.
TriangleMesh grid_mesh(int rows, int cols, const Points& points);

class RigidTransform {
 public:
  RigidTransform();
  // Throws when the rotation is not orthonormal with det +1 (tolerance 1e-9).
  RigidTransform(const Mat3& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }
  static RigidTransform from_axis_angle(const Vec3& axis, double angle, const Vec3& translation);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  RigidTransform inverse() const;
  // (*this) after `first`: x -> this(first(x)).
  RigidTransform compose(const RigidTransform& first) const;
  double rotation_angle() const;

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

Points apply_transform(const RigidTransform& t, const Points& pts);

// Points sampled on a parametric surface together with their (u, v).
struct SampledSurface {
  std::vector<Vec2> params;
  Points points;

  void validate() const;
};

nlohmann::json to_json(const SampledSurface& s);
SampledSurface sampled_surface_from_json(const nlohmann::json& j);

// ASCII OBJ with `v` and triangular `f` records only.
TriangleMesh read_obj(const std::filesystem::path& path);
void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh);
std::string to_obj_string(const TriangleMesh& mesh);

}  // namespace surfkin::geometry
