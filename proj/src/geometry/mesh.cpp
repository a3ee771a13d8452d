#include "surfkin/geometry/mesh.hpp"

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "surfkin/io/atomic_file.hpp"

namespace surfkin::geometry {

TriangleMesh::TriangleMesh(Points vertices, std::vector<Triangle> triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
  const int nv = static_cast<int>(vertices_.size());
  for (std::size_t f = 0; f < triangles_.size(); ++f) {
    const auto& t = triangles_[f];
    for (int k = 0; k < 3; ++k) {
      if (t[k] < 0 || t[k] >= nv) {
        throw InputError("triangle " + std::to_string(f) + " has out-of-range index");
      }
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      throw InputError("triangle " + std::to_string(f) + " has repeated indices");
    }
    const Vec3 n = (vertices_[t[1]] - vertices_[t[0]]).cross(vertices_[t[2]] - vertices_[t[0]]);
    if (!(n.norm() > 0.0)) {
      throw InputError("triangle " + std::to_string(f) + " has zero area");
    }
  }
}

TriangleMesh grid_mesh(int rows, int cols, const Points& points) {
  if (rows < 2 || cols < 2 || static_cast<int>(points.size()) != rows * cols) {
    throw InputError("grid_mesh: point count does not match grid size");
  }
  std::vector<Triangle> tris;
  tris.reserve(static_cast<std::size_t>(2 * (rows - 1) * (cols - 1)));
  for (int r = 0; r + 1 < rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) {
      const int i00 = r * cols + c;
      const int i01 = i00 + 1;
      const int i10 = i00 + cols;
      const int i11 = i10 + 1;
      tris.push_back({i00, i10, i11});
      tris.push_back({i00, i11, i01});
    }
  }
  return TriangleMesh(points, std::move(tris));
}

RigidTransform::RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  const double ortho = (rotation_.transpose() * rotation_ - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!(ortho <= 1e-9) || !(std::abs(rotation_.determinant() - 1.0) <= 1e-9)) {
    throw InputError("rotation is not a proper orthonormal matrix");
  }
}

RigidTransform RigidTransform::from_axis_angle(const Vec3& axis, double angle,
                                               const Vec3& translation) {
  const Mat3 r = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
  return {r, translation};
}

RigidTransform RigidTransform::inverse() const {
  const Mat3 rt = rotation_.transpose();
  return {rt, -(rt * translation_)};
}

RigidTransform RigidTransform::compose(const RigidTransform& first) const {
  return {rotation_ * first.rotation_, rotation_ * first.translation_ + translation_};
}

double RigidTransform::rotation_angle() const {
  const double c = std::clamp((rotation_.trace() - 1.0) / 2.0, -1.0, 1.0);
  // acos loses precision near zero; use the skew part as well.
  const Vec3 s(rotation_(2, 1) - rotation_(1, 2), rotation_(0, 2) - rotation_(2, 0),
               rotation_(1, 0) - rotation_(0, 1));
  return std::atan2(0.5 * s.norm(), c);
}

Points apply_transform(const RigidTransform& t, const Points& pts) {
  Points out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(t.apply(p));
  return out;
}

void SampledSurface::validate() const {
  if (params.size() != points.size()) {
    throw InputError("sampled surface: params and points differ in length");
  }
  for (const auto& uv : params) {
    if (!(uv.x() >= 0.0 && uv.x() <= 1.0 && uv.y() >= 0.0 && uv.y() <= 1.0)) {
      throw InputError("sampled surface: parameter outside [0,1]^2");
    }
  }
}

nlohmann::json to_json(const SampledSurface& s) {
  nlohmann::json params = nlohmann::json::array();
  nlohmann::json points = nlohmann::json::array();
  for (const auto& uv : s.params) params.push_back({uv.x(), uv.y()});
  for (const auto& p : s.points) points.push_back({p.x(), p.y(), p.z()});
  return {{"params", std::move(params)}, {"points", std::move(points)}};
}

SampledSurface sampled_surface_from_json(const nlohmann::json& j) {
  SampledSurface s;
  try {
    for (const auto& uv : j.at("params")) s.params.emplace_back(uv.at(0).get<double>(), uv.at(1).get<double>());
    for (const auto& p : j.at("points")) {
      s.points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("sampled surface json: ") + e.what());
  }
  s.validate();
  return s;
}

TriangleMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open mesh file: " + path.string());
  Points verts;
  std::vector<Triangle> tris;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw InputError("bad vertex at line " + std::to_string(lineno));
      verts.emplace_back(x, y, z);
    } else if (tag == "f") {
      Triangle t{};
      int k = 0;
      std::string tok;
      while (ls >> tok) {
        if (k == 3) throw InputError("non-triangular face at line " + std::to_string(lineno));
        // Accept "i", "i/t", "i/t/n", "i//n"; only the vertex index is used.
        const int idx = std::stoi(tok.substr(0, tok.find('/')));
        t[k++] = idx > 0 ? idx - 1 : static_cast<int>(verts.size()) + idx;
      }
      if (k != 3) throw InputError("non-triangular face at line " + std::to_string(lineno));
      tris.push_back(t);
    }
  }
  if (tris.empty()) throw InputError("mesh file has no faces: " + path.string());
  return TriangleMesh(std::move(verts), std::move(tris));
}

std::string to_obj_string(const TriangleMesh& mesh) {
  std::ostringstream os;
  os.precision(17);
  for (const auto& v : mesh.vertices()) os << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles()) {
    os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
  return os.str();
}

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  io::write_file_atomic(path, to_obj_string(mesh));
}

}  // namespace surfkin::geometry
