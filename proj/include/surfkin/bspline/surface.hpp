#pragma once

#include <nlohmann/json_fwd.hpp>

#include "surfkin/common.hpp"
#include "surfkin/geometry/mesh.hpp"

namespace surfkin::bspline {

// Clamped knot vector: the first and last knots repeat degree + 1 times.
class KnotVector {
 public:
  KnotVector() = default;
  KnotVector(int degree, std::vector<double> knots);

  static KnotVector clamped_uniform(int control_count, int degree);

  int degree() const { return degree_; }
  const std::vector<double>& knots() const { return knots_; }
  int control_count() const { return static_cast<int>(knots_.size()) - degree_ - 1; }
  double front() const { return knots_.front(); }
  double back() const { return knots_.back(); }

  // Index s with knots[s] <= u < knots[s+1] (the last non-empty span at u = back()).
  int find_span(double u) const;

  // The degree + 1 basis values that are non-zero on span `span` at u.
  void nonzero_basis(int span, double u, double* out) const;
  // Values and first derivatives of the non-zero basis functions.
  void nonzero_basis_derivs(int span, double u, double* values, double* derivs) const;

  bool operator==(const KnotVector&) const = default;

 private:
  int degree_ = 0;
  std::vector<double> knots_;
};

// Full length-m basis vector N_{i,p}(u). Throws "parameter out of range".
std::vector<double> basis(double u, const KnotVector& kv);

// Sparse tensor-product weights at (u, v): (degree+1)^2 control indices
// (row-major i * n + j) and their basis products.
struct SurfaceSupport {
  std::vector<int> index;
  std::vector<double> weight;
};

class BSplineSurface {
 public:
  BSplineSurface() = default;
  // control is row-major: control[i * n + j], i along u, j along v.
  BSplineSurface(KnotVector knots_u, KnotVector knots_v, Points control);

  const KnotVector& knots_u() const { return ku_; }
  const KnotVector& knots_v() const { return kv_; }
  int rows() const { return ku_.control_count(); }
  int cols() const { return kv_.control_count(); }
  const Points& control() const { return control_; }
  Points& mutable_control() { return control_; }

  SurfaceSupport support(double u, double v) const;
  Vec3 evaluate(double u, double v) const;
  // Point and the two parametric partial derivatives.
  void evaluate_derivs(double u, double v, Vec3& p, Vec3& du, Vec3& dv) const;

  bool operator==(const BSplineSurface&) const = default;

 private:
  void check_param(double u, double v) const;

  KnotVector ku_;
  KnotVector kv_;
  Points control_;
};

Vec3 evaluate(const BSplineSurface& s, double u, double v);

// d evaluate / d control_{ij} = weight(i, j) * I_3.
MatX basis_weight(const BSplineSurface& s, double u, double v);

// Canonical cubic, uniform clamped knots for an m x n grid.
BSplineSurface make_surface(int m, int n, Points control, int degree = 3);

// Evaluates the surface on the rows x cols regular (u, v) grid spanning [0,1]^2.
Points evaluate_grid(const BSplineSurface& s, int rows, int cols);
std::vector<Vec2> regular_grid(int rows, int cols);

nlohmann::json to_json(const BSplineSurface& s);
BSplineSurface surface_from_json(const nlohmann::json& j);

}  // namespace surfkin::bspline
