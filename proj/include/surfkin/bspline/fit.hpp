#pragma once

#include <Eigen/Cholesky>

#include "surfkin/bspline/surface.hpp"

namespace surfkin::bspline {

struct FitResult {
  BSplineSurface surface;
  double rms_residual = 0.0;
  double max_residual = 0.0;
};

// Least-squares control-grid fit with a ridge pulling controls towards the
// mean sample position:
//   min sum_k |B(u_k, v_k) - p_k|^2 + ridge * sum_ij |c_ij - mean(p)|^2.
// The normal matrix depends only on the sample parameters, so it is factored
// once and reused for every point set sharing those parameters.
class SurfaceFitter {
 public:
  SurfaceFitter(std::vector<Vec2> params, int m, int n, int degree, double ridge);

  FitResult fit(const Points& points) const;

  int rows() const { return m_; }
  int cols() const { return n_; }
  const std::vector<Vec2>& params() const { return params_; }

 private:
  std::vector<Vec2> params_;
  int m_;
  int n_;
  double ridge_;
  KnotVector ku_;
  KnotVector kv_;
  std::vector<SurfaceSupport> supports_;
  Eigen::LLT<MatX> factor_;
};

// Throws "underdetermined fit" when samples < m*n or a knot cell is empty.
FitResult fit(const geometry::SampledSurface& samples, int m, int n, int degree, double ridge);

}  // namespace surfkin::bspline
