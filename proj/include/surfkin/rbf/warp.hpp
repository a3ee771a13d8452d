#pragma once

#include <nlohmann/json_fwd.hpp>

#include "surfkin/common.hpp"

namespace surfkin::rbf {

// Default Gaussian width coefficient, in 1/mm^2.
inline constexpr double kDefaultWidth = 3.0e-5;

struct KernelSet {
  Points centers;
  double c = kDefaultWidth;

  int size() const { return static_cast<int>(centers.size()); }
  // Throws unless N >= 4 and c > 0.
  void validate() const;
};

// Phi(p) = alpha0 + A p + sum_i beta_i exp(-c |p - q_i|^2), A = [a1 a2 a3].
struct WarpCoefficients {
  Vec3 alpha0 = Vec3::Zero();
  Mat3 A = Mat3::Identity();
  Points betas;

  int size() const { return static_cast<int>(betas.size()); }

  static WarpCoefficients identity(int n);

  // Flattening order: alpha0, alpha1, alpha2, alpha3 (columns of A), beta_1..beta_N.
  VecX flatten() const;
  static WarpCoefficients unflatten(const VecX& gamma);
  static int flat_size(int n) { return 3 * (n + 4); }
};

double kernel(const Vec3& p, const Vec3& q, double c);

Vec3 warp(const Vec3& p, const KernelSet& k, const WarpCoefficients& g);

// dPhi/dp (3x3).
Mat3 grad_query(const Vec3& p, const KernelSet& k, const WarpCoefficients& g);

// dPhi/d{q_i} as a 3 x 3N block row; block i = beta_i (dg_i/dq_i)^T.
MatX grad_centers(const Vec3& p, const KernelSet& k, const WarpCoefficients& g);

// dPhi/dgamma as a 3 x 3(N+4) matrix in the flattening order.
MatX grad_coeffs(const Vec3& p, const KernelSet& k);

// Interpolating warp with Phi(q_i) = targets_i and the polynomial side
// conditions sum beta_i = 0, sum beta_i q_i^T = 0. Throws "degenerate kernel
// configuration" when the estimated condition number exceeds 1e12.
WarpCoefficients solve(const KernelSet& k, const Points& targets);

nlohmann::json to_json(const WarpCoefficients& g);
WarpCoefficients coefficients_from_json(const nlohmann::json& j);

}  // namespace surfkin::rbf
