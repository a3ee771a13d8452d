#include "surfkin/rbf/warp.hpp"

#include <Eigen/LU>
#include <nlohmann/json.hpp>

#include <cmath>

namespace surfkin::rbf {

void KernelSet::validate() const {
  if (centers.size() < 4) throw InputError("kernel set needs at least 4 centers");
  if (!(c > 0.0)) throw InputError("kernel width must be positive");
}

WarpCoefficients WarpCoefficients::identity(int n) {
  WarpCoefficients g;
  g.betas.assign(static_cast<std::size_t>(n), Vec3::Zero());
  return g;
}

VecX WarpCoefficients::flatten() const {
  VecX out(flat_size(size()));
  out.segment<3>(0) = alpha0;
  for (int k = 0; k < 3; ++k) out.segment<3>(3 + 3 * k) = A.col(k);
  for (int i = 0; i < size(); ++i) out.segment<3>(12 + 3 * i) = betas[i];
  return out;
}

WarpCoefficients WarpCoefficients::unflatten(const VecX& gamma) {
  if (gamma.size() < 12 || gamma.size() % 3 != 0) {
    throw InputError("warp coefficients: bad flat length");
  }
  const int n = static_cast<int>(gamma.size() / 3) - 4;
  WarpCoefficients g;
  g.alpha0 = gamma.segment<3>(0);
  for (int k = 0; k < 3; ++k) g.A.col(k) = gamma.segment<3>(3 + 3 * k);
  g.betas.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g.betas[i] = gamma.segment<3>(12 + 3 * i);
  return g;
}

double kernel(const Vec3& p, const Vec3& q, double c) { return std::exp(-c * (p - q).squaredNorm()); }

Vec3 warp(const Vec3& p, const KernelSet& k, const WarpCoefficients& g) {
  Vec3 out = g.alpha0 + g.A * p;
  for (int i = 0; i < k.size(); ++i) out += g.betas[i] * kernel(p, k.centers[i], k.c);
  return out;
}

Mat3 grad_query(const Vec3& p, const KernelSet& k, const WarpCoefficients& g) {
  Mat3 j = g.A;
  for (int i = 0; i < k.size(); ++i) {
    const Vec3 d = p - k.centers[i];
    const Vec3 dg = -2.0 * k.c * std::exp(-k.c * d.squaredNorm()) * d;
    j += g.betas[i] * dg.transpose();
  }
  return j;
}

MatX grad_centers(const Vec3& p, const KernelSet& k, const WarpCoefficients& g) {
  MatX j(3, 3 * k.size());
  for (int i = 0; i < k.size(); ++i) {
    const Vec3 d = p - k.centers[i];
    // dg/dq_i is dg/dp with the sign flipped.
    const Vec3 dg = 2.0 * k.c * std::exp(-k.c * d.squaredNorm()) * d;
    j.block<3, 3>(0, 3 * i) = g.betas[i] * dg.transpose();
  }
  return j;
}

MatX grad_coeffs(const Vec3& p, const KernelSet& k) {
  MatX j = MatX::Zero(3, WarpCoefficients::flat_size(k.size()));
  const Mat3 eye = Mat3::Identity();
  j.block<3, 3>(0, 0) = eye;
  for (int a = 0; a < 3; ++a) j.block<3, 3>(0, 3 + 3 * a) = p[a] * eye;
  for (int i = 0; i < k.size(); ++i) j.block<3, 3>(0, 12 + 3 * i) = kernel(p, k.centers[i], k.c) * eye;
  return j;
}

WarpCoefficients solve(const KernelSet& k, const Points& targets) {
  k.validate();
  const int n = k.size();
  if (static_cast<int>(targets.size()) != n) throw InputError("rbf solve: target count mismatch");

  // The affine block is assembled in centered, scaled coordinates so it is
  // comparable in magnitude to the kernel block; kernel distances stay in mm.
  Vec3 mean = Vec3::Zero();
  for (const auto& q : k.centers) mean += q;
  mean /= n;
  double scale = 0.0;
  for (const auto& q : k.centers) scale = std::max(scale, (q - mean).norm());
  if (!(scale > 0.0)) throw Error("degenerate kernel configuration");

  MatX sys = MatX::Zero(n + 4, n + 4);
  MatX rhs = MatX::Zero(n + 4, 3);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) sys(i, j) = kernel(k.centers[i], k.centers[j], k.c);
    const Vec3 qs = (k.centers[i] - mean) / scale;
    sys(i, n) = 1.0;
    sys(n, i) = 1.0;
    for (int a = 0; a < 3; ++a) {
      sys(i, n + 1 + a) = qs[a];
      sys(n + 1 + a, i) = qs[a];
    }
    rhs.row(i) = targets[i].transpose();
  }
  Eigen::PartialPivLU<MatX> lu(sys);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-12)) throw Error("degenerate kernel configuration");
  const MatX x = lu.solve(rhs);

  WarpCoefficients g;
  g.betas.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g.betas[i] = x.row(i).transpose();
  // Scaled affine part: a0' + A' (p - mean) / scale.
  Mat3 a_scaled;
  for (int a = 0; a < 3; ++a) a_scaled.col(a) = x.row(n + 1 + a).transpose();
  g.A = a_scaled / scale;
  g.alpha0 = x.row(n).transpose() - g.A * mean;
  return g;
}

nlohmann::json to_json(const WarpCoefficients& g) {
  const VecX f = g.flatten();
  return std::vector<double>(f.data(), f.data() + f.size());
}

WarpCoefficients coefficients_from_json(const nlohmann::json& j) {
  try {
    const auto v = j.get<std::vector<double>>();
    return WarpCoefficients::unflatten(Eigen::Map<const VecX>(v.data(), static_cast<Eigen::Index>(v.size())));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("warp coefficients json: ") + e.what());
  }
}

}  // namespace surfkin::rbf
