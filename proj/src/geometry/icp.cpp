#include "surfkin/geometry/icp.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>

namespace surfkin::geometry {

namespace {

void require_rank(const Points& pts) {
  if (pts.size() < 3) throw InputError("rank-deficient correspondence");
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Mat3 cov = Mat3::Zero();
  double scale = 0.0;
  for (const auto& p : pts) {
    const Vec3 d = p - mean;
    cov += d * d.transpose();
    scale = std::max(scale, d.squaredNorm());
  }
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  // Collinear sets have a single non-zero principal variance.
  if (!(es.eigenvalues()(1) > 1e-12 * std::max(scale, 1e-300) * static_cast<double>(pts.size()))) {
    throw InputError("rank-deficient correspondence");
  }
}

double rms_of(const Points& a, const Points& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]).squaredNorm();
  return std::sqrt(s / static_cast<double>(a.size()));
}

}  // namespace

RigidTransform fit_rigid(const Points& from, const Points& to) {
  if (from.size() != to.size()) throw InputError("fit_rigid: size mismatch");
  require_rank(from);
  const double n = static_cast<double>(from.size());
  Vec3 mf = Vec3::Zero();
  Vec3 mt = Vec3::Zero();
  for (std::size_t i = 0; i < from.size(); ++i) {
    mf += from[i];
    mt += to[i];
  }
  mf /= n;
  mt /= n;
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < from.size(); ++i) h += (from[i] - mf) * (to[i] - mt).transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  Mat3 r = svd.matrixV() * d * svd.matrixU().transpose();
  // Re-orthonormalize to absorb SVD round-off before the strict validity check.
  Eigen::JacobiSVD<Mat3> clean(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  r = clean.matrixU() * clean.matrixV().transpose();
  return {r, mt - r * mf};
}

IcpResult icp_register(const Points& source, const MeshQuery& target, const RigidTransform& init,
                       int max_iters, double tol) {
  require_rank(source);
  IcpResult res{init, {}, 0};
  Points corr(source.size());
  auto correspond = [&](const RigidTransform& t) {
    const RigidTransform inv = t.inverse();
    Points local(source.size());
    for (std::size_t i = 0; i < source.size(); ++i) local[i] = inv.apply(source[i]);
    const auto cps = closest_points(target, local);
    for (std::size_t i = 0; i < source.size(); ++i) corr[i] = cps[i].point;
    return rms_of(apply_transform(t, corr), source);
  };
  double rms = correspond(res.transform);
  res.rms.push_back(rms);
  for (int it = 0; it < max_iters; ++it) {
    const RigidTransform next = fit_rigid(corr, source);
    const Points saved = corr;
    const double next_rms = correspond(next);
    res.iterations = it + 1;
    if (next_rms > rms) {
      // Round-off can make the Kabsch step marginally worse at convergence.
      corr = saved;
      break;
    }
    res.transform = next;
    res.rms.push_back(next_rms);
    const double change = rms - next_rms;
    rms = next_rms;
    if (change < tol) break;
  }
  return res;
}

RigidTransform icp_register(const Points& source, const TriangleMesh& target,
                            const RigidTransform& init, int max_iters, double tol) {
  return icp_register(source, MeshQuery(target), init, max_iters, tol).transform;
}

}  // namespace surfkin::geometry
