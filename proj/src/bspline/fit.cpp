#include "surfkin/bspline/fit.hpp"

#include <cmath>

namespace surfkin::bspline {

SurfaceFitter::SurfaceFitter(std::vector<Vec2> params, int m, int n, int degree, double ridge)
    : params_(std::move(params)),
      m_(m),
      n_(n),
      ridge_(ridge),
      ku_(KnotVector::clamped_uniform(m, degree)),
      kv_(KnotVector::clamped_uniform(n, degree)) {
  if (ridge_ < 0.0) throw InputError("fit: ridge must be non-negative");
  if (static_cast<long>(params_.size()) < static_cast<long>(m) * n) {
    throw InputError("underdetermined fit");
  }
  // Every knot cell must hold at least one sample.
  const int cu = m - degree;
  const int cv = n - degree;
  std::vector<char> covered(static_cast<std::size_t>(cu * cv), 0);
  for (const auto& uv : params_) {
    if (!(uv.x() >= 0.0 && uv.x() <= 1.0 && uv.y() >= 0.0 && uv.y() <= 1.0)) {
      throw InputError("parameter out of range");
    }
    const int su = ku_.find_span(uv.x()) - degree;
    const int sv = kv_.find_span(uv.y()) - degree;
    covered[su * cv + sv] = 1;
  }
  for (char c : covered) {
    if (!c) throw InputError("underdetermined fit");
  }

  const BSplineSurface shape(ku_, kv_, Points(static_cast<std::size_t>(m * n), Vec3::Zero()));
  supports_.reserve(params_.size());
  MatX normal = MatX::Zero(m * n, m * n);
  for (const auto& uv : params_) {
    supports_.push_back(shape.support(uv.x(), uv.y()));
    const auto& s = supports_.back();
    for (std::size_t a = 0; a < s.index.size(); ++a) {
      for (std::size_t b = 0; b < s.index.size(); ++b) {
        normal(s.index[a], s.index[b]) += s.weight[a] * s.weight[b];
      }
    }
  }
  normal.diagonal().array() += ridge_;
  factor_.compute(normal);
  if (factor_.info() != Eigen::Success) throw InputError("underdetermined fit");
}

FitResult SurfaceFitter::fit(const Points& points) const {
  if (points.size() != params_.size()) throw InputError("fit: point count does not match params");
  MatX rhs = MatX::Zero(m_ * n_, 3);
  Vec3 mean = Vec3::Zero();
  for (std::size_t k = 0; k < points.size(); ++k) {
    mean += points[k];
    const auto& s = supports_[k];
    for (std::size_t a = 0; a < s.index.size(); ++a) {
      rhs.row(s.index[a]) += s.weight[a] * points[k].transpose();
    }
  }
  mean /= static_cast<double>(points.size());
  if (ridge_ > 0.0) rhs.rowwise() += ridge_ * mean.transpose();
  const MatX sol = factor_.solve(rhs);

  Points control(static_cast<std::size_t>(m_ * n_));
  for (int i = 0; i < m_ * n_; ++i) control[i] = sol.row(i).transpose();
  FitResult res{BSplineSurface(ku_, kv_, std::move(control)), 0.0, 0.0};

  double sum = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& s = supports_[k];
    Vec3 p = Vec3::Zero();
    for (std::size_t a = 0; a < s.index.size(); ++a) p += s.weight[a] * res.surface.control()[s.index[a]];
    const double e = (p - points[k]).norm();
    sum += e * e;
    res.max_residual = std::max(res.max_residual, e);
  }
  res.rms_residual = std::sqrt(sum / static_cast<double>(points.size()));
  return res;
}

FitResult fit(const geometry::SampledSurface& samples, int m, int n, int degree, double ridge) {
  samples.validate();
  return SurfaceFitter(samples.params, m, n, degree, ridge).fit(samples.points);
}

}  // namespace surfkin::bspline
