#include "surfkin/bspline/surface.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace surfkin::bspline {

KnotVector::KnotVector(int degree, std::vector<double> knots)
    : degree_(degree), knots_(std::move(knots)) {
  if (degree_ < 1) throw InputError("knot vector: degree must be >= 1");
  const int len = static_cast<int>(knots_.size());
  if (len < 2 * (degree_ + 1)) throw InputError("knot vector: too few knots");
  for (int i = 1; i < len; ++i) {
    if (!(knots_[i] >= knots_[i - 1])) throw InputError("knot vector: knots must be nondecreasing");
  }
  for (int i = 0; i <= degree_; ++i) {
    if (knots_[i] != knots_.front() || knots_[len - 1 - i] != knots_.back()) {
      throw InputError("knot vector: not clamped");
    }
  }
  if (!(knots_.back() > knots_.front())) throw InputError("knot vector: empty domain");
}

KnotVector KnotVector::clamped_uniform(int control_count, int degree) {
  if (control_count < degree + 1) throw InputError("knot vector: control count below degree + 1");
  const int spans = control_count - degree;
  std::vector<double> k;
  k.reserve(static_cast<std::size_t>(control_count + degree + 1));
  for (int i = 0; i <= degree; ++i) k.push_back(0.0);
  for (int i = 1; i < spans; ++i) k.push_back(static_cast<double>(i) / spans);
  for (int i = 0; i <= degree; ++i) k.push_back(1.0);
  return {degree, std::move(k)};
}

int KnotVector::find_span(double u) const {
  const int n = control_count() - 1;
  if (u >= knots_[n + 1]) return n;
  if (u <= knots_[degree_]) return degree_;
  // Last index s in [p, n] with knots[s] <= u.
  const auto it = std::upper_bound(knots_.begin() + degree_, knots_.begin() + n + 1, u);
  return static_cast<int>(it - knots_.begin()) - 1;
}

void KnotVector::nonzero_basis(int span, double u, double* out) const {
  // Piegl & Tiller A2.2.
  const int p = degree_;
  double left[16];
  double right[16];
  out[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = u - knots_[span + 1 - j];
    right[j] = knots_[span + j] - u;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = out[r] / (right[r + 1] + left[j - r]);
      out[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    out[j] = saved;
  }
}

void KnotVector::nonzero_basis_derivs(int span, double u, double* values, double* derivs) const {
  // First derivatives from the degree p-1 basis, as in The NURBS Book.
  const int p = degree_;
  nonzero_basis(span, u, values);
  double lower[16];
  // Degree p-1 basis on the same span, computed directly.
  {
    double left[16];
    double right[16];
    lower[0] = 1.0;
    for (int j = 1; j <= p - 1; ++j) {
      left[j] = u - knots_[span + 1 - j];
      right[j] = knots_[span + j] - u;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        const double temp = lower[r] / (right[r + 1] + left[j - r]);
        lower[r] = saved + right[r + 1] * temp;
        saved = left[j - r] * temp;
      }
      lower[j] = saved;
    }
  }
  // N'_{i,p} = p/(t_{i+p}-t_i) N_{i,p-1} - p/(t_{i+p+1}-t_{i+1}) N_{i+1,p-1},
  // with global i = span - p + k and lower[k'] = N_{span-p+1+k', p-1}.
  for (int k = 0; k <= p; ++k) {
    const int i = span - p + k;
    double d = 0.0;
    if (k >= 1) {
      const double den = knots_[i + p] - knots_[i];
      if (den > 0.0) d += p / den * lower[k - 1];
    }
    if (k <= p - 1) {
      const double den = knots_[i + p + 1] - knots_[i + 1];
      if (den > 0.0) d -= p / den * lower[k];
    }
    derivs[k] = d;
  }
}

std::vector<double> basis(double u, const KnotVector& kv) {
  if (!(u >= kv.front() && u <= kv.back())) throw InputError("parameter out of range");
  std::vector<double> out(static_cast<std::size_t>(kv.control_count()), 0.0);
  const int span = kv.find_span(u);
  double nz[16];
  kv.nonzero_basis(span, u, nz);
  for (int k = 0; k <= kv.degree(); ++k) out[span - kv.degree() + k] = nz[k];
  return out;
}

BSplineSurface::BSplineSurface(KnotVector knots_u, KnotVector knots_v, Points control)
    : ku_(std::move(knots_u)), kv_(std::move(knots_v)), control_(std::move(control)) {
  if (static_cast<int>(control_.size()) != rows() * cols()) {
    throw InputError("b-spline surface: control grid does not match knot vectors");
  }
  for (const auto& c : control_) {
    if (!c.allFinite()) throw InputError("b-spline surface: non-finite control point");
  }
}

void BSplineSurface::check_param(double u, double v) const {
  if (!(u >= ku_.front() && u <= ku_.back() && v >= kv_.front() && v <= kv_.back())) {
    throw InputError("parameter out of range");
  }
}

SurfaceSupport BSplineSurface::support(double u, double v) const {
  check_param(u, v);
  const int pu = ku_.degree();
  const int pv = kv_.degree();
  const int su = ku_.find_span(u);
  const int sv = kv_.find_span(v);
  double bu[16];
  double bv[16];
  ku_.nonzero_basis(su, u, bu);
  kv_.nonzero_basis(sv, v, bv);
  SurfaceSupport s;
  s.index.reserve(static_cast<std::size_t>((pu + 1) * (pv + 1)));
  s.weight.reserve(s.index.capacity());
  const int n = cols();
  for (int a = 0; a <= pu; ++a) {
    for (int b = 0; b <= pv; ++b) {
      s.index.push_back((su - pu + a) * n + (sv - pv + b));
      s.weight.push_back(bu[a] * bv[b]);
    }
  }
  return s;
}

Vec3 BSplineSurface::evaluate(double u, double v) const {
  const SurfaceSupport s = support(u, v);
  Vec3 p = Vec3::Zero();
  for (std::size_t k = 0; k < s.index.size(); ++k) p += s.weight[k] * control_[s.index[k]];
  return p;
}

void BSplineSurface::evaluate_derivs(double u, double v, Vec3& p, Vec3& du, Vec3& dv) const {
  check_param(u, v);
  const int pu = ku_.degree();
  const int pv = kv_.degree();
  const int su = ku_.find_span(u);
  const int sv = kv_.find_span(v);
  double bu[16], dbu[16], bv[16], dbv[16];
  ku_.nonzero_basis_derivs(su, u, bu, dbu);
  kv_.nonzero_basis_derivs(sv, v, bv, dbv);
  p.setZero();
  du.setZero();
  dv.setZero();
  const int n = cols();
  for (int a = 0; a <= pu; ++a) {
    for (int b = 0; b <= pv; ++b) {
      const Vec3& c = control_[(su - pu + a) * n + (sv - pv + b)];
      p += bu[a] * bv[b] * c;
      du += dbu[a] * bv[b] * c;
      dv += bu[a] * dbv[b] * c;
    }
  }
}

Vec3 evaluate(const BSplineSurface& s, double u, double v) { return s.evaluate(u, v); }

MatX basis_weight(const BSplineSurface& s, double u, double v) {
  const SurfaceSupport sup = s.support(u, v);
  MatX w = MatX::Zero(s.rows(), s.cols());
  for (std::size_t k = 0; k < sup.index.size(); ++k) {
    w(sup.index[k] / s.cols(), sup.index[k] % s.cols()) = sup.weight[k];
  }
  return w;
}

BSplineSurface make_surface(int m, int n, Points control, int degree) {
  return {KnotVector::clamped_uniform(m, degree), KnotVector::clamped_uniform(n, degree),
          std::move(control)};
}

std::vector<Vec2> regular_grid(int rows, int cols) {
  std::vector<Vec2> uv;
  uv.reserve(static_cast<std::size_t>(rows * cols));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      uv.emplace_back(rows > 1 ? static_cast<double>(r) / (rows - 1) : 0.5,
                      cols > 1 ? static_cast<double>(c) / (cols - 1) : 0.5);
    }
  }
  return uv;
}

Points evaluate_grid(const BSplineSurface& s, int rows, int cols) {
  const auto uv = regular_grid(rows, cols);
  Points out(uv.size());
  for (std::size_t k = 0; k < uv.size(); ++k) out[k] = s.evaluate(uv[k].x(), uv[k].y());
  return out;
}

nlohmann::json to_json(const BSplineSurface& s) {
  if (s.knots_u().degree() != s.knots_v().degree()) {
    throw InputError("surface json requires equal degrees in u and v");
  }
  nlohmann::json control = nlohmann::json::array();
  for (const auto& c : s.control()) control.push_back({c.x(), c.y(), c.z()});
  return {{"degree", s.knots_u().degree()},
          {"knots_u", s.knots_u().knots()},
          {"knots_v", s.knots_v().knots()},
          {"control", std::move(control)}};
}

BSplineSurface surface_from_json(const nlohmann::json& j) {
  try {
    const int degree = j.at("degree").get<int>();
    KnotVector ku(degree, j.at("knots_u").get<std::vector<double>>());
    KnotVector kv(degree, j.at("knots_v").get<std::vector<double>>());
    Points control;
    control.reserve(j.at("control").size());
    for (const auto& c : j.at("control")) {
      control.emplace_back(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
    }
    return {std::move(ku), std::move(kv), std::move(control)};
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("surface json: ") + e.what());
  }
}

}  // namespace surfkin::bspline
