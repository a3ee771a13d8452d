#include "surfkin/ik/pipeline.hpp"

namespace surfkin::ik {

std::vector<Vec2> sample_params(int count) {
  if (count < 1) throw InputError("sample_count must be >= 1");
  std::vector<Vec2> uv;
  uv.reserve(static_cast<std::size_t>(count));
  for (const auto& h : oracle::halton(2, count, 0)) uv.emplace_back(h[0], h[1]);
  return uv;
}

PipelineState evaluate_pipeline(const Models& models, const oracle::Actuation& a,
                                const std::vector<Vec2>& params, bool parallel) {
  if (models.fk.target == fk::FkTarget::Vertices) throw InputError("inverse kinematics needs a control-grid FK model");
  PipelineState st;
  st.a = a;
  st.controls = fk::predict_flat(models.fk, a);
  st.surface = bspline::make_surface(models.fk.m, models.fk.n, fk::unflatten_points(st.controls), models.fk.degree);
  st.rbf_input = models.s2r.input(st.controls);
  st.warp = sim2real::predict_warp(models.s2r, st.surface);
  for (const auto& uv : models.s2r.marker_uvs) st.marker_support.push_back(st.surface.support(uv.x(), uv.y()));

  st.params = params;
  const int count = static_cast<int>(params.size());
  st.sample_support.resize(params.size());
  st.sim_points.resize(params.size());
  st.points.resize(params.size());
#pragma omp parallel for schedule(static) if (parallel)
  for (int j = 0; j < count; ++j) {
    const auto& uv = params[static_cast<std::size_t>(j)];
    auto sup = st.surface.support(uv.x(), uv.y());
    Vec3 p = Vec3::Zero();
    for (std::size_t s = 0; s < sup.index.size(); ++s) p += sup.weight[s] * st.surface.control()[sup.index[s]];
    st.sim_points[static_cast<std::size_t>(j)] = p;
    st.points[static_cast<std::size_t>(j)] = rbf::warp(p, st.warp.kernels, st.warp.coeffs);
    st.sample_support[static_cast<std::size_t>(j)] = std::move(sup);
  }
  return st;
}

Points correspondences(const Points& points, const geometry::MeshQuery& target,
                       const geometry::RigidTransform& pose, bool parallel) {
  const auto inv = pose.inverse();
  const Points local = geometry::apply_transform(inv, points);
  const auto cps = parallel ? geometry::closest_points(target, local) : geometry::closest_points_serial(target, local);
  Points y(points.size());
  for (std::size_t j = 0; j < points.size(); ++j) y[j] = pose.apply(cps[j].point);
  return y;
}

double frozen_loss(const Points& points, const Points& targets) {
  if (points.size() != targets.size()) throw InputError("loss: point count mismatch");
  double d = 0.0;
  for (std::size_t j = 0; j < points.size(); ++j) d += (points[j] - targets[j]).squaredNorm();
  return d;
}

namespace {

// Contribution of one sample to the three adjoint accumulators.
struct SampleAdjoint {
  Vec3 dp = Vec3::Zero();  // dL/dB(u_j, v_j), spread over the sample support
  VecX dq;                 // dL/dq, 3N
  VecX dgamma;             // dL/dgamma, 3(N+4)
};

void sample_adjoint(const PipelineState& st, const Vec3& upstream, const Branches& br, SampleAdjoint& out,
                    std::size_t j) {
  const Vec3& p = st.sim_points[j];
  const auto& k = st.warp.kernels;
  const auto& g = st.warp.coeffs;
  const int n = k.size();
  out.dq.setZero(3L * n);
  out.dgamma.setZero(rbf::WarpCoefficients::flat_size(n));
  // dPhi/dp = A + sum_i beta_i (-2c w_i (p - q_i))^T, and the center block is
  // the negated radial term, so both share the kernel weights.
  Vec3 dp = br.query ? Vec3(g.A.transpose() * upstream) : Vec3::Zero();
  if (br.coeffs) {
    out.dgamma.head<3>() = upstream;
    for (int a = 0; a < 3; ++a) out.dgamma.segment<3>(3 + 3 * a) = p[a] * upstream;
  }
  for (int i = 0; i < n; ++i) {
    const Vec3 d = p - k.centers[static_cast<std::size_t>(i)];
    const double w = std::exp(-k.c * d.squaredNorm());
    const double bu = g.betas[static_cast<std::size_t>(i)].dot(upstream);
    const Vec3 radial = (2.0 * k.c * w * bu) * d;
    if (br.query) dp -= radial;
    if (br.centers) out.dq.segment<3>(3L * i) = radial;
    if (br.coeffs) out.dgamma.segment<3>(12 + 3L * i) = w * upstream;
  }
  out.dp = dp;
}

VecX finish_gradient(const Models& models, const PipelineState& st, VecX dcontrols, const VecX& dq,
                     const VecX& dgamma, const Branches& br) {
  if (br.centers) {
    for (std::size_t i = 0; i < st.marker_support.size(); ++i) {
      const auto& sup = st.marker_support[i];
      for (std::size_t s = 0; s < sup.index.size(); ++s) {
        dcontrols.segment<3>(3L * sup.index[s]) += sup.weight[s] * dq.segment<3>(3 * static_cast<Eigen::Index>(i));
      }
    }
  }
  if (br.coeffs) {
    const VecX dz = nn::input_vjp(models.s2r.net, st.rbf_input, dgamma.cwiseProduct(models.s2r.output_scale));
    dcontrols += dz.cwiseQuotient(models.s2r.input_norm.scale);
  }
  return fk::fk_vjp(models.fk, st.a, dcontrols);
}

void add_sample(const PipelineState& st, const SampleAdjoint& sa, std::size_t j, VecX& dcontrols, VecX& dq,
                VecX& dgamma) {
  const auto& sup = st.sample_support[j];
  for (std::size_t s = 0; s < sup.index.size(); ++s) dcontrols.segment<3>(3L * sup.index[s]) += sup.weight[s] * sa.dp;
  dq += sa.dq;
  dgamma += sa.dgamma;
}

void check_targets(const PipelineState& st, const Points& targets) {
  if (targets.size() != st.points.size()) throw InputError("gradient: target count mismatch");
}

}  // namespace

VecX frozen_gradient_serial(const Models& models, const PipelineState& st, const Points& targets,
                            const Branches& branches) {
  check_targets(st, targets);
  const int n = st.warp.kernels.size();
  VecX dcontrols = VecX::Zero(st.controls.size());
  VecX dq = VecX::Zero(3L * n);
  VecX dgamma = VecX::Zero(rbf::WarpCoefficients::flat_size(n));
  SampleAdjoint sa;
  for (std::size_t j = 0; j < st.points.size(); ++j) {
    sample_adjoint(st, 2.0 * (st.points[j] - targets[j]), branches, sa, j);
    add_sample(st, sa, j, dcontrols, dq, dgamma);
  }
  return finish_gradient(models, st, std::move(dcontrols), dq, dgamma, branches);
}

VecX frozen_gradient(const Models& models, const PipelineState& st, const Points& targets, const Branches& branches) {
  check_targets(st, targets);
  const int n = st.warp.kernels.size();
  const int count = static_cast<int>(st.points.size());
  std::vector<SampleAdjoint> per(st.points.size());
#pragma omp parallel for schedule(static)
  for (int j = 0; j < count; ++j) {
    const auto k = static_cast<std::size_t>(j);
    sample_adjoint(st, 2.0 * (st.points[k] - targets[k]), branches, per[k], k);
  }
  VecX dcontrols = VecX::Zero(st.controls.size());
  VecX dq = VecX::Zero(3L * n);
  VecX dgamma = VecX::Zero(rbf::WarpCoefficients::flat_size(n));
  for (std::size_t j = 0; j < per.size(); ++j) add_sample(st, per[j], j, dcontrols, dq, dgamma);
  return finish_gradient(models, st, std::move(dcontrols), dq, dgamma, branches);
}

JacobianCache jacobian_cache(const Models& models, const PipelineState& st) {
  JacobianCache c;
  c.fk_jacobian = fk::fk_jacobian(models.fk, st.a);
  const MatX jr = nn::input_jacobian(models.s2r.net, st.rbf_input);
  c.coeff_jacobian = models.s2r.output_scale.asDiagonal() * jr *
                     models.s2r.input_norm.scale.cwiseInverse().asDiagonal() * c.fk_jacobian;
  return c;
}

namespace {

// d B(u, v) / d a for a point with the given support: sum_s w_s dS_s/da.
MatX support_jacobian(const bspline::SurfaceSupport& sup, const MatX& fk_jacobian) {
  MatX j = MatX::Zero(3, fk_jacobian.cols());
  for (std::size_t s = 0; s < sup.index.size(); ++s) j += sup.weight[s] * fk_jacobian.middleRows(3L * sup.index[s], 3);
  return j;
}

}  // namespace

MatX point_jacobian(const PipelineState& st, const JacobianCache& cache, int sample, const Branches& br) {
  const auto j = static_cast<std::size_t>(sample);
  const Vec3& p = st.sim_points.at(j);
  MatX out = MatX::Zero(3, cache.fk_jacobian.cols());
  if (br.query) out += rbf::grad_query(p, st.warp.kernels, st.warp.coeffs) * support_jacobian(st.sample_support[j], cache.fk_jacobian);
  if (br.centers) {
    const MatX gc = rbf::grad_centers(p, st.warp.kernels, st.warp.coeffs);
    for (std::size_t i = 0; i < st.marker_support.size(); ++i) {
      out += gc.middleCols(3 * static_cast<Eigen::Index>(i), 3) * support_jacobian(st.marker_support[i], cache.fk_jacobian);
    }
  }
  if (br.coeffs) out += rbf::grad_coeffs(p, st.warp.kernels) * cache.coeff_jacobian;
  return out;
}

}  // namespace surfkin::ik
