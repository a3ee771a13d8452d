#pragma once

#include "surfkin/geometry/closest_point.hpp"
#include "surfkin/sim2real/model.hpp"

namespace surfkin::ik {

// The two trained networks that define the calibrated shape S*(a).
struct Models {
  const fk::FkModel& fk;
  const sim2real::S2rModel& s2r;
};

// Stratified low-discrepancy (u, v) samples: the first `count` points of the
// 2-D Halton sequence.
std::vector<Vec2> sample_params(int count);

// Everything the loss and its gradient need at one actuation.
struct PipelineState {
  oracle::Actuation a{};
  VecX controls;                               // flat 3mn control grid, N_fk(a)
  bspline::BSplineSurface surface;
  VecX rbf_input;                              // standardized N_rbf input
  sim2real::Warp warp;                         // kernels at the virtual markers, gamma
  std::vector<Vec2> params;
  std::vector<bspline::SurfaceSupport> sample_support;
  std::vector<bspline::SurfaceSupport> marker_support;
  Points sim_points;                           // B(u_j, v_j)
  Points points;                               // p*_j = Phi(B(u_j, v_j))
};

// Per-sample work runs under OpenMP when `parallel` is set; every sample
// writes its own slot, so both paths give identical results.
PipelineState evaluate_pipeline(const Models& models, const oracle::Actuation& a,
                                 const std::vector<Vec2>& params, bool parallel = true);

// Which chain-rule branches contribute to dp*/da. All three are required for
// the true gradient; the flags exist for the branch-ablation audit.
struct Branches {
  bool query = true;    // dPhi/dp * dB/dS * dN_fk/da
  bool centers = true;  // dPhi/dq_i * dB(marker_i)/dS * dN_fk/da
  bool coeffs = true;   // dPhi/dgamma * dN_rbf/dS * dN_fk/da
};

// y_j = T(c_j) where c_j is the closest point of T^{-1}(p_j) on the target:
// the closest point of p_j on the posed target T(target).
Points correspondences(const Points& points, const geometry::MeshQuery& target,
                       const geometry::RigidTransform& pose, bool parallel = true);

// D = sum_j |p_j - y_j|^2.
double frozen_loss(const Points& points, const Points& targets);

// Gradient of D at the state's actuation with the targets held fixed,
// assembled in reverse mode: per-sample vector-Jacobian products reduced in
// sample order, then one backward pass through each network.
VecX frozen_gradient(const Models& models, const PipelineState& st, const Points& targets,
                     const Branches& branches = {});
VecX frozen_gradient_serial(const Models& models, const PipelineState& st, const Points& targets,
                            const Branches& branches = {});

// Full forward-mode Jacobians dp*_j/da (3 x 9 each), built literally from the
// three branches. Costly; meant for audits and tests.
struct JacobianCache {
  MatX fk_jacobian;   // 3mn x 9
  MatX coeff_jacobian;  // d gamma / d a, 3(N+4) x 9
};
JacobianCache jacobian_cache(const Models& models, const PipelineState& st);
MatX point_jacobian(const PipelineState& st, const JacobianCache& cache, int sample, const Branches& branches = {});

}  // namespace surfkin::ik
