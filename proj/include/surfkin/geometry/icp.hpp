#pragma once

#include "surfkin/geometry/closest_point.hpp"

namespace surfkin::geometry {

// Least-squares rigid map taking `from[i]` onto `to[i]` (SVD / Kabsch).
// Throws "rank-deficient correspondence" for fewer than 3 non-collinear points.
RigidTransform fit_rigid(const Points& from, const Points& to);

struct IcpResult {
  RigidTransform transform;     // applied to the target mesh
  std::vector<double> rms;      // correspondence RMS per iteration, starting at init
  int iterations = 0;
};

// Point-to-point ICP. The transform moves the TARGET onto the source:
// it minimizes sum_j |T(c_j) - p_j|^2 with c_j the closest point of
// T^{-1}(p_j) on the target. Stops when the RMS change drops below `tol`
// or after `max_iters` iterations.
IcpResult icp_register(const Points& source, const MeshQuery& target, const RigidTransform& init,
                       int max_iters, double tol);

RigidTransform icp_register(const Points& source, const TriangleMesh& target,
                            const RigidTransform& init, int max_iters, double tol);

}  // namespace surfkin::geometry
