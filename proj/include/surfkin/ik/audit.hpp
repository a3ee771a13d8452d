#pragma once

#include <cstdint>

#include <nlohmann/json_fwd.hpp>

#include "surfkin/ik/solver.hpp"

namespace surfkin::ik {

// A synthetic registration problem: the calibrated surface at `truth`,
// expressed in a target frame related to the robot frame by `pose`.
struct SyntheticTarget {
  oracle::Actuation truth{};
  geometry::RigidTransform pose;
  geometry::TriangleMesh mesh;  // in the target frame
};

// Target actuations are uniform in [lo, hi]^9. The pose rotates by at most
// `max_angle` and translates by at most `max_shift` mm along a random axis.
SyntheticTarget make_target(const Models& models, std::uint64_t seed, double lo = 0.0, double hi = 1.0,
                            double max_angle = 0.0, double max_shift = 0.0, int grid = 40);

struct GradCheckProbe {
  double rel_err = 0.0;
  double ablated_rel_err[3] = {0.0, 0.0, 0.0};  // query, centers, coeffs dropped
};

struct GradCheckReport {
  std::vector<GradCheckProbe> probes;
  int skipped = 0;  // probes that straddled a ReLU kink
  double tolerance = 0.0;
  double max_rel_err = 0.0;
  // Per dropped branch (query, centers, coeffs): median error over probes and
  // the fraction of probes on which the error exceeds the tolerance. A branch
  // can vanish locally, e.g. where every hidden unit of a layer is inactive.
  double ablated_median[3] = {0.0, 0.0, 0.0};
  double ablated_break_fraction[3] = {0.0, 0.0, 0.0};

  bool passed() const;
  // Every branch breaks the match on most probes.
  bool branches_necessary() const;
};

// Compares frozen_gradient against central differences of the frozen loss.
// Probes whose difference stencil changes any activation pattern are
// replaced by fresh ones.
GradCheckReport gradient_check(const Models& models, int probes, std::uint64_t seed, int sample_count = 300,
                               double step = 1e-5, double tolerance = 1e-4);

struct GradCostReport {
  int trials = 0;
  int fd_evaluations = 0;   // loss evaluations per finite-difference gradient
  double analytic_ms = 0.0; // mean per gradient
  double fd_ms = 0.0;
  double ratio = 0.0;       // fd_ms / analytic_ms
};

// Forward-difference gradient with correspondences recomputed per
// evaluation; `evaluations` receives the number of loss evaluations.
VecX fd_gradient(const Models& models, const geometry::MeshQuery& target, const geometry::RigidTransform& pose,
                 const oracle::Actuation& a, const std::vector<Vec2>& params, double step, int* evaluations);

GradCostReport gradient_cost_audit(const Models& models, int trials, std::uint64_t seed, int sample_count = 1200);

nlohmann::json to_json(const GradCheckReport& r);
nlohmann::json to_json(const GradCostReport& r);

}  // namespace surfkin::ik
