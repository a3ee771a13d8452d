#pragma once

#include <nlohmann/json_fwd.hpp>

#include "surfkin/fk/model.hpp"
#include "surfkin/oracle/capture.hpp"
#include "surfkin/rbf/warp.hpp"

namespace surfkin::sim2real {

// Shape-conditioned warp network N_rbf. The input is the control grid as a
// standardized offset from the FK mean grid; the output is the flattened
// warp coefficient vector gamma, expressed as
//   gamma = gamma_identity + output_scale .* net(x)
// so an untrained net already yields a near-identity warp.
struct S2rModel {
  nn::MlpParams net;
  VecX mean_grid;
  nn::Normalizer input_norm;
  VecX output_scale;
  std::vector<Vec2> marker_uvs;
  double c = rbf::kDefaultWidth;

  int markers() const { return static_cast<int>(marker_uvs.size()); }
  VecX input(const VecX& controls) const;
  rbf::WarpCoefficients coefficients(const VecX& controls) const;
  void validate() const;
};

// Per-entry gamma scales: offset block, linear block, kernel weights.
VecX gamma_scale(int markers, double offset_scale, double linear_scale, double beta_scale);

// Kernel centers (virtual markers) on the surface and the predicted gamma.
struct Warp {
  rbf::KernelSet kernels;
  rbf::WarpCoefficients coeffs;
};

Warp predict_warp(const S2rModel& model, const bspline::BSplineSurface& surface);

// p* = Phi(B(u, v, N_fk(a))).
Vec3 calibrated_point(const S2rModel& model, const fk::FkModel& fk, const oracle::Actuation& a, double u,
                      double v);
Points calibrated_points(const S2rModel& model, const fk::FkModel& fk, const oracle::Actuation& a,
                         const std::vector<Vec2>& params);

// A captured frame paired with the simulated control grid it is compared to.
struct TrainingFrame {
  oracle::MarkerFrame frame;
  bspline::BSplineSurface surface;
};

std::vector<TrainingFrame> pair_with_fk(const std::vector<oracle::MarkerFrame>& frames, const fk::FkModel& fk);

struct S2rOptions {
  nn::TrainConfig train;
  std::vector<int> hidden{24, 24};
  double c = rbf::kDefaultWidth;
  double offset_scale = 1.0;  // mm
  double linear_scale = 1e-2;
  double beta_scale = 1.0;    // mm
  // Weight of the per-frame kernel side-condition penalty; 0 disables it.
  double side_weight = 1.0;
  // Multiplier on the initial first-layer weights.
  double input_init_scale = 0.1;
};

struct S2rTrainResult {
  S2rModel model;
  std::vector<nn::EpochRecord> history;
  int frames_used = 0;
  int observations_used = 0;
  std::vector<std::string> warnings;
};

// Minimizes sum over frames j and observed markers i of
// |Phi_j(q_ij) - observed_ij|^2, where q_ij = B(u_i, v_i, S_j) are the
// kernel centers of frame j and gamma_j = net(S_j), plus a per-frame penalty
// on the kernel-weight side conditions. Frames without any observation are
// skipped with a warning.
S2rTrainResult train_rbf_net(const std::vector<TrainingFrame>& frames, const fk::FkModel& fk,
                             const std::vector<Vec2>& marker_uvs, const S2rOptions& opt);

// Marker-prediction baseline N_mk: virtual markers in, physical markers out,
// followed by an interpolating warp solved through the predicted markers.
struct MkBaselineModel {
  nn::MlpParams net;
  nn::Normalizer input_norm;   // on flattened virtual markers
  nn::Normalizer output_norm;  // on flattened (physical - virtual) offsets
  std::vector<Vec2> marker_uvs;
  double c = rbf::kDefaultWidth;

  int markers() const { return static_cast<int>(marker_uvs.size()); }
  Points predict_markers(const Points& virtual_markers) const;
  void validate() const;
};

struct MkTrainResult {
  MkBaselineModel model;
  std::vector<nn::EpochRecord> history;
  int frames_used = 0;
};

struct MkOptions {
  nn::TrainConfig train;
  std::vector<int> hidden{24, 24};
  double c = rbf::kDefaultWidth;
};

// Trains on complete frames only. Throws "baseline requires complete frames".
MkTrainResult train_marker_baseline(const std::vector<TrainingFrame>& frames, const std::vector<Vec2>& marker_uvs,
                                    const MkOptions& opt);

Warp baseline_warp(const MkBaselineModel& model, const bspline::BSplineSurface& surface);
Points baseline_points(const MkBaselineModel& model, const fk::FkModel& fk, const oracle::Actuation& a,
                       const std::vector<Vec2>& params);

struct CalibrationRow {
  int actuation_id = 0;
  double mean_err_sim = 0.0;
  double max_err_sim = 0.0;
  double mean_err_fixed = 0.0;
  double max_err_fixed = 0.0;
};

struct CalibrationReport {
  std::vector<CalibrationRow> rows;
  double mean_sim = 0.0;    // averages of the per-row means
  double mean_fixed = 0.0;
  int improved = 0;         // rows with mean_err_fixed < mean_err_sim
};

// Errors of uncalibrated FK ("sim") and calibrated ("fixed") surfaces against
// the oracle's real surface on its probe grid.
CalibrationReport eval_calibration(const S2rModel& model, const fk::FkModel& fk, const oracle::VirtualMannequin& vm,
                                   const oracle::RealityGap& gap, const std::vector<oracle::Actuation>& probes);
CalibrationReport eval_calibration(const MkBaselineModel& model, const fk::FkModel& fk,
                                   const oracle::VirtualMannequin& vm, const oracle::RealityGap& gap,
                                   const std::vector<oracle::Actuation>& probes);

std::string to_csv(const CalibrationReport& r);

nlohmann::json to_json(const S2rModel& m);
S2rModel s2r_model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MkBaselineModel& m);
MkBaselineModel mk_model_from_json(const nlohmann::json& j);

}  // namespace surfkin::sim2real
