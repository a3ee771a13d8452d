#pragma once

#include <nlohmann/json_fwd.hpp>

#include "surfkin/fk/dataset.hpp"
#include "surfkin/nn/train.hpp"

namespace surfkin::fk {

// What the network output represents.
//  Delta:    control grid offsets from the training mean grid (the default).
//  Absolute: raw control coordinates with a single scalar normalization.
//  Vertices: surface points on a regular m x n (u, v) grid, offsets from
//            their training mean; surfaces are read back by bilinear
//            interpolation. Only used for the representation ablation.
enum class FkTarget { Delta, Absolute, Vertices };

const char* to_string(FkTarget t);
FkTarget fk_target_from_string(const std::string& s);

struct FkModel {
  nn::MlpParams net;
  nn::Normalizer input_norm;
  nn::Normalizer output_norm;
  VecX mean_grid;  // zero for Absolute
  int m = 0;
  int n = 0;
  int degree = 3;
  FkTarget target = FkTarget::Delta;
  std::uint64_t seed = 0;

  Eigen::Index output_dim() const { return 3L * m * n; }
  void validate() const;
};

struct FkTrainOptions {
  nn::TrainConfig train;
  FkTarget target = FkTarget::Delta;
  std::vector<int> hidden{128, 128};
};

struct FkTrainResult {
  FkModel model;
  std::vector<nn::EpochRecord> history;  // validation column = test split loss
};

// Trains on the dataset's training split, MSE on normalized outputs.
FkTrainResult train_fk(const FkDataset& ds, const FkTrainOptions& opt);

// Vertex-grid variant for the representation ablation; targets are sampled
// from the oracle at the regular m x n parameter grid.
FkTrainResult train_vertex_fk(const FkDataset& ds, const oracle::VirtualMannequin& vm,
                              const FkTrainOptions& opt);

// Flat absolute output (controls or vertices), 3mn entries.
VecX predict_flat(const FkModel& model, const oracle::Actuation& a);

// The predicted control grid wrapped with canonical knots. Not valid for
// Vertices models.
bspline::BSplineSurface predict_controls(const FkModel& model, const oracle::Actuation& a);

// d predict_flat / d a, (3mn x 9).
MatX fk_jacobian(const FkModel& model, const oracle::Actuation& a);

// upstream^T * fk_jacobian, computed with one backward pass.
VecX fk_vjp(const FkModel& model, const oracle::Actuation& a, const VecX& upstream);

// Surface points of the prediction at arbitrary parameters.
Points predict_points(const FkModel& model, const oracle::Actuation& a, const std::vector<Vec2>& params);

struct SurfaceError {
  double mean = 0.0;
  double max = 0.0;
};

// Correspondence error |p(u_k, v_k) - truth_k| averaged over the samples.
SurfaceError correspondence_error(const Points& predicted, const Points& truth);

struct FkMetrics {
  double mean = 0.0;           // mean over samples of the per-sample mean error
  double max = 0.0;            // worst point error over all samples
  std::vector<double> sample_mean;
};

// Errors against the oracle's simulated surface on its probe grid.
FkMetrics evaluate_fk(const FkModel& model, const oracle::VirtualMannequin& vm,
                      const std::vector<oracle::Actuation>& actuations);

// Same metric for the "always predict the training mean" baseline.
FkMetrics evaluate_mean_predictor(const FkDataset& ds, const oracle::VirtualMannequin& vm,
                                  const std::vector<oracle::Actuation>& actuations);

std::vector<oracle::Actuation> select(const std::vector<oracle::Actuation>& all, const std::vector<int>& idx);

nlohmann::json to_json(const FkModel& m);
FkModel fk_model_from_json(const nlohmann::json& j);

}  // namespace surfkin::fk
