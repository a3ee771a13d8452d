#pragma once

#include <functional>

#include "surfkin/nn/mlp.hpp"

namespace surfkin::nn {

// Returns the sample loss for a network output and writes dLoss/dOutput.
using LossFn = std::function<double(const VecX& output, VecX& grad)>;

struct TrainSample {
  int input = 0;  // column of TrainSet::inputs
  LossFn loss;
};

// Samples reference shared input columns so that many loss terms can use the
// same network input (e.g. every observed marker of one frame).
struct TrainSet {
  MatX inputs;
  std::vector<TrainSample> samples;

  std::size_t size() const { return samples.size(); }
};

struct TrainConfig {
  int batch_size = 32;
  double learning_rate = 1e-3;
  int max_epochs = 150;
  std::uint64_t seed = 0;
  double validation_fraction = 0.0;
  // Adam moments.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Cosine decay of the step size down to learning_rate * final_lr_fraction.
  double final_lr_fraction = 1.0;
  // Decoupled weight decay on weight matrices (not biases): every step
  // multiplies them by (1 - lr * weight_decay).
  double weight_decay = 0.0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;  // NaN when there is no validation split
};

struct TrainResult {
  MlpParams params;
  std::vector<EpochRecord> history;
};

class DivergenceError : public Error {
 public:
  DivergenceError(MlpParams last_finite, int epoch)
      : Error("divergence"), last_finite_(std::move(last_finite)), epoch_(epoch) {}
  const MlpParams& last_finite() const { return last_finite_; }
  int epoch() const { return epoch_; }

 private:
  MlpParams last_finite_;
  int epoch_;
};

// Mean loss of `params` over every sample of `data`.
double evaluate_loss(const MlpParams& params, const TrainSet& data);

// Mini-batch Adam minimizing the mean sample loss. Deterministic given the
// seed: shuffling uses a seeded mt19937_64 and all reductions run in sample
// order. When `validation` is null, `validation_fraction` of the samples is
// held out. Loss history records the full-set losses after every epoch.
TrainResult train(MlpParams init, const TrainSet& data, const TrainConfig& cfg,
                  const TrainSet* validation = nullptr);

}  // namespace surfkin::nn
