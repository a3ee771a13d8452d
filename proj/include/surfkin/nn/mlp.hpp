#pragma once

#include <cstdint>

#include <nlohmann/json_fwd.hpp>

#include "surfkin/common.hpp"

namespace surfkin::nn {

enum class Activation { Relu, Identity };

// Fully connected network. Hidden layers use `hidden`, the output layer is
// always linear. weights[l] is dims[l+1] x dims[l].
struct MlpParams {
  std::vector<int> dims;
  std::vector<MatX> weights;
  std::vector<VecX> biases;
  Activation hidden = Activation::Relu;

  int layers() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return dims.front(); }
  int output_dim() const { return dims.back(); }
  Eigen::Index parameter_count() const;

  void validate() const;

  // Flat view in layer order (weights column-major, then biases); used by the
  // optimizer and by gradient audits.
  VecX pack() const;
  void unpack(const VecX& flat);

  // Zero-valued parameters with this network's shapes.
  MlpParams zeros_like() const;
};

// He-style uniform init U(-sqrt(6/fan_in), sqrt(6/fan_in)); zero biases.
MlpParams make_mlp(std::vector<int> dims, std::uint64_t seed, Activation hidden = Activation::Relu);

VecX forward(const MlpParams& m, const VecX& x);
// Columns of X are independent inputs.
MatX forward_batch(const MlpParams& m, const MatX& x);

// Reverse-mode gradient of <upstream, forward(x)> with respect to every
// parameter, returned with the same layout as the network.
MlpParams param_gradient(const MlpParams& m, const VecX& x, const VecX& upstream);

// Batched variant: gradient of sum_k <upstream.col(k), forward(x.col(k))>.
MlpParams param_gradient_batch(const MlpParams& m, const MatX& x, const MatX& upstream);

// d forward / dx (out_dim x in_dim). ReLU uses subgradient 0 at exact zeros.
MatX input_jacobian(const MlpParams& m, const VecX& x);

// upstream^T * input_jacobian(x), computed by one backward pass.
VecX input_vjp(const MlpParams& m, const VecX& x, const VecX& upstream);

// Hidden pre-activation signs; equal patterns mean the same linear region.
std::vector<std::vector<bool>> activation_pattern(const MlpParams& m, const VecX& x);

nlohmann::json to_json(const MlpParams& m);
MlpParams mlp_from_json(const nlohmann::json& j);

// Affine feature normalization y = (x - mean) / scale.
struct Normalizer {
  VecX mean;
  VecX scale;

  static Normalizer identity(int dim);
  // Per-feature mean and standard deviation; scales below `floor` are clamped.
  static Normalizer per_feature(const MatX& samples, double floor = 1e-12);
  // Per-feature mean, one shared scale: the RMS of the centered samples.
  static Normalizer shared_scale(const MatX& samples);
  // One scalar mean and one scalar scale for all features.
  static Normalizer scalar(const MatX& samples);

  VecX apply(const VecX& x) const { return (x - mean).cwiseQuotient(scale); }
  MatX apply_batch(const MatX& x) const;
  VecX invert(const VecX& y) const { return y.cwiseProduct(scale) + mean; }
};

nlohmann::json to_json(const Normalizer& n);
Normalizer normalizer_from_json(const nlohmann::json& j);

}  // namespace surfkin::nn
