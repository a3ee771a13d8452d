#include "surfkin/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

namespace surfkin::nn {

void TrainConfig::validate() const {
  if (batch_size < 1) throw InputError("train config: batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw InputError("train config: learning_rate must be >= 0");
  if (max_epochs < 0) throw InputError("train config: max_epochs must be >= 0");
  if (!(weight_decay >= 0.0)) throw InputError("train config: weight_decay must be >= 0");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw InputError("train config: validation_fraction must be in [0, 1)");
  }
}

namespace {

// Loss and output-gradient matrix for a subset of samples, with each distinct
// input forwarded once. Returns the summed loss.
struct BatchEval {
  std::vector<int> columns;  // distinct input columns, first-seen order
  MatX x;
  MatX upstream;
  double loss = 0.0;
};

BatchEval evaluate_batch(const MlpParams& params, const TrainSet& data,
                         const std::vector<int>& idx, std::size_t begin, std::size_t end,
                         bool need_grad) {
  BatchEval be;
  std::map<int, int> slot;
  for (std::size_t k = begin; k < end; ++k) {
    const int in = data.samples[idx[k]].input;
    if (slot.emplace(in, static_cast<int>(be.columns.size())).second) be.columns.push_back(in);
  }
  be.x.resize(data.inputs.rows(), static_cast<Eigen::Index>(be.columns.size()));
  for (std::size_t c = 0; c < be.columns.size(); ++c) be.x.col(c) = data.inputs.col(be.columns[c]);
  const MatX out = forward_batch(params, be.x);
  if (need_grad) be.upstream = MatX::Zero(out.rows(), out.cols());
  VecX grad(out.rows());
  for (std::size_t k = begin; k < end; ++k) {
    const auto& s = data.samples[idx[k]];
    const int c = slot.at(s.input);
    grad.setZero();
    be.loss += s.loss(out.col(c), grad);
    if (need_grad) be.upstream.col(c) += grad;
  }
  return be;
}

}  // namespace

double evaluate_loss(const MlpParams& params, const TrainSet& data) {
  if (data.samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<int> idx(data.samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  double total = 0.0;
  constexpr std::size_t kChunk = 256;
  for (std::size_t b = 0; b < idx.size(); b += kChunk) {
    total += evaluate_batch(params, data, idx, b, std::min(idx.size(), b + kChunk), false).loss;
  }
  return total / static_cast<double>(data.samples.size());
}

TrainResult train(MlpParams init, const TrainSet& data, const TrainConfig& cfg,
                  const TrainSet* validation) {
  cfg.validate();
  init.validate();
  if (data.samples.empty()) throw InputError("train: empty dataset");
  if (data.inputs.rows() != init.input_dim()) throw InputError("train: input dimension mismatch");

  std::mt19937_64 rng(cfg.seed);
  std::vector<int> order(data.samples.size());
  std::iota(order.begin(), order.end(), 0);

  TrainSet held_out;
  std::vector<int> train_idx = order;
  if (validation == nullptr && cfg.validation_fraction > 0.0) {
    std::shuffle(order.begin(), order.end(), rng);
    const auto nval = static_cast<std::size_t>(std::floor(cfg.validation_fraction * order.size()));
    held_out.inputs = data.inputs;
    for (std::size_t k = 0; k < nval; ++k) held_out.samples.push_back(data.samples[order[k]]);
    train_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(nval), order.end());
    std::sort(train_idx.begin(), train_idx.end());
    if (train_idx.empty()) throw InputError("train: validation split leaves no training samples");
    validation = &held_out;
  }
  TrainSet train_set;
  train_set.inputs = data.inputs;
  for (int i : train_idx) train_set.samples.push_back(data.samples[i]);

  TrainResult res{std::move(init), {}};
  MlpParams& params = res.params;
  VecX theta = params.pack();
  // 1 for weight-matrix entries, 0 for biases, in pack() order.
  VecX decay_mask = VecX::Zero(theta.size());
  {
    Eigen::Index o = 0;
    for (int l = 0; l < params.layers(); ++l) {
      decay_mask.segment(o, params.weights[l].size()).setOnes();
      o += params.weights[l].size() + params.biases[l].size();
    }
  }
  VecX m1 = VecX::Zero(theta.size());
  VecX m2 = VecX::Zero(theta.size());
  long step = 0;

  std::vector<int> perm(train_set.samples.size());
  std::iota(perm.begin(), perm.end(), 0);
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  const long steps_per_epoch = static_cast<long>((perm.size() + bs - 1) / bs);
  const long total_steps = std::max(1L, steps_per_epoch * cfg.max_epochs);

  MlpParams last_finite = params;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t b = 0; b < perm.size(); b += bs) {
      const std::size_t e = std::min(perm.size(), b + bs);
      BatchEval be = evaluate_batch(params, train_set, perm, b, e, true);
      if (!std::isfinite(be.loss)) throw DivergenceError(last_finite, epoch);
      be.upstream /= static_cast<double>(e - b);
      const VecX g = param_gradient_batch(params, be.x, be.upstream).pack();

      ++step;
      const double progress = static_cast<double>(step - 1) / static_cast<double>(total_steps);
      const double lr = cfg.learning_rate *
                        (cfg.final_lr_fraction + (1.0 - cfg.final_lr_fraction) * 0.5 *
                                                     (1.0 + std::cos(M_PI * progress)));
      m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * g;
      m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * g.cwiseProduct(g);
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      if (cfg.weight_decay > 0.0) theta.array() *= 1.0 - lr * cfg.weight_decay * decay_mask.array();
      theta.array() -= lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + cfg.epsilon);
      params.unpack(theta);
    }
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = evaluate_loss(params, train_set);
    rec.validation_loss = validation != nullptr ? evaluate_loss(params, *validation)
                                                : std::numeric_limits<double>::quiet_NaN();
    if (!std::isfinite(rec.train_loss)) throw DivergenceError(last_finite, epoch + 1);
    last_finite = params;
    res.history.push_back(rec);
  }
  return res;
}

}  // namespace surfkin::nn
