#include "surfkin/nn/mlp.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <random>

namespace surfkin::nn {

Eigen::Index MlpParams::parameter_count() const {
  Eigen::Index n = 0;
  for (int l = 0; l < layers(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

void MlpParams::validate() const {
  if (dims.size() < 2) throw InputError("mlp: need at least input and output dims");
  if (weights.size() != dims.size() - 1 || biases.size() != dims.size() - 1) {
    throw InputError("mlp: layer count does not match dims");
  }
  for (int l = 0; l < layers(); ++l) {
    if (weights[l].rows() != dims[l + 1] || weights[l].cols() != dims[l] || biases[l].size() != dims[l + 1]) {
      throw InputError("mlp: inconsistent layer dimensions");
    }
    if (!weights[l].allFinite() || !biases[l].allFinite()) throw InputError("mlp: non-finite parameter");
  }
}

VecX MlpParams::pack() const {
  VecX flat(parameter_count());
  Eigen::Index o = 0;
  for (int l = 0; l < layers(); ++l) {
    flat.segment(o, weights[l].size()) = Eigen::Map<const VecX>(weights[l].data(), weights[l].size());
    o += weights[l].size();
    flat.segment(o, biases[l].size()) = biases[l];
    o += biases[l].size();
  }
  return flat;
}

void MlpParams::unpack(const VecX& flat) {
  if (flat.size() != parameter_count()) throw InputError("mlp: packed size mismatch");
  Eigen::Index o = 0;
  for (int l = 0; l < layers(); ++l) {
    Eigen::Map<VecX>(weights[l].data(), weights[l].size()) = flat.segment(o, weights[l].size());
    o += weights[l].size();
    biases[l] = flat.segment(o, biases[l].size());
    o += biases[l].size();
  }
}

MlpParams MlpParams::zeros_like() const {
  MlpParams z;
  z.dims = dims;
  z.hidden = hidden;
  for (int l = 0; l < layers(); ++l) {
    z.weights.push_back(MatX::Zero(weights[l].rows(), weights[l].cols()));
    z.biases.push_back(VecX::Zero(biases[l].size()));
  }
  return z;
}

MlpParams make_mlp(std::vector<int> dims, std::uint64_t seed, Activation hidden) {
  MlpParams m;
  m.dims = std::move(dims);
  m.hidden = hidden;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < m.dims.size(); ++l) {
    const double bound = std::sqrt(6.0 / m.dims[l]);
    std::uniform_real_distribution<double> dist(-bound, bound);
    MatX w(m.dims[l + 1], m.dims[l]);
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = dist(rng);
    m.weights.push_back(std::move(w));
    m.biases.push_back(VecX::Zero(m.dims[l + 1]));
  }
  m.validate();
  return m;
}

namespace {

void check_input(const MlpParams& m, Eigen::Index rows) {
  if (rows != m.input_dim()) throw InputError("mlp: input dimension mismatch");
}

// Activations a_0 = x, a_{l+1} = act(W_l a_l + b_l); the last layer is linear.
std::vector<MatX> forward_all(const MlpParams& m, const MatX& x) {
  std::vector<MatX> acts;
  acts.reserve(static_cast<std::size_t>(m.layers() + 1));
  acts.push_back(x);
  for (int l = 0; l < m.layers(); ++l) {
    MatX z = m.weights[l] * acts.back();
    z.colwise() += m.biases[l];
    if (l + 1 < m.layers() && m.hidden == Activation::Relu) z = z.cwiseMax(0.0);
    acts.push_back(std::move(z));
  }
  return acts;
}

// Multiplies by the activation derivative at hidden layer output `a`.
void mask_relu(const MlpParams& m, const MatX& a, MatX& delta) {
  if (m.hidden != Activation::Relu) return;
  if (a.cols() == delta.cols()) {
    delta = (a.array() > 0.0).select(delta, 0.0);
    return;
  }
  // Single activation column against a multi-column Jacobian: mask rows.
  if (a.cols() != 1 || a.rows() != delta.rows()) throw Error("mlp: mask shape mismatch");
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    if (!(a(r, 0) > 0.0)) delta.row(r).setZero();
  }
}

}  // namespace

VecX forward(const MlpParams& m, const VecX& x) {
  check_input(m, x.size());
  return forward_all(m, x).back();
}

MatX forward_batch(const MlpParams& m, const MatX& x) {
  check_input(m, x.rows());
  return forward_all(m, x).back();
}

MlpParams param_gradient_batch(const MlpParams& m, const MatX& x, const MatX& upstream) {
  check_input(m, x.rows());
  if (upstream.rows() != m.output_dim() || upstream.cols() != x.cols()) {
    throw InputError("mlp: upstream dimension mismatch");
  }
  const auto acts = forward_all(m, x);
  MlpParams g = m.zeros_like();
  MatX delta = upstream;
  for (int l = m.layers() - 1; l >= 0; --l) {
    g.weights[l].noalias() = delta * acts[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      MatX next = m.weights[l].transpose() * delta;
      mask_relu(m, acts[l], next);
      delta = std::move(next);
    }
  }
  return g;
}

MlpParams param_gradient(const MlpParams& m, const VecX& x, const VecX& upstream) {
  return param_gradient_batch(m, x, upstream);
}

MatX input_jacobian(const MlpParams& m, const VecX& x) {
  check_input(m, x.size());
  const auto acts = forward_all(m, x);
  // Forward accumulation: J_{l+1} = D_l W_l J_l.
  MatX j = m.weights[0];
  for (int l = 1; l < m.layers(); ++l) {
    mask_relu(m, acts[l], j);
    j = m.weights[l] * j;
  }
  return j;
}

VecX input_vjp(const MlpParams& m, const VecX& x, const VecX& upstream) {
  check_input(m, x.size());
  if (upstream.size() != m.output_dim()) throw InputError("mlp: upstream dimension mismatch");
  const auto acts = forward_all(m, x);
  MatX delta = upstream;
  for (int l = m.layers() - 1; l >= 1; --l) {
    MatX next = m.weights[l].transpose() * delta;
    mask_relu(m, acts[l], next);
    delta = std::move(next);
  }
  return m.weights[0].transpose() * delta;
}

std::vector<std::vector<bool>> activation_pattern(const MlpParams& m, const VecX& x) {
  check_input(m, x.size());
  std::vector<std::vector<bool>> pat;
  VecX a = x;
  for (int l = 0; l + 1 < m.layers(); ++l) {
    VecX z = m.weights[l] * a + m.biases[l];
    std::vector<bool> row(static_cast<std::size_t>(z.size()));
    for (Eigen::Index i = 0; i < z.size(); ++i) row[i] = z[i] > 0.0;
    pat.push_back(std::move(row));
    a = m.hidden == Activation::Relu ? VecX(z.cwiseMax(0.0)) : z;
  }
  return pat;
}

nlohmann::json to_json(const MlpParams& m) {
  nlohmann::json weights = nlohmann::json::array();
  nlohmann::json biases = nlohmann::json::array();
  for (int l = 0; l < m.layers(); ++l) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(m.weights[l].size()));
    for (Eigen::Index r = 0; r < m.weights[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < m.weights[l].cols(); ++c) w.push_back(m.weights[l](r, c));
    }
    weights.push_back(std::move(w));
    biases.push_back(std::vector<double>(m.biases[l].data(), m.biases[l].data() + m.biases[l].size()));
  }
  return {{"layer_dims", m.dims},
          {"hidden_activation", m.hidden == Activation::Relu ? "relu" : "identity"},
          {"weights", std::move(weights)},
          {"biases", std::move(biases)}};
}

MlpParams mlp_from_json(const nlohmann::json& j) {
  try {
    MlpParams m;
    m.dims = j.at("layer_dims").get<std::vector<int>>();
    m.hidden = j.value("hidden_activation", std::string("relu")) == "identity" ? Activation::Identity
                                                                               : Activation::Relu;
    const auto& ws = j.at("weights");
    const auto& bs = j.at("biases");
    if (ws.size() + 1 != m.dims.size() || bs.size() + 1 != m.dims.size()) {
      throw InputError("mlp json: layer count does not match dims");
    }
    for (std::size_t l = 0; l + 1 < m.dims.size(); ++l) {
      const auto w = ws[l].get<std::vector<double>>();
      const auto b = bs[l].get<std::vector<double>>();
      if (static_cast<long>(w.size()) != static_cast<long>(m.dims[l + 1]) * m.dims[l] ||
          static_cast<int>(b.size()) != m.dims[l + 1]) {
        throw InputError("mlp json: layer size mismatch");
      }
      MatX wm(m.dims[l + 1], m.dims[l]);
      for (int r = 0; r < m.dims[l + 1]; ++r) {
        for (int c = 0; c < m.dims[l]; ++c) wm(r, c) = w[static_cast<std::size_t>(r) * m.dims[l] + c];
      }
      m.weights.push_back(std::move(wm));
      m.biases.push_back(Eigen::Map<const VecX>(b.data(), static_cast<Eigen::Index>(b.size())));
    }
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("mlp json: ") + e.what());
  }
}

Normalizer Normalizer::identity(int dim) { return {VecX::Zero(dim), VecX::Ones(dim)}; }

Normalizer Normalizer::per_feature(const MatX& samples, double floor) {
  Normalizer n;
  n.mean = samples.rowwise().mean();
  const MatX centered = samples.colwise() - n.mean;
  n.scale = (centered.array().square().rowwise().sum() / static_cast<double>(samples.cols())).sqrt();
  n.scale = n.scale.cwiseMax(floor);
  return n;
}

Normalizer Normalizer::shared_scale(const MatX& samples) {
  Normalizer n;
  n.mean = samples.rowwise().mean();
  const MatX centered = samples.colwise() - n.mean;
  double rms = std::sqrt(centered.squaredNorm() / static_cast<double>(centered.size()));
  if (!(rms > 0.0)) rms = 1.0;
  n.scale = VecX::Constant(samples.rows(), rms);
  return n;
}

Normalizer Normalizer::scalar(const MatX& samples) {
  const double mean = samples.mean();
  double rms = std::sqrt((samples.array() - mean).square().mean());
  if (!(rms > 0.0)) rms = 1.0;
  return {VecX::Constant(samples.rows(), mean), VecX::Constant(samples.rows(), rms)};
}

MatX Normalizer::apply_batch(const MatX& x) const {
  return (x.colwise() - mean).array().colwise() / scale.array();
}

nlohmann::json to_json(const Normalizer& n) {
  return {{"mean", std::vector<double>(n.mean.data(), n.mean.data() + n.mean.size())},
          {"scale", std::vector<double>(n.scale.data(), n.scale.data() + n.scale.size())}};
}

Normalizer normalizer_from_json(const nlohmann::json& j) {
  try {
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto scale = j.at("scale").get<std::vector<double>>();
    if (mean.size() != scale.size()) throw InputError("normalizer json: size mismatch");
    return {Eigen::Map<const VecX>(mean.data(), static_cast<Eigen::Index>(mean.size())),
            Eigen::Map<const VecX>(scale.data(), static_cast<Eigen::Index>(scale.size()))};
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("normalizer json: ") + e.what());
  }
}

}  // namespace surfkin::nn
