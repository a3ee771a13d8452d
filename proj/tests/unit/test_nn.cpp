#include <doctest.h>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "surfkin/nn/train.hpp"

using namespace surfkin;
using namespace surfkin::nn;

namespace {

VecX random_vec(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  VecX v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

// Central differences of f over the entries of x; skips nothing, so callers
// pick inputs away from ReLU kinks.
template <typename F>
MatX fd_jacobian(F f, const VecX& x, double h) {
  const VecX y0 = f(x);
  MatX J(y0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    VecX p = x, m = x;
    p(j) += h;
    m(j) -= h;
    J.col(j) = (f(p) - f(m)) / (2 * h);
  }
  return J;
}

bool same_pattern_nearby(const MlpParams& m, const VecX& x, double h) {
  const auto base = activation_pattern(m, x);
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    for (double s : {-h, h}) {
      VecX y = x;
      y(j) += s;
      if (activation_pattern(m, y) != base) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("input Jacobian has the right shape and matches finite differences") {
  const auto m = make_mlp({5, 16, 12, 7}, 1);
  const double h = 1e-6;
  int checked = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const VecX x = random_vec(5, 100 + s);
    if (!same_pattern_nearby(m, x, h)) continue;
    const MatX J = input_jacobian(m, x);
    REQUIRE(J.rows() == 7);
    REQUIRE(J.cols() == 5);
    CHECK(test::rel_err(J, fd_jacobian([&](const VecX& v) { return forward(m, v); }, x, h)) < 1e-5);
    const VecX up = random_vec(7, 200 + s);
    CHECK(test::rel_err(input_vjp(m, x, up), (up.transpose() * J).transpose()) < 1e-12);
    ++checked;
  }
  CHECK(checked >= 10);
}

TEST_CASE("parameter gradient matches finite differences") {
  const auto m = make_mlp({4, 10, 9, 3}, 2);
  const VecX x = random_vec(4, 3);
  const VecX up = random_vec(3, 4);
  const double h = 1e-6;
  REQUIRE(same_pattern_nearby(m, x, 1e-3));
  const VecX analytic = param_gradient(m, x, up).pack();
  const VecX theta = m.pack();
  VecX fd(theta.size());
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    MlpParams p = m, q = m;
    VecX tp = theta, tq = theta;
    tp(j) += h;
    tq(j) -= h;
    p.unpack(tp);
    q.unpack(tq);
    fd(j) = (up.dot(forward(p, x)) - up.dot(forward(q, x))) / (2 * h);
  }
  CHECK(test::rel_err(analytic, fd) < 1e-5);
}

TEST_CASE("batched gradient equals the sum of single gradients") {
  const auto m = make_mlp({3, 8, 2}, 5);
  MatX X(3, 4), U(2, 4);
  for (int k = 0; k < 4; ++k) {
    X.col(k) = random_vec(3, 10 + k);
    U.col(k) = random_vec(2, 20 + k);
  }
  VecX sum = VecX::Zero(m.parameter_count());
  for (int k = 0; k < 4; ++k) sum += param_gradient(m, X.col(k), U.col(k)).pack();
  CHECK(test::rel_err(param_gradient_batch(m, X, U).pack(), sum) < 1e-12);
  const MatX Y = forward_batch(m, X);
  for (int k = 0; k < 4; ++k) CHECK((Y.col(k) - forward(m, X.col(k))).norm() < 1e-12);
}

TEST_CASE("pack, unpack and JSON keep every bit") {
  const auto m = make_mlp({6, 5, 4}, 7);
  auto copy = m.zeros_like();
  copy.unpack(m.pack());
  CHECK(copy.pack() == m.pack());
  CHECK(mlp_from_json(to_json(m)).pack() == m.pack());
  VecX wrong(3);
  CHECK_THROWS(copy.unpack(wrong));
}

TEST_CASE("normalizers invert") {
  MatX s(3, 50);
  for (int k = 0; k < 50; ++k) s.col(k) = random_vec(3, k) * 7.0 + VecX::Constant(3, 2.0);
  for (const auto& n : {Normalizer::per_feature(s), Normalizer::shared_scale(s), Normalizer::scalar(s)}) {
    const VecX x = random_vec(3, 99);
    CHECK((n.invert(n.apply(x)) - x).norm() < 1e-12);
    CHECK(normalizer_from_json(to_json(n)).scale == n.scale);
  }
  const auto pf = Normalizer::per_feature(s);
  CHECK(pf.apply_batch(s).rowwise().mean().norm() < 1e-12);
}

namespace {

TrainSet linear_task() {
  TrainSet set;
  set.inputs.resize(2, 64);
  for (int k = 0; k < 64; ++k) {
    set.inputs.col(k) = random_vec(2, 500 + k);
    const double target = 3.0 * set.inputs(0, k) - 2.0 * set.inputs(1, k) + 0.5;
    set.samples.push_back({k, [target](const VecX& y, VecX& g) {
                             g = VecX::Constant(1, 2.0 * (y(0) - target));
                             return (y(0) - target) * (y(0) - target);
                           }});
  }
  return set;
}

}  // namespace

TEST_CASE("training reduces the loss deterministically with one history row per epoch") {
  const auto set = linear_task();
  TrainConfig cfg;
  cfg.max_epochs = 60;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 8;
  const auto init = make_mlp({2, 16, 1}, 11);
  const double before = evaluate_loss(init, set);
  const auto a = train(init, set, cfg);
  const auto b = train(init, set, cfg);
  CHECK(a.history.size() == 60);
  CHECK(a.history.back().train_loss < 0.05 * before);
  CHECK(a.params.pack() == b.params.pack());
  cfg.seed = 1;
  CHECK(train(init, set, cfg).params.pack() != a.params.pack());
}

TEST_CASE("invalid training configuration is rejected") {
  TrainConfig cfg;
  cfg.batch_size = 0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.learning_rate = -1.0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("divergence is reported with the last finite parameters") {
  TrainSet set;
  set.inputs = MatX::Ones(1, 1);
  set.samples.push_back({0, [](const VecX& y, VecX& g) {
                           g = VecX::Constant(1, std::numeric_limits<double>::quiet_NaN());
                           return y(0) * std::numeric_limits<double>::quiet_NaN();
                         }});
  TrainConfig cfg;
  cfg.max_epochs = 3;
  CHECK_THROWS_AS(train(make_mlp({1, 2, 1}, 0), set, cfg), DivergenceError);
}
