#include "surfkin/ik/audit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

namespace surfkin::ik {

namespace {

oracle::Actuation random_actuation(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  oracle::Actuation a{};
  for (auto& x : a) x = u(rng);
  return a;
}

double rel_err(const VecX& g, const VecX& ref) {
  return (g - ref).norm() / std::max(ref.norm(), std::numeric_limits<double>::min());
}

using Pattern = std::vector<std::vector<bool>>;

std::pair<Pattern, Pattern> patterns(const Models& models, const oracle::Actuation& a) {
  const VecX controls = fk::predict_flat(models.fk, a);
  return {nn::activation_pattern(models.fk.net, models.fk.input_norm.apply(oracle::to_vec(a))),
          nn::activation_pattern(models.s2r.net, models.s2r.input(controls))};
}

}  // namespace

SyntheticTarget make_target(const Models& models, std::uint64_t seed, double lo, double hi, double max_angle,
                            double max_shift, int grid) {
  std::mt19937_64 rng(seed);
  SyntheticTarget t;
  t.truth = random_actuation(rng, lo, hi);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u01;
  const Vec3 axis = Vec3(n01(rng), n01(rng), n01(rng)).normalized();
  const Vec3 dir = Vec3(n01(rng), n01(rng), n01(rng)).normalized();
  t.pose = geometry::RigidTransform::from_axis_angle(axis, max_angle * u01(rng), max_shift * u01(rng) * dir);
  const auto robot = calibrated_mesh(models, t.truth, grid, grid);
  t.mesh = geometry::TriangleMesh(geometry::apply_transform(t.pose.inverse(), robot.vertices()), robot.triangles());
  return t;
}

bool GradCheckReport::passed() const { return !probes.empty() && max_rel_err < tolerance; }

bool GradCheckReport::branches_necessary() const {
  return std::all_of(std::begin(ablated_break_fraction), std::end(ablated_break_fraction),
                     [](double f) { return f > 0.5; });
}

GradCheckReport gradient_check(const Models& models, int probes, std::uint64_t seed, int sample_count, double step,
                               double tolerance) {
  if (probes < 1) throw InputError("gradcheck: probes must be >= 1");
  if (!(step > 0.0)) throw InputError("gradcheck: step must be positive");
  const auto params = sample_params(sample_count);
  std::mt19937_64 rng(seed);
  GradCheckReport rep;
  rep.tolerance = tolerance;
  const Branches ablations[3] = {{false, true, true}, {true, false, true}, {true, true, false}};

  while (static_cast<int>(rep.probes.size()) < probes) {
    if (rep.skipped > 10 * probes) throw Error("gradcheck: too many probes straddle activation kinks");
    const auto target = make_target(models, rng(), 0.0, 1.0, 0.2, 20.0);
    const geometry::MeshQuery query(target.mesh);
    const auto a = random_actuation(rng, 0.05, 0.95);

    const auto st = evaluate_pipeline(models, a, params);
    const Points y = correspondences(st.points, query, target.pose);
    const auto base = patterns(models, a);

    VecX fd(static_cast<Eigen::Index>(a.size()));
    bool kink = false;
    for (std::size_t k = 0; k < a.size() && !kink; ++k) {
      auto ap = a;
      auto am = a;
      ap[k] += step;
      am[k] -= step;
      kink = patterns(models, ap) != base || patterns(models, am) != base;
      const double lp = frozen_loss(evaluate_pipeline(models, ap, params).points, y);
      const double lm = frozen_loss(evaluate_pipeline(models, am, params).points, y);
      fd[static_cast<Eigen::Index>(k)] = (lp - lm) / (2.0 * step);
    }
    if (kink) {
      ++rep.skipped;
      continue;
    }
    GradCheckProbe p;
    p.rel_err = rel_err(frozen_gradient(models, st, y), fd);
    for (int b = 0; b < 3; ++b) p.ablated_rel_err[b] = rel_err(frozen_gradient(models, st, y, ablations[b]), fd);
    rep.max_rel_err = std::max(rep.max_rel_err, p.rel_err);
    rep.probes.push_back(p);
  }
  for (int b = 0; b < 3; ++b) {
    std::vector<double> e;
    for (const auto& p : rep.probes) e.push_back(p.ablated_rel_err[b]);
    std::sort(e.begin(), e.end());
    rep.ablated_median[b] = e[e.size() / 2];
    const auto broken = std::count_if(e.begin(), e.end(), [&](double x) { return x > tolerance; });
    rep.ablated_break_fraction[b] = static_cast<double>(broken) / static_cast<double>(e.size());
  }
  return rep;
}

VecX fd_gradient(const Models& models, const geometry::MeshQuery& target, const geometry::RigidTransform& pose,
                 const oracle::Actuation& a, const std::vector<Vec2>& params, double step, int* evaluations) {
  int count = 0;
  const double base = shape_loss(models, target, pose, a, params);
  ++count;
  VecX g(static_cast<Eigen::Index>(a.size()));
  for (std::size_t k = 0; k < a.size(); ++k) {
    auto ak = a;
    // Step inward at the upper bound so the stencil stays in range.
    const double h = ak[k] + step <= 1.0 ? step : -step;
    ak[k] += h;
    g[static_cast<Eigen::Index>(k)] = (shape_loss(models, target, pose, ak, params) - base) / h;
    ++count;
  }
  if (evaluations) *evaluations = count;
  return g;
}

GradCostReport gradient_cost_audit(const Models& models, int trials, std::uint64_t seed, int sample_count) {
  if (trials < 1) throw InputError("gradcost: trials must be >= 1");
  using clock = std::chrono::steady_clock;
  const auto params = sample_params(sample_count);
  std::mt19937_64 rng(seed);
  GradCostReport rep;
  rep.trials = trials;
  double analytic = 0.0;
  double fd = 0.0;
  for (int t = 0; t < trials; ++t) {
    const auto target = make_target(models, rng());
    const geometry::MeshQuery query(target.mesh);
    const auto a = random_actuation(rng, 0.0, 1.0);

    const auto t0 = clock::now();
    const VecX ga = loss_gradient(models, query, target.pose, a, params);
    const auto t1 = clock::now();
    int evals = 0;
    const VecX gf = fd_gradient(models, query, target.pose, a, params, 1e-6, &evals);
    const auto t2 = clock::now();
    if (!ga.allFinite() || !gf.allFinite()) throw Error("gradcost: non-finite gradient");

    analytic += std::chrono::duration<double, std::milli>(t1 - t0).count();
    fd += std::chrono::duration<double, std::milli>(t2 - t1).count();
    rep.fd_evaluations = evals;
  }
  rep.analytic_ms = analytic / trials;
  rep.fd_ms = fd / trials;
  rep.ratio = rep.fd_ms / rep.analytic_ms;
  return rep;
}

nlohmann::json to_json(const GradCheckReport& r) {
  nlohmann::json probes = nlohmann::json::array();
  for (const auto& p : r.probes) {
    probes.push_back({{"rel_err", p.rel_err},
                      {"ablated_rel_err", {p.ablated_rel_err[0], p.ablated_rel_err[1], p.ablated_rel_err[2]}}});
  }
  return {{"probes", probes},
          {"skipped", r.skipped},
          {"tolerance", r.tolerance},
          {"max_rel_err", r.max_rel_err},
          {"passed", r.passed()},
          {"ablated_median",
           {{"query", r.ablated_median[0]}, {"centers", r.ablated_median[1]}, {"coeffs", r.ablated_median[2]}}},
          {"ablated_break_fraction",
           {{"query", r.ablated_break_fraction[0]},
            {"centers", r.ablated_break_fraction[1]},
            {"coeffs", r.ablated_break_fraction[2]}}},
          {"branches_necessary", r.branches_necessary()}};
}

nlohmann::json to_json(const GradCostReport& r) {
  return {{"trials", r.trials}, {"fd_evaluations", r.fd_evaluations}, {"analytic_ms", r.analytic_ms},
          {"fd_ms", r.fd_ms}, {"ratio", r.ratio}};
}

}  // namespace surfkin::ik
