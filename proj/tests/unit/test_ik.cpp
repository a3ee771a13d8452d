#include <doctest.h>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "surfkin/ik/audit.hpp"

using namespace surfkin;
using namespace surfkin::ik;

namespace {

oracle::Actuation probe(std::uint64_t seed) {
  auto a = oracle::random_actuations(1, seed)[0];
  for (auto& x : a) x = 0.1 + 0.8 * x;
  return a;
}

Points perturbed(const Points& p, double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Points out = p;
  const auto noise = test::random_points(static_cast<int>(p.size()), rng, scale);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += noise[i];
  return out;
}

}  // namespace

TEST_CASE("pipeline evaluation is identical serial and parallel") {
  const auto& w = test::small_world();
  const auto params = sample_params(400);
  const auto a = evaluate_pipeline(w.models(), probe(1), params, true);
  const auto b = evaluate_pipeline(w.models(), probe(1), params, false);
  CHECK(a.points == b.points);
  CHECK(a.sim_points == b.sim_points);
}

TEST_CASE("parallel gradient reduction is bitwise equal to the serial reference") {
  const auto& w = test::small_world();
  const auto st = evaluate_pipeline(w.models(), probe(2), sample_params(500));
  const auto targets = perturbed(st.points, 2.0, 3);
  CHECK(frozen_gradient(w.models(), st, targets) == frozen_gradient_serial(w.models(), st, targets));
  const Branches some{true, false, true};
  CHECK(frozen_gradient(w.models(), st, targets, some) == frozen_gradient_serial(w.models(), st, targets, some));
}

TEST_CASE("reverse-mode gradient equals the forward three-branch chain rule") {
  const auto& w = test::small_world();
  const auto st = evaluate_pipeline(w.models(), probe(4), sample_params(60));
  const auto targets = perturbed(st.points, 1.0, 5);
  const auto cache = jacobian_cache(w.models(), st);
  for (const Branches br : {Branches{}, Branches{true, false, false}, Branches{false, true, false}, Branches{false, false, true}}) {
    VecX forward = VecX::Zero(9);
    for (int j = 0; j < static_cast<int>(st.points.size()); ++j) {
      const MatX J = point_jacobian(st, cache, j, br);
      REQUIRE(J.rows() == 3);
      REQUIRE(J.cols() == 9);
      forward += 2.0 * J.transpose() * (st.points[j] - targets[j]);
    }
    CHECK(test::rel_err(frozen_gradient(w.models(), st, targets, br), forward) < 1e-9);
  }
}

TEST_CASE("branch Jacobians add up to the full Jacobian") {
  const auto& w = test::small_world();
  const auto st = evaluate_pipeline(w.models(), probe(6), sample_params(10));
  const auto cache = jacobian_cache(w.models(), st);
  const MatX sum = point_jacobian(st, cache, 3, {true, false, false}) + point_jacobian(st, cache, 3, {false, true, false}) +
                   point_jacobian(st, cache, 3, {false, false, true});
  CHECK(test::rel_err(sum, point_jacobian(st, cache, 3)) < 1e-12);
}

TEST_CASE("frozen gradient matches central differences of the frozen loss") {
  const auto& w = test::small_world();
  const auto rep = gradient_check(w.models(), 8, 11, 150);
  CHECK(rep.probes.size() == 8);
  CHECK(rep.passed());
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("zero residual gives zero loss and zero gradient") {
  const auto& w = test::small_world();
  const auto st = evaluate_pipeline(w.models(), probe(7), sample_params(200));
  CHECK(frozen_loss(st.points, st.points) < 1e-10);
  CHECK(frozen_gradient(w.models(), st, st.points).norm() == 0.0);
}

TEST_CASE("moving the target and its pose together cancels") {
  const auto& w = test::small_world();
  const auto a = probe(8);
  const auto mesh = calibrated_mesh(w.models(), probe(9), 25, 25);
  const auto t = geometry::RigidTransform::from_axis_angle(Vec3(1, 2, -1).normalized(), 0.3, Vec3(30, -20, 10));
  const geometry::MeshQuery plain(mesh);
  const geometry::MeshQuery moved(geometry::TriangleMesh(geometry::apply_transform(t.inverse(), mesh.vertices()), mesh.triangles()));
  const auto params = sample_params(300);
  const double d0 = shape_loss(w.models(), plain, geometry::RigidTransform::identity(), a, params);
  const double d1 = shape_loss(w.models(), moved, t, a, params);
  CHECK(d1 == doctest::Approx(d0).epsilon(1e-9));
}

TEST_CASE("solve on a reachable target: monotone trace, tolerance honored") {
  const auto& w = test::small_world();
  const auto target = make_target(w.models(), 21, 0.1, 0.9, 0.1, 10.0, 30);
  const geometry::MeshQuery query(target.mesh);
  IkConfig cfg;
  cfg.sample_count = 400;
  const auto r = solve_ik(w.models(), query, oracle::uniform_actuation(0.5), cfg);
  REQUIRE(!r.trace.empty());
  CHECK(r.trace.front().event == "init");
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i].loss <= r.trace[i - 1].loss);
  CHECK(r.iterations <= cfg.max_iterations);
  CHECK(r.final_loss < r.trace.front().loss);
  if (r.converged && r.termination == Termination::Tolerance) {
    // The last round's relative decrease must be within tau.
    double before = r.trace.front().loss;
    for (const auto& row : r.trace)
      if (row.event == "pose" && row.round == r.rounds - 1) before = row.loss;
    CHECK(std::abs(before - r.final_loss) / r.final_loss <= cfg.tau);
  }
  CHECK(r.mean_error < 1.0);
}

TEST_CASE("starting at the answer returns almost immediately") {
  const auto& w = test::small_world();
  const auto target = make_target(w.models(), 22, 0.1, 0.9);
  const geometry::MeshQuery query(target.mesh);
  IkConfig cfg;
  cfg.sample_count = 300;
  const auto r = solve_ik(w.models(), query, target.truth, cfg);
  CHECK(r.converged);
  CHECK(r.trace.front().mean_error < 0.2);
  CHECK(r.iterations <= 5);
  CHECK(r.mean_error < 0.2);
  for (int k = 0; k < 9; ++k) CHECK(std::abs(r.a_opt[k] - target.truth[k]) < 0.05);
}

TEST_CASE("finite-difference gradient uses exactly ten evaluations") {
  const auto& w = test::small_world();
  const auto target = make_target(w.models(), 23);
  const geometry::MeshQuery query(target.mesh);
  int evals = 0;
  const auto params = sample_params(200);
  auto a = probe(10);
  a[4] = 1.0;  // upper bound: the step must go inward
  const VecX g = fd_gradient(w.models(), query, target.pose, a, params, 1e-6, &evals);
  CHECK(evals == 10);
  CHECK(g.allFinite());
}

TEST_CASE("IK configuration validation and round trip") {
  IkConfig c;
  c.tau = 0.0;
  CHECK_THROWS(c.validate());
  c = {};
  c.shrink = 1.5;
  CHECK_THROWS(c.validate());
  c = {};
  c.sample_count = 77;
  CHECK(to_json(ik_config_from_json(to_json(c))) == to_json(c));
  CHECK_THROWS(ik_config_from_json(nlohmann::json{{"max_iterations", 0}}));
}

TEST_CASE("trace CSV has one row per trace entry") {
  IkResult r;
  r.trace.push_back({0, 0, "init", 3.0, 0.1, 0.0});
  r.trace.push_back({1, 1, "step", 2.0, 0.09, 0.5});
  const auto csv = trace_csv(r);
  CHECK(csv.rfind("iteration,round,event,loss,mean_error,step\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  const auto j = to_json(r);
  CHECK(j.at("trace").size() == 2);
  CHECK(j.at("termination") == "iteration_limit");
}
