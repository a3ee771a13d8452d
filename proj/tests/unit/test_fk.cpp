#include <doctest.h>

#include <filesystem>
#include <set>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"

using namespace surfkin;
using namespace surfkin::fk;

TEST_CASE("dataset actuations: corners first, then Halton points") {
  DatasetOptions o;
  const auto acts = dataset_actuations(o);
  REQUIRE(acts.size() == 1000);
  CHECK(acts[0] == oracle::corner_actuations()[0]);
  CHECK(acts[511] == oracle::corner_actuations()[511]);
  CHECK(acts[512][0] == doctest::Approx(0.5));
}

TEST_CASE("split is a sorted disjoint cover with the requested share") {
  std::vector<int> train, test;
  split_indices(1000, 0.7, 3, train, test);
  CHECK(train.size() == 700);
  CHECK(test.size() == 300);
  CHECK(std::is_sorted(train.begin(), train.end()));
  CHECK(std::is_sorted(test.begin(), test.end()));
  std::set<int> all(train.begin(), train.end());
  all.insert(test.begin(), test.end());
  CHECK(all.size() == 1000);
  std::vector<int> train2, test2;
  split_indices(1000, 0.7, 4, train2, test2);
  CHECK(train2 != train);
}

TEST_CASE("parallel dataset build is bitwise equal to serial") {
  const oracle::VirtualMannequin vm(oracle::default_mannequin());
  auto o = test::small_dataset_options();
  o.halton_count = 24;
  const auto a = build_dataset(vm, o);
  const auto b = build_dataset_serial(vm, o);
  CHECK(a.controls == b.controls);
  CHECK(a.mean_grid == b.mean_grid);
  CHECK(a.fit_rms == b.fit_rms);
}

TEST_CASE("dataset directory round trip") {
  const auto& w = test::small_world();
  const auto dir = std::filesystem::temp_directory_path() / "surfkin_ds_test";
  std::filesystem::remove_all(dir);
  const auto manifest = write_dataset(w.ds, dir, {{"note", "test"}});
  CHECK(std::filesystem::exists(manifest));
  const auto back = read_dataset(dir);
  CHECK(back.controls == w.ds.controls);
  CHECK(back.actuations == w.ds.actuations);
  CHECK(back.train == w.ds.train);
  CHECK(back.test == w.ds.test);
  std::filesystem::remove_all(dir);
  CHECK_THROWS(read_dataset(dir));
}

TEST_CASE("FK Jacobian and VJP agree with finite differences") {
  const auto& w = test::small_world();
  const auto a = oracle::random_actuations(1, 12)[0];
  const MatX J = fk_jacobian(w.fk, a);
  REQUIRE(J.rows() == w.fk.output_dim());
  REQUIRE(J.cols() == 9);
  MatX fd(J.rows(), 9);
  const double h = 1e-6;
  for (int k = 0; k < 9; ++k) {
    auto p = a, m = a;
    p[k] += h;
    m[k] -= h;
    fd.col(k) = (predict_flat(w.fk, p) - predict_flat(w.fk, m)) / (2 * h);
  }
  CHECK(test::rel_err(J, fd) < 1e-5);
  const VecX up = VecX::LinSpaced(J.rows(), -1.0, 1.0);
  CHECK(test::rel_err(fk_vjp(w.fk, a, up), (up.transpose() * J).transpose()) < 1e-12);
}

TEST_CASE("trained FK beats the mean predictor and serializes exactly") {
  const auto& w = test::small_world();
  const auto test_acts = select(w.ds.actuations, w.ds.test);
  const auto m = evaluate_fk(w.fk, w.vm, test_acts);
  const auto base = evaluate_mean_predictor(w.ds, w.vm, test_acts);
  CHECK(m.mean < base.mean);
  CHECK(m.sample_mean.size() == test_acts.size());
  const auto back = fk_model_from_json(to_json(w.fk));
  CHECK(predict_flat(back, test_acts[0]) == predict_flat(w.fk, test_acts[0]));
}

TEST_CASE("FK training is deterministic and logs one row per epoch") {
  const auto& w = test::small_world();
  FkTrainOptions o;
  o.hidden = {8};
  o.train.max_epochs = 3;
  const auto a = train_fk(w.ds, o);
  const auto b = train_fk(w.ds, o);
  CHECK(a.history.size() == 3);
  CHECK(a.model.net.pack() == b.model.net.pack());
  o.target = FkTarget::Absolute;
  const auto abs = train_fk(w.ds, o);
  CHECK(abs.model.mean_grid.isZero());
  CHECK_THROWS(fk_target_from_string("pixels"));
  CHECK(fk_target_from_string(to_string(FkTarget::Vertices)) == FkTarget::Vertices);
}

TEST_CASE("vertex models cannot be wrapped as control grids") {
  const auto& w = test::small_world();
  FkTrainOptions o;
  o.hidden = {8};
  o.train.max_epochs = 1;
  o.target = FkTarget::Vertices;
  const auto v = train_vertex_fk(w.ds, w.vm, o);
  CHECK_THROWS(predict_controls(v.model, oracle::uniform_actuation(0.5)));
  CHECK(predict_points(v.model, oracle::uniform_actuation(0.5), {Vec2(0.5, 0.5)}).size() == 1);
}
