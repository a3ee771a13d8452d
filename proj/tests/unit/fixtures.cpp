#include "fixtures.hpp"

namespace surfkin::test {

fk::DatasetOptions small_dataset_options() {
  fk::DatasetOptions o;
  o.m = 8;
  o.n = 8;
  o.include_corners = false;
  o.halton_count = 80;
  return o;
}

const SmallWorld& small_world() {
  static const SmallWorld world = [] {
    SmallWorld w;
    w.ds = fk::build_dataset(w.vm, small_dataset_options());
    fk::FkTrainOptions fo;
    fo.hidden = {32, 32};
    fo.train.max_epochs = 400;
    fo.train.learning_rate = 3e-3;
    w.fk = fk::train_fk(w.ds, fo).model;

    const auto uvs = oracle::canonical_marker_uvs();
    const oracle::RealityGap gap(oracle::default_gap());
    const auto acts = oracle::random_actuations(20, 7);
    for (std::size_t k = 0; k < acts.size(); ++k) {
      w.frames.push_back(oracle::capture_frame(w.vm, gap, acts[k], uvs, {}, k));
    }
    sim2real::S2rOptions so;
    so.train.max_epochs = 20;
    w.s2r = sim2real::train_rbf_net(sim2real::pair_with_fk(w.frames, w.fk), w.fk, uvs, so).model;
    return w;
  }();
  return world;
}

double rel_err(const MatX& a, const MatX& b, double floor) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return std::numeric_limits<double>::infinity();
  const double denom = std::max(b.cwiseAbs().maxCoeff(), floor);
  return (a - b).cwiseAbs().maxCoeff() / denom;
}

Points random_points(int count, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Points p(static_cast<std::size_t>(count));
  for (auto& x : p) x = Vec3(u(rng), u(rng), u(rng));
  return p;
}

}  // namespace surfkin::test
