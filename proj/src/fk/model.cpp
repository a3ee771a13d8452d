#include "surfkin/fk/model.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace surfkin::fk {

const char* to_string(FkTarget t) {
  switch (t) {
    case FkTarget::Delta: return "delta";
    case FkTarget::Absolute: return "absolute";
    case FkTarget::Vertices: return "vertices";
  }
  return "delta";
}

FkTarget fk_target_from_string(const std::string& s) {
  if (s == "delta") return FkTarget::Delta;
  if (s == "absolute") return FkTarget::Absolute;
  if (s == "vertices") return FkTarget::Vertices;
  throw InputError("unknown fk target '" + s + "'");
}

void FkModel::validate() const {
  net.validate();
  if (net.input_dim() != oracle::kChambers) throw InputError("fk model: input dim must be 9");
  if (net.output_dim() != output_dim()) throw InputError("fk model: output dim must be 3*m*n");
  if (mean_grid.size() != output_dim() || output_norm.mean.size() != output_dim() ||
      output_norm.scale.size() != output_dim() || input_norm.mean.size() != oracle::kChambers ||
      input_norm.scale.size() != oracle::kChambers) {
    throw InputError("fk model: normalization size mismatch");
  }
}

std::vector<oracle::Actuation> select(const std::vector<oracle::Actuation>& all, const std::vector<int>& idx) {
  std::vector<oracle::Actuation> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(all.at(static_cast<std::size_t>(i)));
  return out;
}

namespace {

MatX actuation_matrix(const std::vector<oracle::Actuation>& acts) {
  MatX x(oracle::kChambers, static_cast<Eigen::Index>(acts.size()));
  for (std::size_t k = 0; k < acts.size(); ++k) x.col(static_cast<Eigen::Index>(k)) = oracle::to_vec(acts[k]);
  return x;
}

nn::TrainSet make_set(const MatX& inputs, const MatX& targets) {
  nn::TrainSet set;
  set.inputs = inputs;
  const double dim = static_cast<double>(targets.rows());
  for (Eigen::Index k = 0; k < targets.cols(); ++k) {
    VecX t = targets.col(k);
    set.samples.push_back({static_cast<int>(k), [t = std::move(t), dim](const VecX& out, VecX& grad) {
                             const VecX r = out - t;
                             grad = (2.0 / dim) * r;
                             return r.squaredNorm() / dim;
                           }});
  }
  return set;
}

// Shared training path: `targets` holds absolute outputs for every sample.
FkTrainResult train_on(const FkDataset& ds, const MatX& targets, const FkTrainOptions& opt) {
  ds.validate();
  if (ds.train.empty()) throw InputError("fk: empty training split");
  FkModel model;
  model.m = ds.m;
  model.n = ds.n;
  model.degree = ds.degree;
  model.target = opt.target;
  model.seed = opt.train.seed;

  const auto train_acts = select(ds.actuations, ds.train);
  const auto test_acts = select(ds.actuations, ds.test);
  MatX train_y(targets.rows(), static_cast<Eigen::Index>(ds.train.size()));
  for (std::size_t k = 0; k < ds.train.size(); ++k) train_y.col(static_cast<Eigen::Index>(k)) = targets.col(ds.train[k]);
  MatX test_y(targets.rows(), static_cast<Eigen::Index>(ds.test.size()));
  for (std::size_t k = 0; k < ds.test.size(); ++k) test_y.col(static_cast<Eigen::Index>(k)) = targets.col(ds.test[k]);

  const MatX train_x = actuation_matrix(train_acts);
  model.input_norm = nn::Normalizer::per_feature(train_x, 1e-6);
  if (opt.target == FkTarget::Absolute) {
    model.mean_grid = VecX::Zero(targets.rows());
    model.output_norm = nn::Normalizer::scalar(train_y);
  } else {
    model.mean_grid = train_y.rowwise().mean();
    model.output_norm = nn::Normalizer::shared_scale(train_y.colwise() - model.mean_grid);
  }

  const auto normalize_y = [&](const MatX& y) { return model.output_norm.apply_batch(y.colwise() - model.mean_grid); };
  const nn::TrainSet train_set = make_set(model.input_norm.apply_batch(train_x), normalize_y(train_y));
  const nn::TrainSet test_set =
      make_set(model.input_norm.apply_batch(actuation_matrix(test_acts)), normalize_y(test_y));

  std::vector<int> dims{oracle::kChambers};
  dims.insert(dims.end(), opt.hidden.begin(), opt.hidden.end());
  dims.push_back(static_cast<int>(targets.rows()));
  auto trained = nn::train(nn::make_mlp(dims, opt.train.seed), train_set, opt.train,
                           test_set.samples.empty() ? nullptr : &test_set);
  model.net = std::move(trained.params);
  model.validate();
  return {std::move(model), std::move(trained.history)};
}

// Bilinear read-back of a regular m x n vertex grid.
Vec3 bilinear(const VecX& flat, int m, int n, double u, double v) {
  const double x = std::clamp(u, 0.0, 1.0) * (m - 1);
  const double y = std::clamp(v, 0.0, 1.0) * (n - 1);
  const int i = std::min(static_cast<int>(x), m - 2);
  const int j = std::min(static_cast<int>(y), n - 2);
  const double fx = x - i;
  const double fy = y - j;
  const auto at = [&](int r, int c) -> Vec3 { return flat.segment<3>(3L * (r * n + c)); };
  return (1 - fx) * (1 - fy) * at(i, j) + fx * (1 - fy) * at(i + 1, j) + (1 - fx) * fy * at(i, j + 1) +
         fx * fy * at(i + 1, j + 1);
}

}  // namespace

FkTrainResult train_fk(const FkDataset& ds, const FkTrainOptions& opt) {
  if (opt.target == FkTarget::Vertices) throw InputError("fk: use train_vertex_fk for vertex targets");
  return train_on(ds, ds.controls, opt);
}

FkTrainResult train_vertex_fk(const FkDataset& ds, const oracle::VirtualMannequin& vm,
                              const FkTrainOptions& opt) {
  const auto uv = bspline::regular_grid(ds.m, ds.n);
  MatX targets(3L * ds.m * ds.n, ds.size());
  for (int k = 0; k < ds.size(); ++k) {
    for (std::size_t p = 0; p < uv.size(); ++p) {
      targets.col(k).segment<3>(3 * static_cast<Eigen::Index>(p)) =
          vm.sim_point(ds.actuations[static_cast<std::size_t>(k)], uv[p].x(), uv[p].y());
    }
  }
  FkTrainOptions o = opt;
  o.target = FkTarget::Vertices;
  return train_on(ds, targets, o);
}

VecX predict_flat(const FkModel& model, const oracle::Actuation& a) {
  oracle::validate_actuation(a);
  const VecX out = nn::forward(model.net, model.input_norm.apply(oracle::to_vec(a)));
  return model.mean_grid + model.output_norm.invert(out);
}

bspline::BSplineSurface predict_controls(const FkModel& model, const oracle::Actuation& a) {
  if (model.target == FkTarget::Vertices) throw InputError("fk: vertex model has no control grid");
  return bspline::make_surface(model.m, model.n, unflatten_points(predict_flat(model, a)), model.degree);
}

MatX fk_jacobian(const FkModel& model, const oracle::Actuation& a) {
  oracle::validate_actuation(a);
  const MatX j = nn::input_jacobian(model.net, model.input_norm.apply(oracle::to_vec(a)));
  return model.output_norm.scale.asDiagonal() * j * model.input_norm.scale.cwiseInverse().asDiagonal();
}

VecX fk_vjp(const FkModel& model, const oracle::Actuation& a, const VecX& upstream) {
  oracle::validate_actuation(a);
  if (upstream.size() != model.output_dim()) throw InputError("fk: upstream dimension mismatch");
  const VecX g = nn::input_vjp(model.net, model.input_norm.apply(oracle::to_vec(a)),
                               upstream.cwiseProduct(model.output_norm.scale));
  return g.cwiseQuotient(model.input_norm.scale);
}

Points predict_points(const FkModel& model, const oracle::Actuation& a, const std::vector<Vec2>& params) {
  Points out;
  out.reserve(params.size());
  if (model.target == FkTarget::Vertices) {
    const VecX flat = predict_flat(model, a);
    for (const auto& uv : params) out.push_back(bilinear(flat, model.m, model.n, uv.x(), uv.y()));
  } else {
    const auto s = predict_controls(model, a);
    for (const auto& uv : params) out.push_back(s.evaluate(uv.x(), uv.y()));
  }
  return out;
}

SurfaceError correspondence_error(const Points& predicted, const Points& truth) {
  if (predicted.size() != truth.size() || truth.empty()) throw InputError("error metric: size mismatch");
  SurfaceError e;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const double d = (predicted[k] - truth[k]).norm();
    e.mean += d;
    e.max = std::max(e.max, d);
  }
  e.mean /= static_cast<double>(truth.size());
  return e;
}

namespace {

template <class Predict>
FkMetrics metrics(const oracle::VirtualMannequin& vm, const std::vector<oracle::Actuation>& acts,
                  Predict&& predict) {
  FkMetrics m;
  m.sample_mean.resize(acts.size());
  for (std::size_t k = 0; k < acts.size(); ++k) {
    const auto truth = vm.sim_surface(acts[k]);
    const auto e = correspondence_error(predict(acts[k], truth.params), truth.points);
    m.sample_mean[k] = e.mean;
    m.max = std::max(m.max, e.max);
    m.mean += e.mean;
  }
  if (!acts.empty()) m.mean /= static_cast<double>(acts.size());
  return m;
}

}  // namespace

FkMetrics evaluate_fk(const FkModel& model, const oracle::VirtualMannequin& vm,
                      const std::vector<oracle::Actuation>& actuations) {
  return metrics(vm, actuations, [&](const oracle::Actuation& a, const std::vector<Vec2>& uv) {
    return predict_points(model, a, uv);
  });
}

FkMetrics evaluate_mean_predictor(const FkDataset& ds, const oracle::VirtualMannequin& vm,
                                  const std::vector<oracle::Actuation>& actuations) {
  const auto mean = bspline::make_surface(ds.m, ds.n, unflatten_points(ds.mean_grid), ds.degree);
  return metrics(vm, actuations, [&](const oracle::Actuation&, const std::vector<Vec2>& uv) {
    Points p;
    for (const auto& q : uv) p.push_back(mean.evaluate(q.x(), q.y()));
    return p;
  });
}

nlohmann::json to_json(const FkModel& m) {
  return {{"kind", "fk"},
          {"target", to_string(m.target)},
          {"m", m.m},
          {"n", m.n},
          {"degree", m.degree},
          {"seed", m.seed},
          {"net", nn::to_json(m.net)},
          {"input_norm", nn::to_json(m.input_norm)},
          {"output_norm", nn::to_json(m.output_norm)},
          {"mean_grid", std::vector<double>(m.mean_grid.data(), m.mean_grid.data() + m.mean_grid.size())}};
}

FkModel fk_model_from_json(const nlohmann::json& j) {
  FkModel m;
  try {
    if (j.value("kind", std::string()) != "fk") throw InputError("fk checkpoint: wrong kind");
    m.target = fk_target_from_string(j.at("target").get<std::string>());
    m.m = j.at("m").get<int>();
    m.n = j.at("n").get<int>();
    m.degree = j.at("degree").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.net = nn::mlp_from_json(j.at("net"));
    m.input_norm = nn::normalizer_from_json(j.at("input_norm"));
    m.output_norm = nn::normalizer_from_json(j.at("output_norm"));
    const auto g = j.at("mean_grid").get<std::vector<double>>();
    m.mean_grid = Eigen::Map<const VecX>(g.data(), static_cast<Eigen::Index>(g.size()));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("fk checkpoint: ") + e.what());
  }
  m.validate();
  return m;
}

}  // namespace surfkin::fk
