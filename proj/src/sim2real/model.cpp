#include "surfkin/sim2real/model.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>

namespace surfkin::sim2real {

using fk::flatten_points;
using fk::unflatten_points;

VecX S2rModel::input(const VecX& controls) const {
  if (controls.size() != mean_grid.size()) throw InputError("s2r: control grid dimension mismatch");
  return input_norm.apply(controls - mean_grid);
}

rbf::WarpCoefficients S2rModel::coefficients(const VecX& controls) const {
  const VecX out = nn::forward(net, input(controls));
  VecX gamma = rbf::WarpCoefficients::identity(markers()).flatten();
  gamma += out.cwiseProduct(output_scale);
  return rbf::WarpCoefficients::unflatten(gamma);
}

void S2rModel::validate() const {
  net.validate();
  if (markers() < 4) throw InputError("s2r: need at least 4 markers");
  if (net.output_dim() != rbf::WarpCoefficients::flat_size(markers())) {
    throw InputError("s2r: output dim must be 3(N+4)");
  }
  if (net.input_dim() != mean_grid.size() || input_norm.mean.size() != mean_grid.size() ||
      output_scale.size() != net.output_dim()) {
    throw InputError("s2r: normalization size mismatch");
  }
  if (!(c > 0.0)) throw InputError("s2r: kernel width must be positive");
}

VecX gamma_scale(int markers, double offset_scale, double linear_scale, double beta_scale) {
  VecX s(rbf::WarpCoefficients::flat_size(markers));
  s.head<3>().setConstant(offset_scale);
  s.segment<9>(3).setConstant(linear_scale);
  s.tail(3L * markers).setConstant(beta_scale);
  return s;
}

namespace {

Points markers_on(const bspline::BSplineSurface& s, const std::vector<Vec2>& uvs) {
  Points q;
  q.reserve(uvs.size());
  for (const auto& uv : uvs) q.push_back(s.evaluate(uv.x(), uv.y()));
  return q;
}

void check_grid(const bspline::BSplineSurface& s, Eigen::Index dim) {
  if (3L * s.rows() * s.cols() != dim) throw InputError("surface grid does not match the model");
}

}  // namespace

Warp predict_warp(const S2rModel& model, const bspline::BSplineSurface& surface) {
  check_grid(surface, model.mean_grid.size());
  Warp w{{markers_on(surface, model.marker_uvs), model.c}, model.coefficients(flatten_points(surface.control()))};
  return w;
}

Vec3 calibrated_point(const S2rModel& model, const fk::FkModel& fk, const oracle::Actuation& a, double u,
                      double v) {
  const auto surface = fk::predict_controls(fk, a);
  const auto w = predict_warp(model, surface);
  return rbf::warp(surface.evaluate(u, v), w.kernels, w.coeffs);
}

Points calibrated_points(const S2rModel& model, const fk::FkModel& fk, const oracle::Actuation& a,
                         const std::vector<Vec2>& params) {
  const auto surface = fk::predict_controls(fk, a);
  const auto w = predict_warp(model, surface);
  Points out;
  out.reserve(params.size());
  for (const auto& uv : params) out.push_back(rbf::warp(surface.evaluate(uv.x(), uv.y()), w.kernels, w.coeffs));
  return out;
}

std::vector<TrainingFrame> pair_with_fk(const std::vector<oracle::MarkerFrame>& frames, const fk::FkModel& fk) {
  std::vector<TrainingFrame> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back({f, fk::predict_controls(fk, f.actuation)});
  return out;
}

S2rTrainResult train_rbf_net(const std::vector<TrainingFrame>& frames, const fk::FkModel& fk,
                             const std::vector<Vec2>& marker_uvs, const S2rOptions& opt) {
  fk.validate();
  if (opt.hidden.empty()) throw InputError("s2r: need at least one hidden layer");
  S2rTrainResult res;
  S2rModel& model = res.model;
  model.mean_grid = fk.mean_grid;
  model.input_norm = fk.output_norm;
  model.marker_uvs = marker_uvs;
  model.c = opt.c;
  const int n_markers = model.markers();
  model.output_scale = gamma_scale(n_markers, opt.offset_scale, opt.linear_scale, opt.beta_scale);

  std::vector<const TrainingFrame*> used;
  for (std::size_t j = 0; j < frames.size(); ++j) {
    const auto& f = frames[j];
    check_grid(f.surface, fk.output_dim());
    if (f.frame.observed_count() == 0) {
      res.warnings.push_back("frame " + std::to_string(j) + " has no observed markers; skipped");
      continue;
    }
    f.frame.validate(n_markers);
    used.push_back(&f);
  }
  if (used.empty()) throw InputError("s2r: no observed markers in any frame");

  nn::TrainSet set;
  set.inputs.resize(fk.output_dim(), static_cast<Eigen::Index>(used.size()));
  for (std::size_t j = 0; j < used.size(); ++j) {
    const auto& f = *used[j];
    set.inputs.col(static_cast<Eigen::Index>(j)) = model.input(flatten_points(f.surface.control()));
    const rbf::KernelSet kernels{markers_on(f.surface, marker_uvs), model.c};
    for (const auto& o : f.frame.observations) {
      if (!o.position) continue;
      const Vec3 q = kernels.centers[static_cast<std::size_t>(o.marker_id)];
      // Phi is linear in gamma, so the residual is affine in the net output.
      MatX m = rbf::grad_coeffs(q, kernels) * model.output_scale.asDiagonal();
      Vec3 offset = q - *o.position;
      set.samples.push_back({static_cast<int>(j), [m = std::move(m), offset](const VecX& out, VecX& grad) {
                               const Vec3 r = offset + m * out;
                               grad = 2.0 * (m.transpose() * r);
                               return r.squaredNorm();
                             }});
    }
  }
  res.observations_used = static_cast<int>(set.samples.size());
  res.frames_used = static_cast<int>(used.size());

  // The marker terms leave the 12-dimensional side-condition subspace of the
  // kernel weights unconstrained. A penalty on sum beta_i and
  // sum beta_i qn_i^T (centers centered and scaled to unit RMS) selects the
  // same interpolant the direct linear solve would.
  if (opt.side_weight > 0.0) {
    const int nb = 3 * n_markers;
    const Eigen::Index off = rbf::WarpCoefficients::flat_size(n_markers) - nb;
    for (std::size_t j = 0; j < used.size(); ++j) {
      const Points q = markers_on(used[j]->surface, marker_uvs);
      Vec3 mean = Vec3::Zero();
      for (const auto& p : q) mean += p;
      mean /= static_cast<double>(q.size());
      double rms = 0.0;
      for (const auto& p : q) rms += (p - mean).squaredNorm();
      rms = std::sqrt(rms / static_cast<double>(q.size()));
      MatX cmat = MatX::Zero(12, model.output_scale.size());
      for (int i = 0; i < n_markers; ++i) {
        const Vec3 qn = (q[static_cast<std::size_t>(i)] - mean) / rms;
        for (int d = 0; d < 3; ++d) {
          const Eigen::Index col = off + 3L * i + d;
          cmat(d, col) = 1.0;
          for (int e = 0; e < 3; ++e) cmat(3 + 3 * e + d, col) = qn[e];
        }
      }
      MatX m = std::sqrt(opt.side_weight) * cmat * model.output_scale.asDiagonal();
      set.samples.push_back({static_cast<int>(j), [m = std::move(m)](const VecX& out, VecX& grad) {
                               const VecX r = m * out;
                               grad = 2.0 * (m.transpose() * r);
                               return r.squaredNorm();
                             }});
    }
  }

  std::vector<int> dims{static_cast<int>(fk.output_dim())};
  dims.insert(dims.end(), opt.hidden.begin(), opt.hidden.end());
  dims.push_back(rbf::WarpCoefficients::flat_size(n_markers));
  auto init = nn::make_mlp(dims, opt.train.seed);
  init.weights[0] *= opt.input_init_scale;
  auto trained = nn::train(std::move(init), set, opt.train);
  model.net = std::move(trained.params);
  res.history = std::move(trained.history);
  model.validate();
  return res;
}

Points MkBaselineModel::predict_markers(const Points& virtual_markers) const {
  if (static_cast<int>(virtual_markers.size()) != markers()) throw InputError("baseline: marker count mismatch");
  const VecX v = flatten_points(virtual_markers);
  const VecX out = nn::forward(net, input_norm.apply(v));
  return unflatten_points(v + output_norm.invert(out));
}

void MkBaselineModel::validate() const {
  net.validate();
  const int d = 3 * markers();
  if (markers() < 4 || net.input_dim() != d || net.output_dim() != d) {
    throw InputError("baseline: network dims must be 3N -> 3N");
  }
  if (input_norm.mean.size() != d || output_norm.mean.size() != d) throw InputError("baseline: normalization size mismatch");
}

MkTrainResult train_marker_baseline(const std::vector<TrainingFrame>& frames, const std::vector<Vec2>& marker_uvs,
                                    const MkOptions& opt) {
  const int n_markers = static_cast<int>(marker_uvs.size());
  std::vector<const TrainingFrame*> complete;
  for (const auto& f : frames) {
    if (f.frame.observed_count() == n_markers && f.frame.complete()) {
      f.frame.validate(n_markers);
      complete.push_back(&f);
    }
  }
  if (complete.empty()) throw InputError("baseline requires complete frames");

  const int d = 3 * n_markers;
  MatX virt(d, static_cast<Eigen::Index>(complete.size()));
  MatX phys(d, static_cast<Eigen::Index>(complete.size()));
  for (std::size_t j = 0; j < complete.size(); ++j) {
    virt.col(static_cast<Eigen::Index>(j)) = flatten_points(markers_on(complete[j]->surface, marker_uvs));
    for (const auto& o : complete[j]->frame.observations) {
      phys.col(static_cast<Eigen::Index>(j)).segment<3>(3L * o.marker_id) = *o.position;
    }
  }

  MkTrainResult res;
  MkBaselineModel& model = res.model;
  model.marker_uvs = marker_uvs;
  model.c = opt.c;
  model.input_norm = nn::Normalizer::shared_scale(virt);
  model.output_norm = nn::Normalizer::shared_scale(phys - virt);

  // One loss term per marker, like the function-prediction training.
  nn::TrainSet set;
  set.inputs = model.input_norm.apply_batch(virt);
  for (Eigen::Index j = 0; j < virt.cols(); ++j) {
    const VecX target = model.output_norm.apply(phys.col(j) - virt.col(j));
    for (int i = 0; i < n_markers; ++i) {
      const Vec3 t = target.segment<3>(3L * i);
      const double s = model.output_norm.scale[3L * i];
      set.samples.push_back({static_cast<int>(j), [t, i, s](const VecX& out, VecX& grad) {
                               const Vec3 r = s * (out.segment<3>(3L * i) - t);
                               grad.segment<3>(3L * i) = 2.0 * s * r;
                               return r.squaredNorm();
                             }});
    }
  }
  res.frames_used = static_cast<int>(complete.size());

  std::vector<int> dims{d};
  dims.insert(dims.end(), opt.hidden.begin(), opt.hidden.end());
  dims.push_back(d);
  auto trained = nn::train(nn::make_mlp(dims, opt.train.seed), set, opt.train);
  model.net = std::move(trained.params);
  res.history = std::move(trained.history);
  model.validate();
  return res;
}

Warp baseline_warp(const MkBaselineModel& model, const bspline::BSplineSurface& surface) {
  rbf::KernelSet k{markers_on(surface, model.marker_uvs), model.c};
  auto coeffs = rbf::solve(k, model.predict_markers(k.centers));
  return {std::move(k), std::move(coeffs)};
}

Points baseline_points(const MkBaselineModel& model, const fk::FkModel& fk, const oracle::Actuation& a,
                       const std::vector<Vec2>& params) {
  const auto surface = fk::predict_controls(fk, a);
  const auto w = baseline_warp(model, surface);
  Points out;
  out.reserve(params.size());
  for (const auto& uv : params) out.push_back(rbf::warp(surface.evaluate(uv.x(), uv.y()), w.kernels, w.coeffs));
  return out;
}

namespace {

template <class Calibrate>
CalibrationReport evaluate(const fk::FkModel& fk, const oracle::VirtualMannequin& vm, const oracle::RealityGap& gap,
                           const std::vector<oracle::Actuation>& probes, Calibrate&& calibrate) {
  CalibrationReport rep;
  rep.rows.resize(probes.size());
  const int count = static_cast<int>(probes.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (int k = 0; k < count; ++k) {
    const auto& a = probes[static_cast<std::size_t>(k)];
    const auto truth = oracle::real_surface(vm, gap, a);
    const auto sim = fk::correspondence_error(fk::predict_points(fk, a, truth.params), truth.points);
    const auto fixed = fk::correspondence_error(calibrate(a, truth.params), truth.points);
    rep.rows[static_cast<std::size_t>(k)] = {k, sim.mean, sim.max, fixed.mean, fixed.max};
  }
  for (const auto& r : rep.rows) {
    rep.mean_sim += r.mean_err_sim;
    rep.mean_fixed += r.mean_err_fixed;
    if (r.mean_err_fixed < r.mean_err_sim) ++rep.improved;
  }
  if (count > 0) {
    rep.mean_sim /= count;
    rep.mean_fixed /= count;
  }
  return rep;
}

}  // namespace

CalibrationReport eval_calibration(const S2rModel& model, const fk::FkModel& fk, const oracle::VirtualMannequin& vm,
                                   const oracle::RealityGap& gap, const std::vector<oracle::Actuation>& probes) {
  return evaluate(fk, vm, gap, probes, [&](const oracle::Actuation& a, const std::vector<Vec2>& uv) {
    return calibrated_points(model, fk, a, uv);
  });
}

CalibrationReport eval_calibration(const MkBaselineModel& model, const fk::FkModel& fk,
                                   const oracle::VirtualMannequin& vm, const oracle::RealityGap& gap,
                                   const std::vector<oracle::Actuation>& probes) {
  return evaluate(fk, vm, gap, probes, [&](const oracle::Actuation& a, const std::vector<Vec2>& uv) {
    return baseline_points(model, fk, a, uv);
  });
}

std::string to_csv(const CalibrationReport& r) {
  std::string out = "actuation_id,mean_err_sim,max_err_sim,mean_err_fixed,max_err_fixed\n";
  char line[160];
  for (const auto& row : r.rows) {
    std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g,%.9g\n", row.actuation_id, row.mean_err_sim,
                  row.max_err_sim, row.mean_err_fixed, row.max_err_fixed);
    out += line;
  }
  return out;
}

namespace {

nlohmann::json uv_json(const std::vector<Vec2>& uvs) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& uv : uvs) a.push_back({uv.x(), uv.y()});
  return a;
}

std::vector<Vec2> uv_from(const nlohmann::json& j) {
  std::vector<Vec2> uvs;
  for (const auto& e : j) uvs.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
  return uvs;
}

std::vector<double> vec(const VecX& v) { return {v.data(), v.data() + v.size()}; }

VecX vec_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VecX>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json to_json(const S2rModel& m) {
  return {{"kind", "s2r"},
          {"c", m.c},
          {"marker_uvs", uv_json(m.marker_uvs)},
          {"net", nn::to_json(m.net)},
          {"input_norm", nn::to_json(m.input_norm)},
          {"mean_grid", vec(m.mean_grid)},
          {"output_scale", vec(m.output_scale)}};
}

S2rModel s2r_model_from_json(const nlohmann::json& j) {
  S2rModel m;
  try {
    if (j.value("kind", std::string()) != "s2r") throw InputError("s2r checkpoint: wrong kind");
    m.c = j.at("c").get<double>();
    m.marker_uvs = uv_from(j.at("marker_uvs"));
    m.net = nn::mlp_from_json(j.at("net"));
    m.input_norm = nn::normalizer_from_json(j.at("input_norm"));
    m.mean_grid = vec_from(j.at("mean_grid"));
    m.output_scale = vec_from(j.at("output_scale"));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("s2r checkpoint: ") + e.what());
  }
  m.validate();
  return m;
}

nlohmann::json to_json(const MkBaselineModel& m) {
  return {{"kind", "mk"},
          {"c", m.c},
          {"marker_uvs", uv_json(m.marker_uvs)},
          {"net", nn::to_json(m.net)},
          {"input_norm", nn::to_json(m.input_norm)},
          {"output_norm", nn::to_json(m.output_norm)}};
}

MkBaselineModel mk_model_from_json(const nlohmann::json& j) {
  MkBaselineModel m;
  try {
    if (j.value("kind", std::string()) != "mk") throw InputError("baseline checkpoint: wrong kind");
    m.c = j.at("c").get<double>();
    m.marker_uvs = uv_from(j.at("marker_uvs"));
    m.net = nn::mlp_from_json(j.at("net"));
    m.input_norm = nn::normalizer_from_json(j.at("input_norm"));
    m.output_norm = nn::normalizer_from_json(j.at("output_norm"));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("baseline checkpoint: ") + e.what());
  }
  m.validate();
  return m;
}

}  // namespace surfkin::sim2real
