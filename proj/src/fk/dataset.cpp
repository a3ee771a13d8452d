#include "surfkin/fk/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>

#include "surfkin/bspline/fit.hpp"
#include "surfkin/io/atomic_file.hpp"

namespace surfkin::fk {

VecX flatten_points(const Points& p) {
  VecX flat(3 * static_cast<Eigen::Index>(p.size()));
  for (std::size_t i = 0; i < p.size(); ++i) flat.segment<3>(3 * static_cast<Eigen::Index>(i)) = p[i];
  return flat;
}

Points unflatten_points(const VecX& flat) {
  if (flat.size() % 3 != 0) throw InputError("flat point array length must be a multiple of 3");
  Points p(static_cast<std::size_t>(flat.size() / 3));
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = flat.segment<3>(3 * static_cast<Eigen::Index>(i));
  return p;
}

void DatasetOptions::validate() const {
  if (m < degree + 1 || n < degree + 1) throw InputError("dataset: control grid too small for degree");
  if (halton_count < 0 || halton_skip < 0) throw InputError("dataset: halton count/skip must be >= 0");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InputError("dataset: train_fraction must be in (0, 1)");
  }
  if (!include_corners && halton_count == 0) throw InputError("dataset: no samples requested");
}

bspline::BSplineSurface FkDataset::surface(int k) const {
  return bspline::make_surface(m, n, unflatten_points(controls.col(k)), degree);
}

void FkDataset::validate() const {
  const Eigen::Index dim = 3L * m * n;
  if (controls.rows() != dim || controls.cols() != size() || mean_grid.size() != dim) {
    throw InputError("dataset: inconsistent dimensions");
  }
  std::vector<int> all = train;
  all.insert(all.end(), test.begin(), test.end());
  std::sort(all.begin(), all.end());
  std::vector<int> expect(static_cast<std::size_t>(size()));
  std::iota(expect.begin(), expect.end(), 0);
  if (all != expect) throw InputError("dataset: split is not a partition of the samples");
}

std::vector<oracle::Actuation> dataset_actuations(const DatasetOptions& opt) {
  std::vector<oracle::Actuation> acts;
  if (opt.include_corners) acts = oracle::corner_actuations();
  for (const auto& h : oracle::halton(oracle::kChambers, opt.halton_count, opt.halton_skip)) {
    acts.push_back(oracle::actuation_from(h));
  }
  return acts;
}

void split_indices(int count, double train_fraction, std::uint64_t seed, std::vector<int>& train,
                   std::vector<int>& test) {
  std::vector<int> idx(static_cast<std::size_t>(count));
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto ntrain = static_cast<std::size_t>(std::llround(train_fraction * count));
  train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(ntrain));
  test.assign(idx.begin() + static_cast<std::ptrdiff_t>(ntrain), idx.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
}

namespace {

FkDataset prepare(const DatasetOptions& opt) {
  opt.validate();
  FkDataset ds;
  ds.m = opt.m;
  ds.n = opt.n;
  ds.degree = opt.degree;
  ds.actuations = dataset_actuations(opt);
  const int count = ds.size();
  ds.controls.resize(3L * opt.m * opt.n, count);
  ds.fit_rms.assign(static_cast<std::size_t>(count), 0.0);
  ds.fit_max.assign(static_cast<std::size_t>(count), 0.0);
  return ds;
}

// Fits sample k into its column. Returns an empty string or the failure text.
std::string fit_sample(const oracle::VirtualMannequin& vm, const bspline::SurfaceFitter& fitter,
                       FkDataset& ds, int k) {
  try {
    const auto sim = vm.sim_surface(ds.actuations[static_cast<std::size_t>(k)]);
    const auto res = fitter.fit(sim.points);
    ds.controls.col(k) = flatten_points(res.surface.control());
    ds.fit_rms[static_cast<std::size_t>(k)] = res.rms_residual;
    ds.fit_max[static_cast<std::size_t>(k)] = res.max_residual;
    return {};
  } catch (const std::exception& e) {
    return e.what();
  }
}

void finish(FkDataset& ds, const DatasetOptions& opt, const std::vector<std::string>& errors) {
  for (std::size_t k = 0; k < errors.size(); ++k) {
    if (!errors[k].empty()) throw Error("fit failed for sample " + std::to_string(k) + ": " + errors[k]);
  }
  split_indices(ds.size(), opt.train_fraction, opt.seed, ds.train, ds.test);
  ds.mean_grid = VecX::Zero(ds.controls.rows());
  for (int k : ds.train) ds.mean_grid += ds.controls.col(k);
  ds.mean_grid /= static_cast<double>(ds.train.size());
}

}  // namespace

FkDataset build_dataset_serial(const oracle::VirtualMannequin& vm, const DatasetOptions& opt) {
  FkDataset ds = prepare(opt);
  const bspline::SurfaceFitter fitter(vm.grid_params(), opt.m, opt.n, opt.degree, opt.ridge);
  std::vector<std::string> errors(static_cast<std::size_t>(ds.size()));
  for (int k = 0; k < ds.size(); ++k) errors[static_cast<std::size_t>(k)] = fit_sample(vm, fitter, ds, k);
  finish(ds, opt, errors);
  return ds;
}

FkDataset build_dataset(const oracle::VirtualMannequin& vm, const DatasetOptions& opt) {
  FkDataset ds = prepare(opt);
  const bspline::SurfaceFitter fitter(vm.grid_params(), opt.m, opt.n, opt.degree, opt.ridge);
  std::vector<std::string> errors(static_cast<std::size_t>(ds.size()));
  const int count = ds.size();
#pragma omp parallel for schedule(dynamic, 8)
  for (int k = 0; k < count; ++k) errors[static_cast<std::size_t>(k)] = fit_sample(vm, fitter, ds, k);
  finish(ds, opt, errors);
  return ds;
}

std::filesystem::path write_dataset(const FkDataset& ds, const std::filesystem::path& dir,
                                    const nlohmann::json& extra) {
  ds.validate();
  nlohmann::json files = nlohmann::json::array();
  for (int k = 0; k < ds.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "samples/%06d.json", k);
    io::write_json_atomic(dir / name, bspline::to_json(ds.surface(k)));
    files.push_back(name);
  }
  nlohmann::json acts = nlohmann::json::array();
  for (const auto& a : ds.actuations) acts.push_back(std::vector<double>(a.begin(), a.end()));
  nlohmann::json mean = nlohmann::json::array();
  for (const auto& p : unflatten_points(ds.mean_grid)) mean.push_back({p.x(), p.y(), p.z()});
  nlohmann::json manifest = {{"count", ds.size()},
                             {"m", ds.m},
                             {"n", ds.n},
                             {"degree", ds.degree},
                             {"actuations", std::move(acts)},
                             {"split", {{"train", ds.train}, {"test", ds.test}}},
                             {"mean_grid", std::move(mean)},
                             {"fit_rms", ds.fit_rms},
                             {"fit_max", ds.fit_max},
                             {"files", std::move(files)}};
  for (const auto& [k, v] : extra.items()) manifest[k] = v;
  const auto path = dir / "manifest.json";
  io::write_json_atomic(path, manifest);
  return path;
}

FkDataset read_dataset(const std::filesystem::path& dir) {
  const auto manifest = io::read_json(dir / "manifest.json");
  FkDataset ds;
  try {
    ds.m = manifest.at("m").get<int>();
    ds.n = manifest.at("n").get<int>();
    ds.degree = manifest.at("degree").get<int>();
    for (const auto& a : manifest.at("actuations")) {
      const auto v = a.get<std::vector<double>>();
      ds.actuations.push_back(oracle::actuation_from(Eigen::Map<const VecX>(v.data(), static_cast<Eigen::Index>(v.size()))));
    }
    ds.train = manifest.at("split").at("train").get<std::vector<int>>();
    ds.test = manifest.at("split").at("test").get<std::vector<int>>();
    ds.fit_rms = manifest.at("fit_rms").get<std::vector<double>>();
    ds.fit_max = manifest.at("fit_max").get<std::vector<double>>();
    Points mean;
    for (const auto& p : manifest.at("mean_grid")) mean.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
    ds.mean_grid = flatten_points(mean);
    const auto& files = manifest.at("files");
    ds.controls.resize(3L * ds.m * ds.n, static_cast<Eigen::Index>(files.size()));
    for (std::size_t k = 0; k < files.size(); ++k) {
      const auto s = bspline::surface_from_json(io::read_json(dir / files[k].get<std::string>()));
      if (s.rows() != ds.m || s.cols() != ds.n) throw InputError("dataset: sample grid size mismatch");
      ds.controls.col(static_cast<Eigen::Index>(k)) = flatten_points(s.control());
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("dataset manifest: ") + e.what());
  }
  ds.validate();
  return ds;
}

}  // namespace surfkin::fk
