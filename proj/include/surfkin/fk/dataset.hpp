#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json_fwd.hpp>

#include "surfkin/bspline/surface.hpp"
#include "surfkin/oracle/mannequin.hpp"

namespace surfkin::fk {

// Control grids are stored flat as [x0 y0 z0 x1 y1 z1 ...] in the surface's
// row-major control order.
VecX flatten_points(const Points& p);
Points unflatten_points(const VecX& flat);

struct DatasetOptions {
  int m = 30;
  int n = 30;
  int degree = 3;
  bool include_corners = true;
  int halton_count = 488;
  int halton_skip = 0;
  double ridge = 1e-8;
  double train_fraction = 0.7;
  std::uint64_t seed = 0;  // drives the train/test split only

  void validate() const;
};

struct FkDataset {
  int m = 0;
  int n = 0;
  int degree = 3;
  std::vector<oracle::Actuation> actuations;
  MatX controls;   // 3mn x S absolute fitted control grids, one column per sample
  VecX mean_grid;  // mean over the training split
  std::vector<int> train;
  std::vector<int> test;
  std::vector<double> fit_rms;
  std::vector<double> fit_max;

  int size() const { return static_cast<int>(actuations.size()); }
  MatX deltas() const { return controls.colwise() - mean_grid; }
  bspline::BSplineSurface surface(int k) const;
  void validate() const;
};

// Corner actuations (when enabled) followed by Halton points in [0,1]^9.
std::vector<oracle::Actuation> dataset_actuations(const DatasetOptions& opt);

// Samples every actuation on the oracle's grid and fits an m x n control grid
// to it. Samples are processed in parallel; results land in index order and
// are identical to build_dataset_serial.
FkDataset build_dataset(const oracle::VirtualMannequin& vm, const DatasetOptions& opt);
FkDataset build_dataset_serial(const oracle::VirtualMannequin& vm, const DatasetOptions& opt);

// Deterministic seeded 7:3 style split; both lists sorted ascending.
void split_indices(int count, double train_fraction, std::uint64_t seed, std::vector<int>& train,
                   std::vector<int>& test);

// Directory layout: manifest.json plus samples/NNNNNN.json (one surface each).
std::filesystem::path write_dataset(const FkDataset& ds, const std::filesystem::path& dir,
                                    const nlohmann::json& extra);
FkDataset read_dataset(const std::filesystem::path& dir);

}  // namespace surfkin::fk
