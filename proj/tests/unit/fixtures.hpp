#pragma once

#include <random>

#include "surfkin/fk/model.hpp"
#include "surfkin/ik/pipeline.hpp"
#include "surfkin/oracle/capture.hpp"
#include "surfkin/sim2real/model.hpp"

namespace surfkin::test {

// Small models trained once per test process: an 8x8 control grid, a few
// dozen FK samples and a short capture session. Accuracy is poor by design;
// tests that use them check exact properties, not quality.
struct SmallWorld {
  oracle::VirtualMannequin vm{oracle::default_mannequin()};
  fk::FkDataset ds;
  fk::FkModel fk;
  std::vector<oracle::MarkerFrame> frames;
  sim2real::S2rModel s2r;

  ik::Models models() const { return {fk, s2r}; }
};

const SmallWorld& small_world();

fk::DatasetOptions small_dataset_options();

// Largest |a - b| / max(|b|, floor) over entries.
double rel_err(const MatX& a, const MatX& b, double floor = 1e-12);

Points random_points(int count, std::mt19937_64& rng, double scale);

}  // namespace surfkin::test
