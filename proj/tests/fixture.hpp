#pragma once

// Shared enumerable instance used across the test suites: 7 points on a
// 3 x 3 bin grid with the cells (1,1) and (2,2) absent, two cuts per
// feature, so the candidate universe has 4 splits and depth-2 trees come in
// C(4,2) = 6 structures. Raw feature values are chosen so that fitting a
// 2-cut equal-count quantizer reproduces exactly this binning.

#include <vector>

#include "kgb/data.hpp"

namespace kgbtest {

inline kgb::RawDataset fixture_raw() {
  kgb::RawDataset data;
  data.features = {
      {0.10, 0.10},  // bins (0, 0)
      {0.15, 1.30},  // bins (0, 1)
      {0.20, 2.50},  // bins (0, 2)
      {1.30, 0.15},  // bins (1, 0)
      {1.40, 2.60},  // bins (1, 2)
      {2.50, 0.20},  // bins (2, 0)
      {2.60, 1.40},  // bins (2, 1)
  };
  data.targets = {-0.75, 1.5, 1.75, -1.0, 0.5, 0.75, -1.0};
  data.feature_names = {"f0", "f1"};
  return data;
}

struct Fixture {
  kgb::RawDataset raw;
  kgb::FeatureQuantizer quantizer;
  kgb::BinnedDataset data;
  std::vector<kgb::SplitCandidate> universe;
};

inline Fixture make_fixture() {
  Fixture f;
  f.raw = fixture_raw();
  f.quantizer = kgb::fit_quantizer(f.raw, 2);
  f.data = kgb::quantize(f.raw, f.quantizer);
  f.universe = kgb::split_universe(f.data);
  return f;
}

// A variant with duplicated bin rows, built directly on the bin grid: the
// stationary kernel Gram is rank-deficient there and the ridgeless solution
// no longer interpolates, which makes the orthogonality property nontrivial.
inline kgb::BinnedDataset make_duplicated_binned() {
  const Fixture base = make_fixture();
  kgb::BinnedDataset data = base.data;
  const std::vector<std::pair<std::size_t, double>> extra = {
      {0, 0.25}, {1, -0.5}, {2, 1.0}};
  for (const auto& [row, target] : extra) {
    for (std::size_t j = 0; j < data.cols; ++j) {
      data.bins.push_back(base.data.bin(row, j));
    }
    data.targets.push_back(target);
    ++data.rows;
  }
  return data;
}

}  // namespace kgbtest
