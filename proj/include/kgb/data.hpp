#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgb/csv.hpp"
#include "kgb/errors.hpp"

namespace kgb {

struct RawDataset {
  std::vector<std::vector<double>> features;  // N rows of d values
  std::vector<double> targets;
  std::vector<std::string> feature_names;

  std::size_t row_count() const { return features.size(); }
  std::size_t feature_count() const { return features.empty() ? 0 : features.front().size(); }
};

// Per-feature ascending cut points. A value v lands in bin #{t : t < v},
// i.e. values equal to a threshold go left of the corresponding split.
struct FeatureQuantizer {
  std::vector<std::vector<double>> thresholds;

  std::size_t feature_count() const { return thresholds.size(); }
};

struct SplitCandidate {
  int feature = 0;
  int bin = 0;  // threshold index; the split tests bin(x_feature) > bin

  friend auto operator<=>(const SplitCandidate&, const SplitCandidate&) = default;
};

struct BinnedDataset {
  std::vector<std::uint16_t> bins;  // row-major N x d, entries in [0, n_j]
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> targets;
  std::vector<int> n_per_feature;  // actual threshold counts after dedup
  double target_bound = 0.0;       // R with (1/2N) sum y^2 <= R^2

  std::uint16_t bin(std::size_t i, std::size_t j) const { return bins[i * cols + j]; }
  std::span<const std::uint16_t> row(std::size_t i) const {
    return {bins.data() + i * cols, cols};
  }
};

namespace detail {

inline double target_energy(const std::vector<double>& y) {
  double s = 0.0;
  for (double v : y) s += v * v;
  return s / (2.0 * static_cast<double>(y.size()));
}

}  // namespace detail

// Rescales the whole target vector when (1/2N) sum y^2 exceeds R^2. Scaling
// preserves relative structure, unlike per-element truncation.
inline void clip_targets(std::vector<double>& targets, double clip_R) {
  if (clip_R <= 0.0) throw ContractError("clip bound must be positive");
  const double energy = detail::target_energy(targets);
  if (energy > clip_R * clip_R) {
    const double scale = clip_R / std::sqrt(energy);
    for (double& v : targets) v *= scale;
  }
}

inline RawDataset load_csv(const std::string& path, const std::string& target_column,
                           std::optional<double> clip_R = std::nullopt) {
  const CsvTable table = read_numeric_csv(path);
  if (table.rows.empty()) throw Error("empty dataset: " + path + " has a header but no rows");

  std::ptrdiff_t target_idx = -1;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (table.header[c] == target_column) {
      target_idx = static_cast<std::ptrdiff_t>(c);
      break;
    }
  }
  if (target_idx < 0) {
    // fall back to a 0-based column index
    try {
      std::size_t pos = 0;
      const int idx = std::stoi(target_column, &pos);
      if (pos == target_column.size() && idx >= 0 &&
          idx < static_cast<int>(table.header.size())) {
        target_idx = idx;
      }
    } catch (...) {
    }
  }
  if (target_idx < 0) {
    throw Error("target column '" + target_column + "' not found in " + path);
  }
  if (table.header.size() < 2) throw Error("dataset needs at least one feature column");

  RawDataset data;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (static_cast<std::ptrdiff_t>(c) != target_idx) data.feature_names.push_back(table.header[c]);
  }
  data.features.reserve(table.rows.size());
  data.targets.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    std::vector<double> feats;
    feats.reserve(row.size() - 1);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (static_cast<std::ptrdiff_t>(c) == target_idx) continue;
      if (!std::isfinite(row[c])) throw ParseError("non-finite feature value");
      feats.push_back(row[c]);
    }
    if (!std::isfinite(row[target_idx])) throw ParseError("non-finite target value");
    data.features.push_back(std::move(feats));
    data.targets.push_back(row[target_idx]);
  }
  if (clip_R) clip_targets(data.targets, *clip_R);
  return data;
}

// Equal-count thresholds at the nearest-rank quantiles i/(n+1), i = 1..n.
// Duplicates collapse, and cuts at or above the feature maximum are dropped
// because no value can fall to their right. A constant feature therefore
// yields zero thresholds.
inline FeatureQuantizer fit_quantizer(const RawDataset& data, int n) {
  if (n < 1) throw ContractError("bin cut count must be >= 1");
  if (data.row_count() == 0) throw ContractError("cannot fit quantizer on empty dataset");
  const std::size_t N = data.row_count();
  const std::size_t d = data.feature_count();

  FeatureQuantizer q;
  q.thresholds.resize(d);
  std::vector<double> sorted(N);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < N; ++i) sorted[i] = data.features[i][j];
    std::sort(sorted.begin(), sorted.end());
    const double maximum = sorted.back();
    auto& cuts = q.thresholds[j];
    for (int i = 1; i <= n; ++i) {
      const auto rank = static_cast<std::size_t>(
          std::ceil(static_cast<double>(i) * static_cast<double>(N) / (n + 1.0)));
      const double t = sorted[rank == 0 ? 0 : rank - 1];
      if (t >= maximum) continue;
      if (cuts.empty() || t > cuts.back()) cuts.push_back(t);
    }
  }
  return q;
}

inline std::uint16_t quantize_value(const FeatureQuantizer& q, std::size_t feature, double value) {
  const auto& cuts = q.thresholds[feature];
  // bin = #{t : t < value}; out-of-range values saturate at the boundary bins
  const auto it = std::lower_bound(cuts.begin(), cuts.end(), value);
  return static_cast<std::uint16_t>(it - cuts.begin());
}

inline std::vector<std::uint16_t> quantize_row(const FeatureQuantizer& q,
                                               std::span<const double> row) {
  if (row.size() != q.feature_count()) {
    throw ShapeError("row has " + std::to_string(row.size()) + " features, quantizer expects " +
                     std::to_string(q.feature_count()));
  }
  std::vector<std::uint16_t> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = quantize_value(q, j, row[j]);
  return out;
}

inline BinnedDataset quantize(const RawDataset& data, const FeatureQuantizer& q) {
  if (data.feature_count() != q.feature_count()) {
    throw ShapeError("dataset has " + std::to_string(data.feature_count()) +
                     " features, quantizer expects " + std::to_string(q.feature_count()));
  }
  BinnedDataset out;
  out.rows = data.row_count();
  out.cols = data.feature_count();
  out.bins.resize(out.rows * out.cols);
  for (std::size_t i = 0; i < out.rows; ++i) {
    for (std::size_t j = 0; j < out.cols; ++j) {
      out.bins[i * out.cols + j] = quantize_value(q, j, data.features[i][j]);
    }
  }
  out.targets = data.targets;
  out.n_per_feature.resize(out.cols);
  for (std::size_t j = 0; j < out.cols; ++j) {
    out.n_per_feature[j] = static_cast<int>(q.thresholds[j].size());
  }
  out.target_bound = std::sqrt(detail::target_energy(out.targets));
  return out;
}

// The candidate-split universe S, ordered by (feature, bin). |S| = sum of
// per-feature threshold counts.
inline std::vector<SplitCandidate> split_universe(const BinnedDataset& data) {
  std::vector<SplitCandidate> s;
  for (std::size_t j = 0; j < data.n_per_feature.size(); ++j) {
    for (int k = 0; k < data.n_per_feature[j]; ++k) {
      s.push_back(SplitCandidate{static_cast<int>(j), k});
    }
  }
  return s;
}

}  // namespace kgb
