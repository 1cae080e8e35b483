#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kgb/data.hpp"
#include "kgb/errors.hpp"
#include "kgb/rng.hpp"
#include "kgb/tree.hpp"

namespace kgb {

struct BoostConfig {
  double learning_rate = 0.3;
  double regularization = 0.0;  // lambda; the model shrinks by (1 - lambda*lr/N) per step
  int iterations = 900;
  int depth = 4;
  int bins = 64;
  double random_strength = 0.1;  // beta
  std::uint64_t seed = 0;
};

// Rejects configurations before any training happens. The step-size bound
// lr * (lambda/N + 1) < 1 is what keeps the regularized iteration a
// contraction; it is only enforced when regularization is on, so plain
// boosting with lr = 1 stays available.
inline void validate_config(const BoostConfig& cfg, std::size_t row_count) {
  if (cfg.learning_rate <= 0.0) throw ContractError("learning rate must be > 0");
  if (cfg.regularization < 0.0) throw ContractError("regularization must be >= 0");
  if (cfg.iterations < 0) throw ContractError("iterations must be >= 0");
  if (cfg.depth < 0) throw ContractError("depth must be >= 0");
  if (cfg.random_strength < 0.0) throw ContractError("random strength must be >= 0");
  if (cfg.regularization > 0.0 && row_count > 0) {
    const double n = static_cast<double>(row_count);
    if (cfg.learning_rate * (cfg.regularization / n + 1.0) >= 1.0) {
      throw ContractError(
          "step size too large: learning_rate * (regularization/N + 1) must be < 1, got " +
          std::to_string(cfg.learning_rate * (cfg.regularization / n + 1.0)));
    }
  }
}

struct BoostedTree {
  TreeStructure structure;
  std::vector<double> leaf_values;
  double coefficient = 0.0;
};

struct BoostedModel {
  BoostConfig config;
  FeatureQuantizer quantizer;
  std::vector<BoostedTree> trees;

  double predict_binned(std::span<const std::uint16_t> row) const {
    double acc = 0.0;
    for (const auto& t : trees) {
      acc += t.coefficient * t.leaf_values[leaf_index(t.structure, row)];
    }
    return acc;
  }

  double predict_row(std::span<const double> raw_row) const {
    const auto binned = quantize_row(quantizer, raw_row);
    return predict_binned(binned);
  }
};

// Observer invoked once before the first iteration (tau = 0, model == 0) and
// once after each iteration, with the model values at the training points
// and the training objective (1/2N)||y - f||^2.
using IterationHook =
    std::function<void(int iteration, std::span<const double> fitted, double half_mse)>;

namespace detail {

inline double half_mse(std::span<const double> targets, std::span<const double> fitted) {
  double acc = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double r = targets[i] - fitted[i];
    acc += r * r;
  }
  return acc / (2.0 * static_cast<double>(targets.size()));
}

}  // namespace detail

// Regularized gradient boosting: per iteration, residuals r = y - f drive a
// randomized tree draw, leaf values are per-leaf residual means, and the
// model updates as f <- (1 - lambda*lr/N) f + lr * tree. Residual updates
// accumulate in doubles, left to right, so a seed fully determines the model.
// Shrinkage is folded into per-tree coefficients lr * (1 - lambda*lr/N)^(T-1-tau)
// at the end instead of rescaling stored trees every step.
inline BoostedModel train(const BinnedDataset& data, const FeatureQuantizer& quantizer,
                          const BoostConfig& cfg, const IterationHook& hook = {}) {
  if (data.rows == 0) throw ContractError("cannot train on an empty dataset");
  validate_config(cfg, data.rows);

  const auto universe = split_universe(data);
  const double n = static_cast<double>(data.rows);
  const double shrink = 1.0 - cfg.regularization * cfg.learning_rate / n;

  BoostedModel model;
  model.config = cfg;
  model.quantizer = quantizer;
  model.trees.reserve(static_cast<std::size_t>(cfg.iterations));

  std::vector<double> fitted(data.rows, 0.0);
  std::vector<double> residuals(data.rows, 0.0);
  if (hook) hook(0, fitted, detail::half_mse(data.targets, fitted));

  const std::uint64_t run_key = derive_key(cfg.seed, 0x626f6f7374ull);  // run-scoped stream
  for (int tau = 0; tau < cfg.iterations; ++tau) {
    for (std::size_t i = 0; i < data.rows; ++i) residuals[i] = data.targets[i] - fitted[i];
    const std::uint64_t tree_key = derive_key(run_key, static_cast<std::uint64_t>(tau));
    TreeStructure structure = sample_tree(data, residuals, universe, cfg.depth,
                                          cfg.random_strength, tree_key);
    const LeafAssignment assignment = assign_leaves(structure, data);
    FittedTree fitted_tree = fit_leaf_values(structure, residuals, assignment);
    for (std::size_t i = 0; i < data.rows; ++i) {
      fitted[i] = shrink * fitted[i] +
                  cfg.learning_rate * fitted_tree.leaf_values[assignment.leaf_of[i]];
    }
    model.trees.push_back(BoostedTree{std::move(fitted_tree.structure),
                                      std::move(fitted_tree.leaf_values), 0.0});
    if (hook) hook(tau + 1, fitted, detail::half_mse(data.targets, fitted));
  }

  const int T = cfg.iterations;
  for (int tau = 0; tau < T; ++tau) {
    model.trees[static_cast<std::size_t>(tau)].coefficient =
        cfg.learning_rate * std::pow(shrink, static_cast<double>(T - 1 - tau));
  }
  return model;
}

inline std::vector<double> predict(const BoostedModel& model,
                                   const std::vector<std::vector<double>>& rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(model.predict_row(row));
  return out;
}

}  // namespace kgb
