#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <span>
#include <thread>
#include <vector>

#include "kgb/boosting.hpp"
#include "kgb/data.hpp"
#include "kgb/errors.hpp"
#include "kgb/rng.hpp"
#include "kgb/tree.hpp"

namespace kgb {

struct PriorTree {
  TreeStructure structure;
  std::vector<double> leaf_values;
};

// A draw from the implicit GP prior of the boosting kernel: uniformly random
// structures with centered normal leaf values of variance N / max{N_j, 1},
// summed with weight 1/sqrt(T0). Empty leaves carry random values too (their
// variance is N), which is what makes the prior wide away from the data.
struct PriorSample {
  std::vector<PriorTree> trees;
  double scale = 1.0;  // 1/sqrt(T0)

  double predict_binned(std::span<const std::uint16_t> row) const {
    double acc = 0.0;
    for (const auto& t : trees) acc += t.leaf_values[leaf_index(t.structure, row)];
    return scale * acc;
  }
};

inline PriorSample sample_prior(const BinnedDataset& data, int iterations, int depth,
                                std::uint64_t key) {
  if (iterations < 1) throw ContractError("prior needs at least one iteration");
  if (data.rows == 0) throw ContractError("prior needs training rows");
  const auto universe = split_universe(data);
  const std::vector<double> zero_residuals(data.rows, 0.0);
  const double n = static_cast<double>(data.rows);

  PriorSample prior;
  prior.scale = 1.0 / std::sqrt(static_cast<double>(iterations));
  prior.trees.reserve(static_cast<std::size_t>(iterations));
  RngStream values(derive_key(key, 0x76616c75ull));
  for (int tau = 0; tau < iterations; ++tau) {
    // any positive random strength gives the uniform law on zero residuals
    TreeStructure structure = sample_tree(data, zero_residuals, universe, depth, 1.0,
                                          derive_key(key, 0x74726565ull,
                                                     static_cast<std::uint64_t>(tau)));
    const LeafAssignment assignment = assign_leaves(structure, data);
    std::vector<double> leaf_values(assignment.leaf_count());
    for (std::uint32_t j = 0; j < assignment.leaf_count(); ++j) {
      const double variance = n / std::max<std::uint32_t>(assignment.counts[j], 1);
      leaf_values[j] = std::sqrt(variance) * values.next_gaussian();
    }
    prior.trees.push_back(PriorTree{std::move(structure), std::move(leaf_values)});
  }
  return prior;
}

struct PosteriorConfig {
  BoostConfig boost;         // regularization is overridden by delta^2/sigma^2
  int prior_iterations = 100;  // T0
  double sigma = 1e-2;
  double delta = 1e-4;
};

// One sample-then-optimize draw: sigma * h + f where f is a regularized
// boosting fit to y - sigma*h(x) + N(0, delta^2) with lambda = delta^2/sigma^2.
struct PosteriorSample {
  PriorSample prior;
  BoostedModel boosted;
  double sigma = 1.0;
  double delta = 0.0;

  double predict_binned(std::span<const std::uint16_t> row) const {
    return sigma * prior.predict_binned(row) + boosted.predict_binned(row);
  }

  double predict_row(std::span<const double> raw_row) const {
    const auto binned = quantize_row(boosted.quantizer, raw_row);
    return predict_binned(binned);
  }
};

inline PosteriorSample sample_posterior(const BinnedDataset& data,
                                        const FeatureQuantizer& quantizer,
                                        const PosteriorConfig& cfg, std::uint64_t member_key) {
  if (cfg.sigma <= 0.0) throw ContractError("sigma must be > 0");
  if (cfg.delta <= 0.0) throw ContractError("delta must be > 0");

  PosteriorSample sample;
  sample.sigma = cfg.sigma;
  sample.delta = cfg.delta;
  sample.prior = sample_prior(data, cfg.prior_iterations, cfg.boost.depth,
                              derive_key(member_key, 1));

  // label noise is drawn up front from the member's own stream
  RngStream noise(derive_key(member_key, 2));
  BinnedDataset shifted = data;
  for (std::size_t i = 0; i < data.rows; ++i) {
    shifted.targets[i] = data.targets[i] - cfg.sigma * sample.prior.predict_binned(data.row(i)) +
                         cfg.delta * noise.next_gaussian();
  }

  BoostConfig boost_cfg = cfg.boost;
  boost_cfg.regularization = (cfg.delta * cfg.delta) / (cfg.sigma * cfg.sigma);
  boost_cfg.seed = derive_key(member_key, 3);
  sample.boosted = train(shifted, quantizer, boost_cfg);
  return sample;
}

struct EnsembleSummary {
  std::vector<double> mean;      // per query
  std::vector<double> variance;  // unbiased (k-1) sample variance per query
  int members = 0;
};

namespace detail {

// Runs fn(i) for i in [0, count) on up to `threads` workers. Work items own
// disjoint output slots, so the result is schedule-independent.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(count)));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= count) break;
          fn(i);
        }
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

inline std::uint64_t member_seed(std::uint64_t master_seed, int member_index) {
  return derive_key(master_seed, static_cast<std::uint64_t>(member_index));
}

// Monte-Carlo ensemble of independent posterior samples. Member i depends
// only on (master_seed, i), so members can be trained in any order, in
// parallel, or re-run individually, and k can grow without disturbing
// earlier members.
inline EnsembleSummary ensemble(const BinnedDataset& data, const FeatureQuantizer& quantizer,
                                const PosteriorConfig& cfg, int members,
                                const std::vector<std::vector<double>>& query_rows,
                                std::uint64_t master_seed, int threads = 1) {
  if (members < 2) throw ContractError("ensemble needs at least two members");

  std::vector<std::vector<std::uint16_t>> queries(query_rows.size());
  for (std::size_t q = 0; q < query_rows.size(); ++q) {
    queries[q] = quantize_row(quantizer, query_rows[q]);
  }
  std::vector<std::vector<double>> predictions(static_cast<std::size_t>(members));
  detail::parallel_for(static_cast<std::size_t>(members), threads, [&](std::size_t i) {
    const PosteriorSample sample =
        sample_posterior(data, quantizer, cfg, member_seed(master_seed, static_cast<int>(i)));
    auto& row = predictions[i];
    row.resize(queries.size());
    for (std::size_t q = 0; q < queries.size(); ++q) {
      row[q] = sample.predict_binned(queries[q]);
    }
  });

  EnsembleSummary summary;
  summary.members = members;
  summary.mean.assign(query_rows.size(), 0.0);
  summary.variance.assign(query_rows.size(), 0.0);
  for (const auto& row : predictions) {
    for (std::size_t q = 0; q < row.size(); ++q) summary.mean[q] += row[q];
  }
  for (double& m : summary.mean) m /= members;
  for (const auto& row : predictions) {
    for (std::size_t q = 0; q < row.size(); ++q) {
      const double d = row[q] - summary.mean[q];
      summary.variance[q] += d * d;
    }
  }
  for (double& v : summary.variance) v /= (members - 1);
  return summary;
}

}  // namespace kgb
