#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "kgb/data.hpp"
#include "kgb/errors.hpp"
#include "kgb/rng.hpp"

namespace kgb {

// An oblivious tree structure: an unordered set of distinct splits. Split
// order is kept as built for auditability, but identity, hashing, and
// comparison use the sorted set, since permuting the splits only permutes
// leaf-index bits and never changes the induced partition.
struct TreeStructure {
  std::vector<SplitCandidate> splits;

  std::size_t size() const { return splits.size(); }
  std::uint32_t leaf_count() const { return 1u << splits.size(); }

  std::vector<SplitCandidate> canonical() const {
    auto sorted = splits;
    std::sort(sorted.begin(), sorted.end());
    return sorted;
  }

  friend bool operator==(const TreeStructure& a, const TreeStructure& b) {
    return a.canonical() == b.canonical();
  }
};

struct LeafAssignment {
  std::vector<std::uint32_t> leaf_of;  // per training row
  std::vector<std::uint32_t> counts;   // per leaf, length 2^depth

  std::uint32_t leaf_count() const { return static_cast<std::uint32_t>(counts.size()); }
};

struct FittedTree {
  TreeStructure structure;
  std::vector<double> leaf_values;
};

// Bit b of the leaf index is the outcome of split b: 1 iff the row's bin on
// that feature exceeds the split's threshold index.
inline std::uint32_t leaf_index(const TreeStructure& tree, std::span<const std::uint16_t> row) {
  std::uint32_t leaf = 0;
  for (std::size_t b = 0; b < tree.splits.size(); ++b) {
    const auto& s = tree.splits[b];
    leaf |= static_cast<std::uint32_t>(row[s.feature] > s.bin) << b;
  }
  return leaf;
}

inline LeafAssignment assign_leaves(const TreeStructure& tree, const BinnedDataset& data) {
  LeafAssignment out;
  out.leaf_of.resize(data.rows);
  out.counts.assign(tree.leaf_count(), 0);
  for (std::size_t i = 0; i < data.rows; ++i) {
    const std::uint32_t leaf = leaf_index(tree, data.row(i));
    out.leaf_of[i] = leaf;
    ++out.counts[leaf];
  }
  return out;
}

// Split-selection score: the per-leaf normalized squared residual sums,
//   D = (1/N) sum_j (sum_{i in leaf j} r_i)^2 / N_j,
// with empty leaves contributing zero. Maximizing D over candidate splits is
// equivalent to minimizing the squared error of per-leaf residual means.
inline double split_score(const TreeStructure&, std::span<const double> residuals,
                          const LeafAssignment& assignment) {
  if (residuals.size() != assignment.leaf_of.size()) {
    throw ShapeError("residual vector length does not match assignment");
  }
  std::vector<double> sums(assignment.leaf_count(), 0.0);
  for (std::size_t i = 0; i < residuals.size(); ++i) sums[assignment.leaf_of[i]] += residuals[i];
  double d = 0.0;
  for (std::uint32_t j = 0; j < assignment.leaf_count(); ++j) {
    if (assignment.counts[j] > 0) d += sums[j] * sums[j] / assignment.counts[j];
  }
  return d / static_cast<double>(residuals.size());
}

// Per-leaf residual means; empty leaves get value zero.
inline FittedTree fit_leaf_values(const TreeStructure& tree, std::span<const double> residuals,
                                  const LeafAssignment& assignment) {
  FittedTree fitted;
  fitted.structure = tree;
  fitted.leaf_values.assign(assignment.leaf_count(), 0.0);
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    fitted.leaf_values[assignment.leaf_of[i]] += residuals[i];
  }
  for (std::uint32_t j = 0; j < assignment.leaf_count(); ++j) {
    if (assignment.counts[j] > 0) fitted.leaf_values[j] /= assignment.counts[j];
  }
  return fitted;
}

namespace detail {

// Incremental scorer for growing one oblivious tree. Maintains the current
// leaf of every row and scores all candidate extensions of one level with a
// single histogram pass: per (leaf, feature, bin) residual sums and counts,
// then a prefix scan per feature.
class LevelScorer {
 public:
  LevelScorer(const BinnedDataset& data, std::span<const double> residuals,
              std::span<const SplitCandidate> candidates)
      : data_(data), residuals_(residuals), candidates_(candidates) {
    leaf_of_.assign(data.rows, 0);
    offsets_.resize(data.cols + 1, 0);
    for (std::size_t j = 0; j < data.cols; ++j) {
      offsets_[j + 1] = offsets_[j] + static_cast<std::size_t>(data.n_per_feature[j]) + 1;
    }
    total_residual_ = 0.0;
    for (double r : residuals_) total_residual_ += r;
  }

  // Scores D((current tree, s), r) for every candidate s; entries for
  // candidates already consumed are filled but unused by the caller.
  void score_level(std::size_t level, std::vector<double>& scores) const {
    const std::size_t leaves = std::size_t{1} << level;
    const std::size_t width = offsets_.back();
    std::vector<double> sums(leaves * width, 0.0);
    std::vector<std::uint32_t> counts(leaves * width, 0);
    for (std::size_t i = 0; i < data_.rows; ++i) {
      const std::size_t base = leaf_of_[i] * width;
      const double r = residuals_[i];
      for (std::size_t j = 0; j < data_.cols; ++j) {
        const std::size_t cell = base + offsets_[j] + data_.bin(i, j);
        sums[cell] += r;
        counts[cell] += 1;
      }
    }
    // per-leaf totals (same for every feature; take them from feature 0)
    std::vector<double> leaf_sum(leaves, 0.0);
    std::vector<std::uint32_t> leaf_cnt(leaves, 0);
    for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
      const std::size_t base = leaf * width + offsets_[0];
      const std::size_t bins0 = offsets_[1] - offsets_[0];
      for (std::size_t b = 0; b < bins0; ++b) {
        leaf_sum[leaf] += sums[base + b];
        leaf_cnt[leaf] += counts[base + b];
      }
    }

    scores.assign(candidates_.size(), 0.0);
    const double n = static_cast<double>(data_.rows);
    // prefix scan: candidate (j, k) splits each leaf at cumulative bin <= k
    std::size_t cand = 0;
    for (std::size_t j = 0; j < data_.cols; ++j) {
      const int cuts = data_.n_per_feature[j];
      if (cuts == 0) continue;
      for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
        const std::size_t base = leaf * width + offsets_[j];
        double left_sum = 0.0;
        std::uint32_t left_cnt = 0;
        for (int k = 0; k < cuts; ++k) {
          left_sum += sums[base + static_cast<std::size_t>(k)];
          left_cnt += counts[base + static_cast<std::size_t>(k)];
          const double right_sum = leaf_sum[leaf] - left_sum;
          const std::uint32_t right_cnt = leaf_cnt[leaf] - left_cnt;
          double d = 0.0;
          if (left_cnt > 0) d += left_sum * left_sum / left_cnt;
          if (right_cnt > 0) d += right_sum * right_sum / right_cnt;
          scores[cand + static_cast<std::size_t>(k)] += d;
        }
      }
      cand += static_cast<std::size_t>(cuts);
    }
    for (double& s : scores) s /= n;
  }

  void apply_split(std::size_t level, const SplitCandidate& s) {
    for (std::size_t i = 0; i < data_.rows; ++i) {
      leaf_of_[i] |= static_cast<std::uint32_t>(data_.bin(i, s.feature) > s.bin) << level;
    }
  }

 private:
  const BinnedDataset& data_;
  std::span<const double> residuals_;
  std::span<const SplitCandidate> candidates_;
  std::vector<std::uint32_t> leaf_of_;
  std::vector<std::size_t> offsets_;
  double total_residual_ = 0.0;
};

}  // namespace detail

// Randomized greedy construction of one oblivious tree. At each level the
// chosen split maximizes D((tree, s), r) - beta * log(-log u(s)) over the
// remaining candidates, with u drawn fresh per candidate per level from a
// counter-indexed stream keyed by (noise_key, level, candidate). beta = 0 is
// plain greedy; ties then break toward the lowest (feature, bin) candidate.
// Chosen splits leave the pool, so construction stops after max_depth levels
// or when the pool empties.
inline TreeStructure sample_tree(const BinnedDataset& data, std::span<const double> residuals,
                                 std::span<const SplitCandidate> candidates, int max_depth,
                                 double beta, std::uint64_t noise_key) {
  if (residuals.size() != data.rows) throw ShapeError("residuals length != row count");
  if (beta < 0.0) throw ContractError("random strength must be >= 0");

  TreeStructure tree;
  if (max_depth <= 0 || candidates.empty()) return tree;

  // the histogram scorer indexes candidates positionally, so the pool must
  // be the canonical (feature, bin)-ordered universe of this dataset
  {
    std::size_t c = 0;
    for (std::size_t j = 0; j < data.n_per_feature.size(); ++j) {
      for (int k = 0; k < data.n_per_feature[j]; ++k, ++c) {
        if (c >= candidates.size() || candidates[c].feature != static_cast<int>(j) ||
            candidates[c].bin != k) {
          throw ContractError("sample_tree expects the full split universe in canonical order");
        }
      }
    }
    if (c != candidates.size()) {
      throw ContractError("sample_tree expects the full split universe in canonical order");
    }
  }

  detail::LevelScorer scorer(data, residuals, candidates);
  std::vector<bool> used(candidates.size(), false);
  std::vector<double> scores;
  const std::size_t depth = std::min<std::size_t>(static_cast<std::size_t>(max_depth),
                                                  candidates.size());
  for (std::size_t level = 0; level < depth; ++level) {
    scorer.score_level(level, scores);
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_idx = candidates.size();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (used[c]) continue;
      double g = scores[c];
      if (beta > 0.0) {
        g += beta * gumbel_from_unit(keyed_unit_open(noise_key, level, c));
      }
      if (g > best) {
        best = g;
        best_idx = c;
      }
    }
    used[best_idx] = true;
    tree.splits.push_back(candidates[best_idx]);
    scorer.apply_split(level, candidates[best_idx]);
  }
  return tree;
}

namespace detail {

inline double binomial_or_cap(std::size_t n, std::size_t k, double cap) {
  if (k > n) return 0.0;
  double result = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    result *= static_cast<double>(n - k + i) / static_cast<double>(i);
    if (result > 4.0 * cap) return result;  // early out, already hopeless
  }
  return result;
}

}  // namespace detail

// All unordered size-m subsets of the candidate universe, canonically
// ordered. Refuses loudly when C(|S|, m) exceeds the cap.
inline std::vector<TreeStructure> enumerate_structures(std::span<const SplitCandidate> candidates,
                                                       int m, double cap = 1e6) {
  if (m < 0) throw ContractError("depth must be >= 0");
  const std::size_t k = static_cast<std::size_t>(m);
  const double count = detail::binomial_or_cap(candidates.size(), k, cap);
  if (count > cap) {
    throw CapacityError("structure enumeration needs " + std::to_string(count) +
                        " structures, cap is " + std::to_string(cap));
  }
  std::vector<TreeStructure> out;
  out.reserve(static_cast<std::size_t>(count));
  if (k > candidates.size()) return out;

  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  for (;;) {
    TreeStructure t;
    t.splits.reserve(k);
    for (std::size_t i : idx) t.splits.push_back(candidates[i]);
    out.push_back(std::move(t));
    // next combination
    std::size_t i = k;
    while (i > 0) {
      --i;
      if (idx[i] != i + candidates.size() - k) break;
      if (i == 0) return out;
    }
    if (k == 0) return out;
    ++idx[i];
    for (std::size_t j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

// Exact sampling probability of a structure under the randomized greedy law:
// the sum over insertion orders of products of per-level softmax factors
//   exp(D(prefix + s) / beta) / sum_{s' still available} exp(D(prefix + s') / beta).
// Rather than looping over the m! orders, identical-prefix terms are merged
// with a subset-mask recursion, which computes the same sum exactly. Scores
// are shifted per level by the running maximum before exponentiation, which
// leaves every softmax factor unchanged.
inline double tree_probability(const TreeStructure& structure, const BinnedDataset& data,
                               std::span<const double> residuals, double beta,
                               std::span<const SplitCandidate> candidates, int perm_cap = 6) {
  if (beta <= 0.0) throw ContractError("tree probability requires beta > 0");
  if (residuals.size() != data.rows) throw ShapeError("residuals length != row count");
  const std::size_t m = structure.size();
  if (m > static_cast<std::size_t>(perm_cap)) {
    throw CapacityError("permutation sum over " + std::to_string(m) +
                        " splits exceeds cap " + std::to_string(perm_cap));
  }

  // positions of the structure's splits inside the candidate universe
  std::vector<std::size_t> member_pos(m);
  for (std::size_t b = 0; b < m; ++b) {
    const auto it = std::find(candidates.begin(), candidates.end(), structure.splits[b]);
    if (it == candidates.end()) return 0.0;  // split not in the universe
    member_pos[b] = static_cast<std::size_t>(it - candidates.begin());
  }

  const std::size_t masks = std::size_t{1} << m;
  const double n = static_cast<double>(data.rows);

  // D for (subset of structure) + one extra candidate, via direct leaf sums
  auto score_of = [&](std::size_t mask, std::size_t extra_candidate) {
    std::vector<SplitCandidate> splits;
    for (std::size_t b = 0; b < m; ++b) {
      if (mask & (std::size_t{1} << b)) splits.push_back(structure.splits[b]);
    }
    if (extra_candidate < candidates.size()) splits.push_back(candidates[extra_candidate]);
    const std::size_t L = std::size_t{1} << splits.size();
    std::vector<double> sums(L, 0.0);
    std::vector<std::uint32_t> cnts(L, 0);
    for (std::size_t i = 0; i < data.rows; ++i) {
      std::uint32_t leaf = 0;
      for (std::size_t b = 0; b < splits.size(); ++b) {
        leaf |= static_cast<std::uint32_t>(data.bin(i, splits[b].feature) > splits[b].bin) << b;
      }
      sums[leaf] += residuals[i];
      ++cnts[leaf];
    }
    double d = 0.0;
    for (std::size_t j = 0; j < L; ++j) {
      if (cnts[j] > 0) d += sums[j] * sums[j] / cnts[j];
    }
    return d / n;
  };

  // weight[mask] = sum over orderings of the mask's splits of the product of
  // softmax factors along the way; weight[full] is the tree's probability
  std::vector<double> weight(masks, 0.0);
  weight[0] = 1.0;
  for (std::size_t mask = 0; mask + 1 < masks; ++mask) {
    if (weight[mask] == 0.0) continue;
    // availability: all candidates minus the subset already used
    std::vector<char> used(candidates.size(), 0);
    for (std::size_t b = 0; b < m; ++b) {
      if (mask & (std::size_t{1} << b)) used[member_pos[b]] = 1;
    }
    // scores of every available extension at this level
    std::vector<double> ext_scores(candidates.size(), 0.0);
    double level_max = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (used[c]) continue;
      ext_scores[c] = score_of(mask, c);
      level_max = std::max(level_max, ext_scores[c]);
    }
    double denom = 0.0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (used[c]) continue;
      denom += std::exp((ext_scores[c] - level_max) / beta);
    }
    for (std::size_t b = 0; b < m; ++b) {
      const std::size_t bit = std::size_t{1} << b;
      if (mask & bit) continue;
      const double numer = std::exp((ext_scores[member_pos[b]] - level_max) / beta);
      weight[mask | bit] += weight[mask] * numer / denom;
    }
  }
  return weight[masks - 1];
}

}  // namespace kgb
