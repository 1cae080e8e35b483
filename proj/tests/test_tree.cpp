#include "kgb/tree.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "fixture.hpp"
#include "kgb/rng.hpp"

namespace {

using kgb::SplitCandidate;
using kgb::TreeStructure;

kgb::BinnedDataset binned_1d(std::vector<std::uint16_t> bins, std::vector<double> targets,
                             int cuts) {
  kgb::BinnedDataset d;
  d.rows = bins.size();
  d.cols = 1;
  d.bins = std::move(bins);
  d.targets = std::move(targets);
  d.n_per_feature = {cuts};
  return d;
}

TEST(LeafIndex, EmptyStructureIsRoot) {
  const TreeStructure root{};
  const std::vector<std::uint16_t> row{5, 7};
  EXPECT_EQ(kgb::leaf_index(root, row), 0u);
}

TEST(LeafIndex, SingleSplitBitSemantics) {
  const TreeStructure t{{SplitCandidate{0, 1}}};
  const std::vector<std::uint16_t> above{2};
  const std::vector<std::uint16_t> equal{1};
  EXPECT_EQ(kgb::leaf_index(t, above), 1u);
  EXPECT_EQ(kgb::leaf_index(t, equal), 0u);  // bin == threshold index goes left
}

TEST(LeafIndex, TwoSplitsFailingBothIsLeafZero) {
  const TreeStructure t{{SplitCandidate{0, 1}, SplitCandidate{1, 0}}};
  const std::vector<std::uint16_t> row{0, 0};
  EXPECT_EQ(kgb::leaf_index(t, row), 0u);
}

TEST(Score, HandComputedTwoLeafValue) {
  // residuals (1, 1, -1, -1) split into {rows 0,1} and {rows 2,3}:
  // D = (1/4) (4/2 + 4/2) = 1
  const auto data = binned_1d({0, 0, 1, 1}, {0, 0, 0, 0}, 1);
  const TreeStructure t{{SplitCandidate{0, 0}}};
  const auto assignment = kgb::assign_leaves(t, data);
  const std::vector<double> r{1, 1, -1, -1};
  EXPECT_DOUBLE_EQ(kgb::split_score(t, r, assignment), 1.0);
}

TEST(Score, RootTreeWithBalancedResidualsIsZero) {
  const auto data = binned_1d({0, 0, 1, 1}, {0, 0, 0, 0}, 1);
  const TreeStructure root{};
  const auto assignment = kgb::assign_leaves(root, data);
  const std::vector<double> r{2, -1, -0.5, -0.5};
  EXPECT_DOUBLE_EQ(kgb::split_score(root, r, assignment), 0.0);
}

TEST(Score, ZeroResidualsScoreZeroForEveryStructure) {
  const auto f = kgbtest::make_fixture();
  const std::vector<double> zeros(f.data.rows, 0.0);
  for (const auto& t : kgb::enumerate_structures(f.universe, 2)) {
    const auto assignment = kgb::assign_leaves(t, f.data);
    EXPECT_DOUBLE_EQ(kgb::split_score(t, zeros, assignment), 0.0);
  }
}

TEST(Score, BoundedByMeanSquaredResidual) {
  const auto f = kgbtest::make_fixture();
  kgb::RngStream s(11);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> r(f.data.rows);
    double bound = 0.0;
    for (auto& v : r) {
      v = s.next_gaussian();
      bound += v * v;
    }
    bound /= static_cast<double>(f.data.rows);
    for (int m : {0, 1, 2}) {
      for (const auto& t : kgb::enumerate_structures(f.universe, m)) {
        const auto assignment = kgb::assign_leaves(t, f.data);
        EXPECT_LE(kgb::split_score(t, r, assignment), bound + 1e-12);
      }
    }
  }
}

TEST(Score, AppendingASplitNeverDecreasesScore) {
  const auto f = kgbtest::make_fixture();
  kgb::RngStream s(12);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> r(f.data.rows);
    for (auto& v : r) v = s.next_gaussian();
    for (const auto& base : kgb::enumerate_structures(f.universe, 1)) {
      const double d_base =
          kgb::split_score(base, r, kgb::assign_leaves(base, f.data));
      for (const auto& cand : f.universe) {
        if (cand == base.splits[0]) continue;
        TreeStructure refined = base;
        refined.splits.push_back(cand);
        const double d_ref =
            kgb::split_score(refined, r, kgb::assign_leaves(refined, f.data));
        EXPECT_GE(d_ref, d_base - 1e-12);
      }
    }
  }
}

TEST(FitLeafValues, MeansAndEmptyLeafConvention) {
  const auto data = binned_1d({0, 0, 1, 1}, {0, 0, 0, 0}, 1);
  const TreeStructure t{{SplitCandidate{0, 0}}};
  const auto assignment = kgb::assign_leaves(t, data);
  const auto fitted = kgb::fit_leaf_values(t, std::vector<double>{1, 1, -1, -1}, assignment);
  EXPECT_EQ(fitted.leaf_values, (std::vector<double>{1.0, -1.0}));

  // single occupied leaf holding (1, 3): mean 2; the sibling leaf is empty
  const auto data2 = binned_1d({0, 0}, {0, 0}, 1);
  const auto a2 = kgb::assign_leaves(t, data2);
  const auto f2 = kgb::fit_leaf_values(t, std::vector<double>{1, 3}, a2);
  EXPECT_DOUBLE_EQ(f2.leaf_values[0], 2.0);
  EXPECT_DOUBLE_EQ(f2.leaf_values[1], 0.0);
}

TEST(ObliviousProperty, SplitOrderNeverChangesPredictions) {
  const auto f = kgbtest::make_fixture();
  kgb::RngStream s(13);
  std::vector<double> r(f.data.rows);
  for (auto& v : r) v = s.next_gaussian();
  for (const auto& t : kgb::enumerate_structures(f.universe, 2)) {
    TreeStructure permuted = t;
    std::swap(permuted.splits[0], permuted.splits[1]);
    EXPECT_TRUE(t == permuted);  // identity is the unordered set
    const auto fit_a = kgb::fit_leaf_values(t, r, kgb::assign_leaves(t, f.data));
    const auto fit_b = kgb::fit_leaf_values(permuted, r, kgb::assign_leaves(permuted, f.data));
    for (std::size_t i = 0; i < f.data.rows; ++i) {
      const double pa = fit_a.leaf_values[kgb::leaf_index(t, f.data.row(i))];
      const double pb = fit_b.leaf_values[kgb::leaf_index(permuted, f.data.row(i))];
      EXPECT_DOUBLE_EQ(pa, pb);
    }
  }
}

TEST(SampleTree, GreedyMatchesEnumeratedArgmaxAtZeroBeta) {
  // the histogram path must agree with brute-force scoring of the first level
  const auto f = kgbtest::make_fixture();
  kgb::RngStream s(17);
  for (int rep = 0; rep < 40; ++rep) {
    std::vector<double> r(f.data.rows);
    for (auto& v : r) v = s.next_gaussian();
    const auto tree = kgb::sample_tree(f.data, r, f.universe, 1, 0.0, rep);
    ASSERT_EQ(tree.size(), 1u);
    double best = -1.0;
    SplitCandidate best_split{};
    for (const auto& cand : f.universe) {
      const TreeStructure t{{cand}};
      const double d = kgb::split_score(t, r, kgb::assign_leaves(t, f.data));
      if (d > best) {
        best = d;
        best_split = cand;
      }
    }
    EXPECT_EQ(tree.splits[0], best_split);
  }
}

TEST(SampleTree, GreedyDepthTwoMatchesSequentialArgmax) {
  const auto f = kgbtest::make_fixture();
  kgb::RngStream s(18);
  for (int rep = 0; rep < 40; ++rep) {
    std::vector<double> r(f.data.rows);
    for (auto& v : r) v = s.next_gaussian();
    const auto tree = kgb::sample_tree(f.data, r, f.universe, 2, 0.0, rep);
    ASSERT_EQ(tree.size(), 2u);
    // brute-force the two greedy levels
    std::vector<SplitCandidate> chosen;
    std::vector<SplitCandidate> pool = f.universe;
    for (int level = 0; level < 2; ++level) {
      double best = -1.0;
      std::size_t best_idx = 0;
      for (std::size_t c = 0; c < pool.size(); ++c) {
        TreeStructure t{chosen};
        t.splits.push_back(pool[c]);
        const double d = kgb::split_score(t, r, kgb::assign_leaves(t, f.data));
        if (d > best) {
          best = d;
          best_idx = c;
        }
      }
      chosen.push_back(pool[best_idx]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best_idx));
    }
    EXPECT_EQ(tree.splits, chosen);
  }
}

TEST(SampleTree, TieBreaksTowardLowestCandidate) {
  // all-zero residuals score every candidate 0; greedy must pick (0, 0) then (0, 1)
  const auto f = kgbtest::make_fixture();
  const std::vector<double> zeros(f.data.rows, 0.0);
  const auto tree = kgb::sample_tree(f.data, zeros, f.universe, 2, 0.0, 1);
  ASSERT_EQ(tree.size(), 2u);
  EXPECT_EQ(tree.splits[0], (SplitCandidate{0, 0}));
  EXPECT_EQ(tree.splits[1], (SplitCandidate{0, 1}));
}

TEST(SampleTree, PoolExhaustionReturnsFullUniverse) {
  const auto f = kgbtest::make_fixture();
  const std::vector<double> zeros(f.data.rows, 0.0);
  const auto tree = kgb::sample_tree(f.data, zeros, f.universe, 10, 1.0, 5);
  EXPECT_EQ(tree.size(), f.universe.size());
  auto sorted = tree.canonical();
  EXPECT_TRUE(std::equal(sorted.begin(), sorted.end(), f.universe.begin()));
}

TEST(SampleTree, DepthZeroReturnsRoot) {
  const auto f = kgbtest::make_fixture();
  const std::vector<double> zeros(f.data.rows, 0.0);
  EXPECT_EQ(kgb::sample_tree(f.data, zeros, f.universe, 0, 1.0, 5).size(), 0u);
}

TEST(SampleTree, SameKeySameTree) {
  const auto f = kgbtest::make_fixture();
  const auto t1 = kgb::sample_tree(f.data, f.data.targets, f.universe, 2, 0.5, 777);
  const auto t2 = kgb::sample_tree(f.data, f.data.targets, f.universe, 2, 0.5, 777);
  EXPECT_EQ(t1.splits, t2.splits);
}

TEST(EnumerateStructures, CountsAndCap) {
  const auto f = kgbtest::make_fixture();
  EXPECT_EQ(kgb::enumerate_structures(f.universe, 2).size(), 6u);
  EXPECT_EQ(kgb::enumerate_structures(f.universe, 0).size(), 1u);
  EXPECT_EQ(kgb::enumerate_structures(f.universe, 4).size(), 1u);
  EXPECT_EQ(kgb::enumerate_structures(f.universe, 5).size(), 0u);

  std::vector<SplitCandidate> wide;
  for (int j = 0; j < 2; ++j) {
    for (int k = 0; k < 3; ++k) wide.push_back(SplitCandidate{j, k});
  }
  EXPECT_EQ(kgb::enumerate_structures(wide, 3).size(), 20u);
  EXPECT_THROW(kgb::enumerate_structures(wide, 3, 19.0), kgb::CapacityError);
}

TEST(TreeProbability, SingleSplitIsSoftmax) {
  const auto f = kgbtest::make_fixture();
  const std::vector<double>& r = f.data.targets;
  const double beta = 0.7;
  std::vector<double> scores;
  for (const auto& cand : f.universe) {
    const TreeStructure t{{cand}};
    scores.push_back(kgb::split_score(t, r, kgb::assign_leaves(t, f.data)));
  }
  double denom = 0.0;
  for (double d : scores) denom += std::exp(d / beta);
  for (std::size_t c = 0; c < f.universe.size(); ++c) {
    const TreeStructure t{{f.universe[c]}};
    const double p = kgb::tree_probability(t, f.data, r, beta, f.universe);
    EXPECT_NEAR(p, std::exp(scores[c] / beta) / denom, 1e-12);
  }
}

TEST(TreeProbability, SumsToOneOverEnumeration) {
  const auto f = kgbtest::make_fixture();
  for (double beta : {0.1, 1.0, 10.0}) {
    double total = 0.0;
    for (const auto& t : kgb::enumerate_structures(f.universe, 2)) {
      total += kgb::tree_probability(t, f.data, f.data.targets, beta, f.universe);
    }
    EXPECT_NEAR(total, 1.0, 1e-10);
  }
}

TEST(TreeProbability, UniformOnZeroResiduals) {
  const auto f = kgbtest::make_fixture();
  const std::vector<double> zeros(f.data.rows, 0.0);
  for (const auto& t : kgb::enumerate_structures(f.universe, 2)) {
    EXPECT_NEAR(kgb::tree_probability(t, f.data, zeros, 0.5, f.universe), 1.0 / 6.0, 1e-12);
  }
}

TEST(TreeProbability, HugeScoresDoNotOverflow) {
  const auto f = kgbtest::make_fixture();
  std::vector<double> big(f.data.rows);
  for (std::size_t i = 0; i < big.size(); ++i) big[i] = (i % 2 ? 1.0 : -1.0) * 1e120;
  for (const auto& t : kgb::enumerate_structures(f.universe, 2)) {
    const double p = kgb::tree_probability(t, f.data, big, 1e-3, f.universe);
    EXPECT_TRUE(std::isfinite(p));
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
}

TEST(TreeProbability, SplitOutsideUniverseHasProbabilityZero) {
  const auto f = kgbtest::make_fixture();
  const TreeStructure t{{SplitCandidate{0, 0}, SplitCandidate{1, 9}}};
  EXPECT_DOUBLE_EQ(kgb::tree_probability(t, f.data, f.data.targets, 1.0, f.universe), 0.0);
}

TEST(TreeProbability, PermutationCapRefuses) {
  const auto f = kgbtest::make_fixture();
  TreeStructure t;
  for (const auto& c : f.universe) t.splits.push_back(c);
  EXPECT_THROW(kgb::tree_probability(t, f.data, f.data.targets, 1.0, f.universe, 3),
               kgb::CapacityError);
}

std::map<std::vector<SplitCandidate>, int> draw_histogram(const kgbtest::Fixture& f,
                                                          const std::vector<double>& r,
                                                          double beta, int draws,
                                                          std::uint64_t seed) {
  std::map<std::vector<SplitCandidate>, int> hist;
  for (int i = 0; i < draws; ++i) {
    const auto tree =
        kgb::sample_tree(f.data, r, f.universe, 2, beta, kgb::derive_key(seed, i));
    ++hist[tree.canonical()];
  }
  return hist;
}

void check_law(const kgbtest::Fixture& f, const std::vector<double>& r, double beta, int draws,
               std::uint64_t seed) {
  const auto hist = draw_histogram(f, r, beta, draws, seed);
  for (const auto& t : kgb::enumerate_structures(f.universe, 2)) {
    const double p = kgb::tree_probability(t, f.data, r, beta, f.universe);
    const auto it = hist.find(t.canonical());
    const double observed = it == hist.end() ? 0.0 : it->second;
    const double sd = std::sqrt(p * (1.0 - p) * draws);
    EXPECT_NEAR(observed, p * draws, 4.0 * sd + 1e-9)
        << "beta=" << beta << " p=" << p << " observed=" << observed / draws;
  }
}

TEST(SampleTreeLaw, MatchesExactProbabilities) {
  const auto f = kgbtest::make_fixture();
  check_law(f, f.data.targets, 1.0, 100000, 101);
  check_law(f, f.data.targets, 0.1, 100000, 102);
}

TEST(SampleTreeLaw, UniformOnZeroResiduals) {
  const auto f = kgbtest::make_fixture();
  const std::vector<double> zeros(f.data.rows, 0.0);
  check_law(f, zeros, 1.0, 100000, 103);
}

}  // namespace
