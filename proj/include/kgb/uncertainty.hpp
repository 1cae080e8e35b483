#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "kgb/errors.hpp"

namespace kgb {

struct ScoredPrediction {
  double prediction = 0.0;
  double uncertainty = 0.0;
  std::optional<double> target;
  std::optional<bool> out_of_domain;
};

struct RejectionCurve {
  std::vector<double> fractions;
  std::vector<double> errors;  // MSE among retained points
};

inline std::vector<double> default_rejection_grid() {
  std::vector<double> grid(101);
  for (int i = 0; i <= 100; ++i) grid[static_cast<std::size_t>(i)] = i / 100.0;
  return grid;
}

namespace detail {

inline std::vector<double> squared_errors(std::span<const ScoredPrediction> scored) {
  std::vector<double> errors;
  errors.reserve(scored.size());
  for (const auto& s : scored) {
    if (!s.target) throw MetricError("scored prediction lacks a target");
    const double d = s.prediction - *s.target;
    errors.push_back(d * d);
  }
  return errors;
}

// indices ordered by key descending; equal keys keep input order
inline std::vector<std::size_t> order_desc(std::span<const double> key) {
  std::vector<std::size_t> idx(key.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
  return idx;
}

// Signed area between the random baseline and the cumulative-error rejection
// curve for a given drop order. Curves are C(j) = (sum of errors kept after
// dropping j points) / n, evaluated at every j = 0..n; the random baseline is
// the straight line C(0) * (n - j) / n. With this discrete form, ordering by
// the true errors gives the largest possible area and ordering by their
// negation gives exactly its negative.
inline double rejection_area(std::span<const double> errors,
                             const std::vector<std::size_t>& drop_order) {
  const std::size_t n = errors.size();
  double total = 0.0;
  for (double e : errors) total += e;
  double kept = total;
  double area = 0.0;
  for (std::size_t j = 0; j <= n; ++j) {
    const double baseline = total * static_cast<double>(n - j) / static_cast<double>(n);
    area += (baseline - kept) / static_cast<double>(n);
    if (j < n) kept -= errors[drop_order[j]];
  }
  return area;
}

}  // namespace detail

// Prediction-rejection ratio: the signed area of the uncertainty-ordered
// rejection curve against the random baseline, normalized by the same area
// under oracle (true-error) ordering. 1 means uncertainty ranks errors
// perfectly, 0 is uninformative, -1 is perfectly anti-correlated.
inline double prr(std::span<const ScoredPrediction> scored) {
  if (scored.size() < 2) throw MetricError("PRR needs at least two scored points");
  const auto errors = detail::squared_errors(scored);
  std::vector<double> uncertainty(scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i) uncertainty[i] = scored[i].uncertainty;

  const double area_oracle = detail::rejection_area(errors, detail::order_desc(errors));
  if (area_oracle <= 0.0) {
    throw MetricError("PRR undefined: oracle rejection area is zero (all errors equal)");
  }
  const double area_unc = detail::rejection_area(errors, detail::order_desc(uncertainty));
  return area_unc / area_oracle;
}

// Mann-Whitney AUC: probability that a random out-of-domain point carries
// higher uncertainty than a random in-domain point, ties counting one half.
inline double auc_roc(std::span<const ScoredPrediction> scored) {
  std::vector<std::pair<double, bool>> items;
  items.reserve(scored.size());
  for (const auto& s : scored) {
    if (!s.out_of_domain) throw MetricError("scored prediction lacks a domain label");
    items.emplace_back(s.uncertainty, *s.out_of_domain);
  }
  std::size_t n_out = 0;
  for (const auto& [u, ood] : items) n_out += ood ? 1 : 0;
  const std::size_t n_in = items.size() - n_out;
  if (n_in == 0 || n_out == 0) throw MetricError("AUC undefined: both classes required");

  std::sort(items.begin(), items.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  // rank sum with midranks for ties
  double rank_sum_out = 0.0;
  std::size_t i = 0;
  while (i < items.size()) {
    std::size_t j = i;
    while (j < items.size() && items[j].first == items[i].first) ++j;
    const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (items[k].second) rank_sum_out += mid_rank;
    }
    i = j;
  }
  const double u_stat =
      rank_sum_out - static_cast<double>(n_out) * (static_cast<double>(n_out) + 1.0) / 2.0;
  return u_stat / (static_cast<double>(n_in) * static_cast<double>(n_out));
}

// Drops the q highest-uncertainty fraction and reports the MSE of the rest;
// exactly ceil((1-q) * n) points are retained, ties keeping input order.
// Fraction 1 reports 0 by convention.
inline RejectionCurve rejection_curve(std::span<const ScoredPrediction> scored,
                                      std::span<const double> grid) {
  if (scored.empty()) throw MetricError("rejection curve needs scored points");
  const auto errors = detail::squared_errors(scored);
  std::vector<double> uncertainty(scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i) uncertainty[i] = scored[i].uncertainty;
  // keep lowest uncertainty first
  std::vector<std::size_t> keep_order(scored.size());
  std::iota(keep_order.begin(), keep_order.end(), 0);
  std::stable_sort(keep_order.begin(), keep_order.end(), [&](std::size_t a, std::size_t b) {
    return uncertainty[a] < uncertainty[b];
  });
  std::vector<double> prefix(scored.size() + 1, 0.0);
  for (std::size_t i = 0; i < scored.size(); ++i) {
    prefix[i + 1] = prefix[i] + errors[keep_order[i]];
  }

  RejectionCurve curve;
  for (double q : grid) {
    if (q < 0.0 || q > 1.0) throw ContractError("rejection fractions must lie in [0, 1]");
    curve.fractions.push_back(q);
    const auto retained = static_cast<std::size_t>(
        std::ceil((1.0 - q) * static_cast<double>(scored.size())));
    if (retained == 0) {
      curve.errors.push_back(0.0);
    } else {
      curve.errors.push_back(prefix[retained] / static_cast<double>(retained));
    }
  }
  return curve;
}

inline RejectionCurve rejection_curve(std::span<const ScoredPrediction> scored) {
  const auto grid = default_rejection_grid();
  return rejection_curve(scored, grid);
}

inline double rmse(std::span<const ScoredPrediction> scored) {
  if (scored.empty()) throw MetricError("RMSE needs scored points");
  const auto errors = detail::squared_errors(scored);
  double acc = 0.0;
  for (double e : errors) acc += e;
  return std::sqrt(acc / static_cast<double>(errors.size()));
}

}  // namespace kgb
