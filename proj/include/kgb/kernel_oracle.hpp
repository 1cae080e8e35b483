#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kgb/boosting.hpp"
#include "kgb/data.hpp"
#include "kgb/errors.hpp"
#include "kgb/tree.hpp"

// Brute-force kernel ground truth on enumerable instances. Everything here
// is deliberately direct: enumerate all tree structures, build dense
// kernels, factorize exactly. It exists to verify the boosting path, not to
// scale.

namespace kgb {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

using BinnedRows = std::vector<std::vector<std::uint16_t>>;

inline BinnedRows training_rows(const BinnedDataset& data) {
  BinnedRows rows(data.rows);
  for (std::size_t i = 0; i < data.rows; ++i) {
    const auto r = data.row(i);
    rows[i].assign(r.begin(), r.end());
  }
  return rows;
}

inline BinnedRows quantize_rows(const FeatureQuantizer& q,
                                const std::vector<std::vector<double>>& raw) {
  BinnedRows rows(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) rows[i] = quantize_row(q, raw[i]);
  return rows;
}

// Single-tree kernel: N / max{N_j, 1} when both points share leaf j, else 0.
// Leaf weights always come from the training occupancy, so points landing in
// a leaf no training row reaches get the full weight N.
inline Matrix weak_kernel(const TreeStructure& structure, const BinnedDataset& train,
                          const BinnedRows& a, const BinnedRows& b) {
  const LeafAssignment assignment = assign_leaves(structure, train);
  std::vector<double> w(assignment.leaf_count());
  for (std::uint32_t j = 0; j < assignment.leaf_count(); ++j) {
    w[j] = static_cast<double>(train.rows) / std::max<std::uint32_t>(assignment.counts[j], 1);
  }
  std::vector<std::uint32_t> la(a.size()), lb(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) la[i] = leaf_index(structure, a[i]);
  for (std::size_t i = 0; i < b.size(); ++i) lb[i] = leaf_index(structure, b[i]);
  Matrix k = Matrix::Zero(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (la[i] == lb[j]) k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w[la[i]];
    }
  }
  return k;
}

// Prior kernel: uniform average of the weak-learner kernels over every
// depth-m structure.
inline Matrix stationary_kernel(const BinnedDataset& data, int m, const BinnedRows& a,
                                const BinnedRows& b, double cap = 1e6) {
  const auto universe = split_universe(data);
  const auto structures = enumerate_structures(universe, m, cap);
  if (structures.empty()) throw ContractError("no structures to average");
  Matrix k = Matrix::Zero(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (const auto& s : structures) k += weak_kernel(s, data, a, b);
  return k / static_cast<double>(structures.size());
}

// Kernel guiding one boosting step: weak kernels weighted by the sampling
// law of the current residuals y - f.
inline Matrix greedy_kernel(const BinnedDataset& data, std::span<const double> f_values,
                            double beta, int m, const BinnedRows& a, const BinnedRows& b,
                            double cap = 1e6, int perm_cap = 6) {
  if (f_values.size() != data.rows) throw ShapeError("f values length != row count");
  std::vector<double> residuals(data.rows);
  for (std::size_t i = 0; i < data.rows; ++i) residuals[i] = data.targets[i] - f_values[i];
  const auto universe = split_universe(data);
  const auto structures = enumerate_structures(universe, m, cap);
  Matrix k = Matrix::Zero(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  double total = 0.0;
  for (const auto& s : structures) {
    const double p = tree_probability(s, data, residuals, beta, universe, perm_cap);
    total += p;
    k += p * weak_kernel(s, data, a, b);
  }
  if (std::abs(total - 1.0) > 1e-8) {
    throw NumericalError("tree probabilities sum to " + std::to_string(total));
  }
  return k;
}

struct GPPosterior {
  Vector weights;       // (K + lambda I)^-1 y, or pseudo-inverse applied to y
  double lambda = 0.0;  // equals delta^2 / sigma^2
  double sigma = 1.0;
  double delta = 0.0;
  Matrix train_kernel;
  Matrix inverse;  // (K + lambda I)^-1, or the pseudo-inverse when ridgeless
};

// Closed-form KRR solve. lambda > 0 uses a symmetric factorization with one
// iterative-refinement pass and a hard residual check. lambda = 0 is the
// ridgeless minimum-norm solution through an eigendecomposition
// pseudo-inverse with relative cutoff 1e-10.
inline GPPosterior krr_solve(const Matrix& k_train, const Vector& y, double lambda,
                             double sigma = 1.0) {
  if (k_train.rows() != k_train.cols()) throw ContractError("training kernel must be square");
  if (k_train.rows() != y.size()) throw ShapeError("kernel size != target length");
  if (lambda < 0.0) throw ContractError("lambda must be >= 0");
  if (sigma <= 0.0) throw ContractError("sigma must be > 0");
  const Eigen::Index n = k_train.rows();
  if (n > 0 && !k_train.isApprox(k_train.transpose(), 1e-12)) {
    throw ContractError("training kernel is not symmetric");
  }

  GPPosterior post;
  post.lambda = lambda;
  post.sigma = sigma;
  post.delta = sigma * std::sqrt(lambda);
  post.train_kernel = k_train;
  if (n == 0) {
    post.weights = Vector();
    post.inverse = Matrix();
    return post;
  }

  if (lambda > 0.0) {
    const Matrix reg = k_train + lambda * Matrix::Identity(n, n);
    const Eigen::LDLT<Matrix> ldlt(reg);
    if (ldlt.info() != Eigen::Success) throw NumericalError("factorization failed");
    Vector w = ldlt.solve(y);
    w += ldlt.solve(y - reg * w);  // one refinement pass
    const double residual = (reg * w - y).norm();
    if (residual > 1e-8 * std::max(y.norm(), 1e-30)) {
      throw NumericalError("linear solve residual too large: " + std::to_string(residual));
    }
    post.weights = std::move(w);
    post.inverse = ldlt.solve(Matrix::Identity(n, n));
  } else {
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(k_train);
    if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
    const Vector& vals = eig.eigenvalues();
    const double cutoff = 1e-10 * std::max(vals.cwiseAbs().maxCoeff(), 1e-300);
    Vector inv_vals = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (vals(i) > cutoff) inv_vals(i) = 1.0 / vals(i);
    }
    post.inverse = eig.eigenvectors() * inv_vals.asDiagonal() * eig.eigenvectors().transpose();
    post.weights = post.inverse * y;
    // the attainable part of y must be solved exactly
    Vector projected = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (vals(i) > cutoff) {
        projected += eig.eigenvectors().col(i) * (eig.eigenvectors().col(i).dot(y));
      }
    }
    const double residual = (k_train * post.weights - projected).norm();
    if (residual > 1e-8 * std::max(y.norm(), 1e-30)) {
      throw NumericalError("ridgeless solve residual too large: " + std::to_string(residual));
    }
  }
  return post;
}

inline Vector posterior_mean(const GPPosterior& post, const Matrix& k_query_train) {
  if (post.weights.size() == 0) return Vector::Zero(k_query_train.rows());
  return k_query_train * post.weights;
}

// Per-query predictive variance delta^2 + sigma^2 * Ktilde(x, x) with
//   Ktilde(x, x) = K(x, x) - K(x, X) (K + lambda I)^-1 K(X, x).
// A Ktilde below -1e-8 means the inputs were not a valid PSD system.
inline Vector gp_posterior_cov(const Vector& k_query_diag, const Matrix& k_query_train,
                               const GPPosterior& post) {
  if (k_query_train.rows() != k_query_diag.size()) {
    throw ShapeError("query kernel sizes disagree");
  }
  Vector out(k_query_diag.size());
  for (Eigen::Index i = 0; i < k_query_diag.size(); ++i) {
    double schur = k_query_diag(i);
    if (post.weights.size() > 0) {
      const Vector kx = k_query_train.row(i).transpose();
      schur -= kx.dot(post.inverse * kx);
    }
    if (schur < -1e-8) {
      throw NumericalError("negative posterior variance " + std::to_string(schur));
    }
    out(i) = post.delta * post.delta + post.sigma * post.sigma * std::max(schur, 0.0);
  }
  return out;
}

struct ConvergencePoint {
  int iterations = 0;
  double mean_squared_gap = 0.0;
  int trials = 0;
};

struct ConvergenceReport {
  std::vector<ConvergencePoint> curve;
  double floor_estimate = 0.0;
  double decay_rate_estimate = 0.0;
  double halved_lr_floor = 0.0;
  bool floor_shrinks_when_lr_halved = false;
};

namespace detail {

// Mean squared train-point gap to the KRR solution at checkpoint iterations,
// averaged over independently seeded runs.
inline std::vector<double> gap_curve(const BinnedDataset& data, const FeatureQuantizer& quantizer,
                                     const BoostConfig& cfg, const Vector& target_values,
                                     const std::vector<int>& checkpoints, int trials) {
  std::vector<double> acc(checkpoints.size(), 0.0);
  for (int trial = 0; trial < trials; ++trial) {
    BoostConfig run_cfg = cfg;
    run_cfg.seed = derive_key(cfg.seed, static_cast<std::uint64_t>(trial));
    std::size_t next = 0;
    auto hook = [&](int iteration, std::span<const double> fitted, double) {
      if (next < checkpoints.size() && iteration == checkpoints[next]) {
        double gap = 0.0;
        for (std::size_t i = 0; i < fitted.size(); ++i) {
          const double d = fitted[i] - target_values(static_cast<Eigen::Index>(i));
          gap += d * d;
        }
        acc[next] += gap / static_cast<double>(fitted.size());
        ++next;
      }
    };
    train(data, quantizer, run_cfg, hook);
  }
  for (double& v : acc) v /= trials;
  return acc;
}

}  // namespace detail

// Trains boosting against the closed-form KRR solution and reports the decay
// curve, an empirical floor (tail average), a crude exponential-decay rate,
// and whether the floor drops when the learning rate is halved.
inline ConvergenceReport verify_convergence(const BinnedDataset& data,
                                            const FeatureQuantizer& quantizer,
                                            const BoostConfig& cfg, int trials,
                                            double cap = 1e6) {
  if (trials < 1) throw ContractError("need at least one trial");
  validate_config(cfg, data.rows);
  const auto rows = training_rows(data);
  const Matrix k = stationary_kernel(data, cfg.depth, rows, rows, cap);
  const Vector y = Eigen::Map<const Vector>(data.targets.data(),
                                            static_cast<Eigen::Index>(data.targets.size()));
  const GPPosterior post = krr_solve(k, y, cfg.regularization);
  const Vector f_star = posterior_mean(post, k);

  std::vector<int> checkpoints{0};
  for (int t = 1; t < cfg.iterations; t = std::max(t + 1, t * 5 / 4)) checkpoints.push_back(t);
  if (cfg.iterations > 0) checkpoints.push_back(cfg.iterations);

  ConvergenceReport report;
  const auto gaps = detail::gap_curve(data, quantizer, cfg, f_star, checkpoints, trials);
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    report.curve.push_back(ConvergencePoint{checkpoints[i], gaps[i], trials});
  }

  double floor = 0.0;
  int floor_points = 0;
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    if (checkpoints[i] >= cfg.iterations * 3 / 4) {
      floor += gaps[i];
      ++floor_points;
    }
  }
  report.floor_estimate = floor_points > 0 ? floor / floor_points : 0.0;

  // log-linear fit on the early decaying segment
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int pts = 0;
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    if (gaps[i] > std::max(4.0 * report.floor_estimate, 1e-280) && checkpoints[i] >= 0) {
      const double x = checkpoints[i];
      const double ly = std::log(gaps[i]);
      sx += x;
      sy += ly;
      sxx += x * x;
      sxy += x * ly;
      ++pts;
    }
  }
  if (pts >= 2 && sxx * pts - sx * sx > 0) {
    report.decay_rate_estimate = -(sxy * pts - sx * sy) / (sxx * pts - sx * sx);
  }

  BoostConfig halved = cfg;
  halved.learning_rate = cfg.learning_rate / 2.0;
  const auto halved_gaps = detail::gap_curve(data, quantizer, halved, f_star, checkpoints, trials);
  double halved_floor = 0.0;
  int halved_points = 0;
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    if (checkpoints[i] >= cfg.iterations * 3 / 4) {
      halved_floor += halved_gaps[i];
      ++halved_points;
    }
  }
  report.halved_lr_floor = halved_points > 0 ? halved_floor / halved_points : 0.0;
  // a run that reaches machine precision has no plateau left to shrink
  const double initial_gap = report.curve.empty() ? 0.0 : report.curve.front().mean_squared_gap;
  report.floor_shrinks_when_lr_halved =
      report.halved_lr_floor <= 0.75 * report.floor_estimate ||
      report.halved_lr_floor <= 1e-15 * initial_gap;
  return report;
}

}  // namespace kgb
