#pragma once

// Random instances shared by the unit tests and the acceptance suite.

#include "crossfit/backfit.hpp"
#include "crossfit/simulate.hpp"

#include <algorithm>
#include <random>
#include <vector>

namespace crossfit::testing {

// Random crossed pattern where every level is observed: cell (i, i mod C)
// and (j mod R, j) are always present, the rest with probability fill.
inline CrossedDesign random_design(std::mt19937_64& rng, Index rows, Index cols, Index p, double fill,
                                   bool intercept = true) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<char> present(static_cast<std::size_t>(rows * cols), 0);
  for (Index i = 0; i < rows; ++i) present[static_cast<std::size_t>(i * cols + i % cols)] = 1;
  for (Index j = 0; j < cols; ++j) present[static_cast<std::size_t>((j % rows) * cols + j)] = 1;
  for (auto& cell : present) {
    if (unif(rng) < fill) cell = 1;
  }
  CrossedDesign d;
  d.n_rows = rows;
  d.n_cols = cols;
  std::vector<int> r_idx;
  std::vector<int> c_idx;
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      if (present[static_cast<std::size_t>(i * cols + j)]) {
        r_idx.push_back(static_cast<int>(i));
        c_idx.push_back(static_cast<int>(j));
      }
    }
  }
  // Shuffle observation order so nothing relies on sorted input.
  std::vector<std::size_t> order(r_idx.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::shuffle(order.begin(), order.end(), rng);
  const Index n = static_cast<Index>(order.size());
  d.row_of.resize(n);
  d.col_of.resize(n);
  for (Index k = 0; k < n; ++k) {
    d.row_of[k] = r_idx[order[static_cast<std::size_t>(k)]];
    d.col_of[k] = c_idx[order[static_cast<std::size_t>(k)]];
  }
  d.x = MatrixXd::NullaryExpr(n, p, [&] { return normal(rng); });
  if (intercept && p > 0) d.x.col(0).setOnes();
  d.y = VectorXd::NullaryExpr(n, [&] { return unif(rng) < 0.35 ? 1.0 : 0.0; });
  return d;
}

inline VectorXd random_weights(std::mt19937_64& rng, Index n, double lo = 0.02, double hi = 0.25) {
  std::uniform_real_distribution<double> unif(lo, hi);
  return VectorXd::NullaryExpr(n, [&] { return unif(rng); });
}

inline VectorXd random_normal(std::mt19937_64& rng, Index n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  return VectorXd::NullaryExpr(n, [&] { return normal(rng); });
}

inline double random_uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Dense N x levels incidence matrix, for oracles only.
inline MatrixXd incidence(const CrossedDesign& d, Factor f) {
  MatrixXd z = MatrixXd::Zero(d.n_obs(), d.levels(f));
  for (Index k = 0; k < d.n_obs(); ++k) z(k, d.index(f)[k]) = 1.0;
  return z;
}

// Coordinatewise error of x against reference y, relative to the reference
// block's max-norm.
inline double block_relative_error(const VectorXd& x, const VectorXd& y) {
  return (x - y).cwiseAbs().maxCoeff() / std::max(y.cwiseAbs().maxCoeff(), 1e-300);
}

}  // namespace crossfit::testing
