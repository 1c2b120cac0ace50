#pragma once

#include "crossfit/design.hpp"

namespace crossfit {

// Observation weights W_ij with their per-row and per-column sums.
struct FactorWeights {
  VectorXd w;
  VectorXd row_sums;
  VectorXd col_sums;

  const VectorXd& sums(Factor f) const { return f == Factor::A ? row_sums : col_sums; }
};

// Throws InputError unless every weight is positive and finite.
FactorWeights make_factor_weights(const CrossedDesign& design, VectorXd w);

// Per-level coefficients and the same values scattered to observations.
struct GroupFit {
  VectorXd coef;
  VectorXd fitted;
};

// Weighted shrunken within-group means:
//   coef[l] = sum_{k in l} w_k r_k / (W_l + 1/sigma2),  fitted = Z_F coef = S_F r.
// sigma2 may be +infinity (no shrinkage); zero, negative and NaN are rejected.
GroupFit apply_group_smoother(const CrossedDesign& design, Factor f, const FactorWeights& weights,
                              double sigma2, const Eigen::Ref<const VectorXd>& r);

// Same problem restricted to sum(coef) == 0. The constrained minimizer is the
// unconstrained one minus lambda / (W_l + 1/sigma2), with lambda chosen to
// zero the sum.
GroupFit apply_centered_smoother(const CrossedDesign& design, Factor f, const FactorWeights& weights,
                                 double sigma2, const Eigen::Ref<const VectorXd>& r);

// W (I - S_F) r. The induced N x N operator is symmetric.
VectorXd symmetric_weighted_residualizer(const CrossedDesign& design, Factor f,
                                         const FactorWeights& weights, double sigma2,
                                         const Eigen::Ref<const VectorXd>& r);

// (I - S_F) X column by column.
MatrixXd residualize_columns(const CrossedDesign& design, Factor f, const FactorWeights& weights,
                             double sigma2, const MatrixXd& x);

}  // namespace crossfit
