#pragma once

#include "crossfit/backfit.hpp"
#include "crossfit/schall.hpp"

namespace crossfit {

// Dense reference implementations for desk-scale checks. Every entry point
// guards its size and throws SizeGuardError rather than running for hours.
inline constexpr Index kMaxOracleLevels = 2000;  // p + R + C, or R + C
inline constexpr Index kMaxOracleObs = 4000;     // N for N x N operators

// T(eta) = [[diag(A), eta B], [eta B', diag(C)]]; the Schall matrix is T(1)
// with A_ii = W_i. + 1/sigma2_A, C_jj = W_.j + 1/sigma2_B and B_ij = W_ij.
struct SchallBlocks {
  VectorXd a_diag;
  VectorXd c_diag;
  MatrixXd b;

  Index rows() const { return a_diag.size(); }
  Index cols() const { return c_diag.size(); }
  MatrixXd dense(double eta = 1.0) const;
  MatrixXd scaled_b() const;  // A^{-1/2} B C^{-1/2}
};

SchallBlocks schall_blocks(const CrossedDesign& design, const FactorWeights& weights, double sigma2_a,
                           double sigma2_b);

struct OracleReport {
  Index n_obs = 0;
  Index n_rows = 0;
  Index n_cols = 0;
  double sigma2_a = 0.0;
  double sigma2_b = 0.0;
  // Block traces of T^{-1}, exact and from the diagonal blocks alone.
  double exact_tr11 = 0.0;
  double exact_tr22 = 0.0;
  double approx_tr11 = 0.0;
  double approx_tr22 = 0.0;
  // Trace-difference series per block and how many terms were summed.
  double err_a = 0.0;
  double err_b = 0.0;
  int series_terms = 0;
  // Spectral quantities of the scaled off-diagonal block.
  double spectral_radius = 0.0;
  double lemma2_bound = 0.0;
  double prop1_bound = 0.0;  // bounds lambda1
  double lambda1 = 0.0;
  double delta = 0.5;
  Index eig_count_above_delta = 0;
};

// Fills the trace fields: exact traces by Cholesky of the dense T, the
// diagonal-block approximations, and the series for their differences
// (summed until a term drops below 1e-14 of the running total, at most 500).
void exact_T_and_traces(const SchallBlocks& blocks, OracleReport& report);

// Fills the spectral fields. rho is the top singular value of the scaled
// block, lambda1 the top eigenvalue of its Gram; eigenvalues of that Gram
// above delta are counted.
void spectral_checks(const SchallBlocks& blocks, OracleReport& report, double delta = 0.5);

// Both of the above on one design.
OracleReport oracle_report(const CrossedDesign& design, const FactorWeights& weights, double sigma2_a,
                           double sigma2_b, double delta = 0.5);

// |tr(T(eta)^{-1}) - tr(T(0)^{-1}) - sum_{k=1..K} eta^{2k} [...]| using
// explicit matrix powers. Throws InputError unless eta * rho < 1.
double lemma1_series_check(const SchallBlocks& blocks, double eta, int truncation);

// Direct Cholesky solve of the full penalized normal equations.
PwlsSolution dense_pwls_solve(const PwlsProblem& problem);

// nu from exact traces; plugs into FitConfig::nu.
NuPair exact_nu(const CrossedDesign& design, const FactorWeights& weights, double sigma2_a, double sigma2_b);

// N x N two-factor smoother Z (Z'WZ + Lambda)^{-1} Z'W.
MatrixXd dense_sab_operator(const CrossedDesign& design, const FactorWeights& weights, double sigma2_a,
                            double sigma2_b);

// Sandwich covariance built from dense N x N matrices.
MatrixXd dense_sandwich_cov(const CrossedDesign& design, const FitState& state);

}  // namespace crossfit
