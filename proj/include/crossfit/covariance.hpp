#pragma once

#include "crossfit/backfit.hpp"
#include "crossfit/logistic.hpp"
#include "crossfit/schall.hpp"

namespace crossfit {

struct CovarianceOptions {
  double tol = 1e-18;  // backfitting tolerance for S_AB X
  int max_sweeps = 20000;
};

// Sigma v = W^{-1} v + sigma2_a Z_A Z_A' v + sigma2_b Z_B Z_B' v, the
// covariance of the working response applied in O(N).
VectorXd apply_working_covariance(const CrossedDesign& design, const VectorXd& w, double sigma2_a,
                                  double sigma2_b, const VectorXd& v);

// Sandwich covariance of beta-hat at a converged two-factor fit.
MatrixXd sandwich_cov_two_factor(const CrossedDesign& design, const FitState& state,
                                 const CovarianceOptions& options = {});

// One-factor version: S_A only and Sigma = sigma2_a Z_A Z_A' + W^{-1}.
MatrixXd sandwich_cov_one_factor(const CrossedDesign& design, const FitState& state);

// Variance of the plain logistic estimator under the crossed model: logistic
// bread (X'W X)^{-1} around the meat X'W Sigma W X, all at mu-hat_LR.
MatrixXd glmm_cov_of_logistic(const CrossedDesign& design, const LrFit& lr, double sigma2_a, double sigma2_b);

struct CovReport {
  MatrixXd cov_glmm;        // cov_GLMM(beta_GLMM)
  MatrixXd cov_lr_naive;    // cov_LR(beta_LR)
  MatrixXd cov_glmm_of_lr;  // cov_GLMM(beta_LR)
  VectorXd naivete;
  VectorXd inefficiency;
  double max_naivete = 0.0;
  double max_inefficiency = 0.0;
};

// Per-coefficient naivete and inefficiency ratios plus their worst linear
// combinations (largest generalized eigenvalues). Throws InputError when an
// input is not symmetric positive semidefinite.
CovReport covariance_ratios(const MatrixXd& cov_lr_naive, const MatrixXd& cov_glmm_of_lr,
                            const MatrixXd& cov_glmm);

CovReport naivete_and_inefficiency(const CrossedDesign& design, const FitState& glmm, const LrFit& lr,
                                   const CovarianceOptions& options = {});

}  // namespace crossfit
