#pragma once

#include "crossfit/design.hpp"

namespace crossfit {

// Plain logistic regression ignoring both random effects.
struct LrFit {
  VectorXd beta;
  MatrixXd cov;  // (X' W X)^{-1} at the estimate
  int iterations = 0;
  bool converged = false;
};

// Newton / IRLS with step halving on deviance increase. Stops once the score
// max-norm drops below tol or the Newton step stalls at rounding level.
// Throws DegenerateFitError on (quasi-)separation, SingularSystemError on a
// singular Hessian.
LrFit irls_logistic(const CrossedDesign& design, double tol = 1e-10, int max_iter = 100);

// sum (Y - pi(x'beta)) x
VectorXd logistic_score(const CrossedDesign& design, const VectorXd& beta);

// sum log(1 + exp(eta)) - y eta, evaluated without overflow.
double logistic_deviance(const CrossedDesign& design, const VectorXd& beta);

// Small-sigma approximation of the expected naive score under a random
// intercept model: (sigma2 / 2) sum pi''(x'beta) x, pi'' = pi(1-pi)(1-2pi).
VectorXd expected_score_bias(const CrossedDesign& design, const VectorXd& beta, double sigma2);

}  // namespace crossfit
