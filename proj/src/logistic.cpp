#include "crossfit/logistic.hpp"

#include "crossfit/schall.hpp"

#include <cmath>

namespace crossfit {

VectorXd logistic_score(const CrossedDesign& design, const VectorXd& beta) {
  return design.x.transpose() * (design.y - logistic(design.x * beta));
}

double logistic_deviance(const CrossedDesign& design, const VectorXd& beta) {
  const VectorXd eta = design.x * beta;
  double total = 0.0;
  for (Index k = 0; k < eta.size(); ++k) {
    const double t = eta[k];
    const double softplus = t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
    total += softplus - design.y[k] * t;
  }
  return total;
}

LrFit irls_logistic(const CrossedDesign& design, double tol, int max_iter) {
  const Index p = design.n_features();
  LrFit fit;
  fit.beta = VectorXd::Zero(p);
  double deviance = logistic_deviance(design, fit.beta);

  const auto hessian = [&](const VectorXd& beta) {
    const VectorXd eta = design.x * beta;
    const VectorXd v = logistic(eta).cwiseProduct(logistic(-eta));
    MatrixXd h = design.x.transpose() * v.asDiagonal() * design.x;
    return h;
  };

  for (int it = 1; it <= max_iter; ++it) {
    fit.iterations = it;
    const VectorXd score = logistic_score(design, fit.beta);
    if (score.lpNorm<Eigen::Infinity>() < tol) {
      fit.converged = true;
      break;
    }
    Eigen::LDLT<MatrixXd> ldlt(hessian(fit.beta));
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-14 * ldlt.vectorD().maxCoeff()) {
      throw SingularSystemError("logistic Hessian is singular");
    }
    VectorXd step = ldlt.solve(score);

    double trial_dev = logistic_deviance(design, fit.beta + step);
    for (int halvings = 0; trial_dev > deviance && halvings < 40; ++halvings) {
      step *= 0.5;
      trial_dev = logistic_deviance(design, fit.beta + step);
    }
    fit.beta += step;
    deviance = trial_dev;
    if (fit.beta.lpNorm<Eigen::Infinity>() > 50.0) {
      throw DegenerateFitError("logistic coefficients diverge; data look separable");
    }
    if (step.lpNorm<Eigen::Infinity>() <= 1e-13 * (1.0 + fit.beta.lpNorm<Eigen::Infinity>())) {
      fit.converged = true;
      break;
    }
  }

  Eigen::LDLT<MatrixXd> ldlt(hessian(fit.beta));
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw SingularSystemError("logistic Hessian is singular at the estimate");
  }
  fit.cov = ldlt.solve(MatrixXd::Identity(p, p));
  fit.cov = 0.5 * (fit.cov + fit.cov.transpose()).eval();
  return fit;
}

VectorXd expected_score_bias(const CrossedDesign& design, const VectorXd& beta, double sigma2) {
  const VectorXd eta = design.x * beta;
  const VectorXd mu = logistic(eta);
  const VectorXd one_minus = logistic(-eta);
  // 1 - 2 pi == (1 - pi) - pi, exact zero at eta = 0.
  const VectorXd second = mu.cwiseProduct(one_minus).cwiseProduct(one_minus - mu);
  return 0.5 * sigma2 * (design.x.transpose() * second);
}

}  // namespace crossfit
