#include "crossfit/covariance.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace crossfit {

namespace {

MatrixXd symmetrized(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

// (X'M)^{-1} (M' Sigma M) (M'X)^{-1} with M = W_S X given column-wise.
MatrixXd sandwich(const CrossedDesign& design, const MatrixXd& wsx, const VectorXd& w, double sigma2_a,
                  double sigma2_b) {
  const MatrixXd bread = symmetrized(design.x.transpose() * wsx);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(bread);
  if (qr.rank() < bread.cols()) throw SingularSystemError("sandwich bread matrix is singular");

  // M' Sigma M, using the low-rank-plus-diagonal form of Sigma.
  const Index p = wsx.cols();
  MatrixXd meat = wsx.transpose() * w.cwiseInverse().asDiagonal() * wsx;
  if (sigma2_a > 0.0) {
    MatrixXd ga(design.n_rows, p);
    for (Index q = 0; q < p; ++q) ga.col(q) = gather(design, Factor::A, wsx.col(q));
    meat += sigma2_a * ga.transpose() * ga;
  }
  if (sigma2_b > 0.0) {
    MatrixXd gb(design.n_cols, p);
    for (Index q = 0; q < p; ++q) gb.col(q) = gather(design, Factor::B, wsx.col(q));
    meat += sigma2_b * gb.transpose() * gb;
  }
  const MatrixXd left = qr.solve(symmetrized(meat));
  return symmetrized(qr.solve(left.transpose()));
}

void check_psd(const MatrixXd& m, const char* name) {
  if (m.rows() != m.cols()) throw InputError(std::string(name) + " is not square");
  const double scale = std::max(1e-300, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw InputError(std::string(name) + " is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrized(m), Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
    throw InputError(std::string(name) + " is not positive semidefinite");
  }
}

}  // namespace

VectorXd apply_working_covariance(const CrossedDesign& design, const VectorXd& w, double sigma2_a,
                                  double sigma2_b, const VectorXd& v) {
  VectorXd out = v.cwiseQuotient(w);
  out += sigma2_a * scatter(design, Factor::A, gather(design, Factor::A, v));
  out += sigma2_b * scatter(design, Factor::B, gather(design, Factor::B, v));
  return out;
}

MatrixXd sandwich_cov_two_factor(const CrossedDesign& design, const FitState& state,
                                 const CovarianceOptions& options) {
  const FactorWeights weights = make_factor_weights(design, state.w);
  // Centered smoothing is only equivalent when an intercept absorbs the
  // sum-zero direction.
  const SabOptions sab{options.tol, options.max_sweeps, has_intercept(design)};
  const MatrixXd smoothed = apply_sab_columns(design, weights, state.sigma2_a, state.sigma2_b, design.x, sab);
  const MatrixXd wsx = state.w.asDiagonal() * (design.x - smoothed);
  return sandwich(design, wsx, state.w, state.sigma2_a, state.sigma2_b);
}

MatrixXd sandwich_cov_one_factor(const CrossedDesign& design, const FitState& state) {
  const FactorWeights weights = make_factor_weights(design, state.w);
  const MatrixXd wsx =
      state.w.asDiagonal() * residualize_columns(design, Factor::A, weights, state.sigma2_a, design.x);
  return sandwich(design, wsx, state.w, state.sigma2_a, 0.0);
}

MatrixXd glmm_cov_of_logistic(const CrossedDesign& design, const LrFit& lr, double sigma2_a, double sigma2_b) {
  const VectorXd eta = design.x * lr.beta;
  const VectorXd w = logistic(eta).cwiseProduct(logistic(-eta));
  return sandwich(design, w.asDiagonal() * design.x, w, sigma2_a, sigma2_b);
}

CovReport covariance_ratios(const MatrixXd& cov_lr_naive, const MatrixXd& cov_glmm_of_lr,
                            const MatrixXd& cov_glmm) {
  check_psd(cov_lr_naive, "cov_LR(beta_LR)");
  check_psd(cov_glmm_of_lr, "cov_GLMM(beta_LR)");
  check_psd(cov_glmm, "cov_GLMM(beta_GLMM)");
  if (cov_lr_naive.rows() != cov_glmm_of_lr.rows() || cov_glmm.rows() != cov_glmm_of_lr.rows()) {
    throw InputError("covariance matrices differ in size");
  }

  CovReport report;
  report.cov_lr_naive = symmetrized(cov_lr_naive);
  report.cov_glmm_of_lr = symmetrized(cov_glmm_of_lr);
  report.cov_glmm = symmetrized(cov_glmm);
  report.naivete = report.cov_glmm_of_lr.diagonal().cwiseQuotient(report.cov_lr_naive.diagonal());
  report.inefficiency = report.cov_glmm_of_lr.diagonal().cwiseQuotient(report.cov_glmm.diagonal());

  // max_x x'Ax / x'Bx is the top eigenvalue of A x = lambda B x.
  const auto top = [](const MatrixXd& numer, const MatrixXd& denom) {
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> ges(numer, denom, Eigen::EigenvaluesOnly);
    if (ges.info() != Eigen::Success) throw InputError("denominator covariance is not positive definite");
    return ges.eigenvalues().maxCoeff();
  };
  report.max_naivete = top(report.cov_glmm_of_lr, report.cov_lr_naive);
  report.max_inefficiency = top(report.cov_glmm_of_lr, report.cov_glmm);
  return report;
}

CovReport naivete_and_inefficiency(const CrossedDesign& design, const FitState& glmm, const LrFit& lr,
                                   const CovarianceOptions& options) {
  const MatrixXd cov_glmm = sandwich_cov_two_factor(design, glmm, options);
  const MatrixXd cov_glmm_of_lr = glmm_cov_of_logistic(design, lr, glmm.sigma2_a, glmm.sigma2_b);
  return covariance_ratios(lr.cov, cov_glmm_of_lr, cov_glmm);
}

}  // namespace crossfit
