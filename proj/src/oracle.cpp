#include "crossfit/oracle.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <string>

namespace crossfit {

namespace {

void guard(Index size, Index limit, const char* what) {
  if (size > limit) {
    throw SizeGuardError(std::string(what) + " = " + std::to_string(size) + " exceeds the oracle limit " +
                         std::to_string(limit));
  }
}

double inverse_variance(double sigma2) {
  if (!(sigma2 > 0.0)) throw InputError("variance components must be positive");
  return 1.0 / sigma2;  // 0 for +inf
}

// Dense inverse of the SPD matrix T(1).
MatrixXd schall_inverse(const SchallBlocks& blocks) {
  const MatrixXd t = blocks.dense();
  Eigen::LLT<MatrixXd> llt(t);
  if (llt.info() != Eigen::Success) throw SingularSystemError("Schall matrix is not positive definite");
  return llt.solve(MatrixXd::Identity(t.rows(), t.cols()));
}

// sum_{k>=1} tr(D^{-1} M^k) from the eigendecomposition of M, stopping once
// a term is negligible. Returns the sum and the number of terms used.
std::pair<double, int> trace_series(const MatrixXd& gram, const VectorXd& diag) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
  const VectorXd lambda = eig.eigenvalues();
  const VectorXd weight = eig.eigenvectors().cwiseAbs2().transpose() * diag.cwiseInverse();
  VectorXd power = lambda;
  double total = 0.0;
  int k = 0;
  while (k < 500) {
    ++k;
    const double term = power.dot(weight);
    total += term;
    if (std::abs(term) <= 1e-14 * std::abs(total)) break;
    power = power.cwiseProduct(lambda);
  }
  return {total, k};
}

}  // namespace

MatrixXd SchallBlocks::dense(double eta) const {
  const Index r = rows();
  const Index c = cols();
  MatrixXd t = MatrixXd::Zero(r + c, r + c);
  t.diagonal().head(r) = a_diag;
  t.diagonal().tail(c) = c_diag;
  t.topRightCorner(r, c) = eta * b;
  t.bottomLeftCorner(c, r) = eta * b.transpose();
  return t;
}

MatrixXd SchallBlocks::scaled_b() const {
  return a_diag.cwiseSqrt().cwiseInverse().asDiagonal() * b * c_diag.cwiseSqrt().cwiseInverse().asDiagonal();
}

SchallBlocks schall_blocks(const CrossedDesign& design, const FactorWeights& weights, double sigma2_a,
                           double sigma2_b) {
  guard(design.n_rows + design.n_cols, kMaxOracleLevels, "R + C");
  SchallBlocks blocks;
  blocks.a_diag = weights.row_sums.array() + inverse_variance(sigma2_a);
  blocks.c_diag = weights.col_sums.array() + inverse_variance(sigma2_b);
  blocks.b = MatrixXd::Zero(design.n_rows, design.n_cols);
  for (Index k = 0; k < design.n_obs(); ++k) blocks.b(design.row_of[k], design.col_of[k]) += weights.w[k];
  return blocks;
}

void exact_T_and_traces(const SchallBlocks& blocks, OracleReport& report) {
  guard(blocks.rows() + blocks.cols(), kMaxOracleLevels, "R + C");
  const MatrixXd inv = schall_inverse(blocks);
  report.n_rows = blocks.rows();
  report.n_cols = blocks.cols();
  report.exact_tr11 = inv.topLeftCorner(blocks.rows(), blocks.rows()).trace();
  report.exact_tr22 = inv.bottomRightCorner(blocks.cols(), blocks.cols()).trace();
  report.approx_tr11 = blocks.a_diag.cwiseInverse().sum();
  report.approx_tr22 = blocks.c_diag.cwiseInverse().sum();

  const MatrixXd scaled = blocks.scaled_b();
  const auto [err_a, terms_a] = trace_series(scaled * scaled.transpose(), blocks.a_diag);
  const auto [err_b, terms_b] = trace_series(scaled.transpose() * scaled, blocks.c_diag);
  report.err_a = err_a;
  report.err_b = err_b;
  report.series_terms = std::max(terms_a, terms_b);
}

void spectral_checks(const SchallBlocks& blocks, OracleReport& report, double delta) {
  guard(blocks.rows() + blocks.cols(), kMaxOracleLevels, "R + C");
  const MatrixXd scaled = blocks.scaled_b();
  Eigen::BDCSVD<MatrixXd> svd(scaled);
  report.spectral_radius = svd.singularValues().size() > 0 ? svd.singularValues()[0] : 0.0;

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(scaled * scaled.transpose(), Eigen::EigenvaluesOnly);
  report.lambda1 = eig.eigenvalues().maxCoeff();
  report.delta = delta;
  report.eig_count_above_delta = (eig.eigenvalues().array() > delta).count();

  const VectorXd row_mass = blocks.b.rowwise().sum();
  const VectorXd col_mass = blocks.b.colwise().sum().transpose();
  const double row_bound = (blocks.b * blocks.c_diag.cwiseInverse()).maxCoeff();
  const double col_bound = (blocks.b.transpose() * blocks.a_diag.cwiseInverse()).maxCoeff();
  report.lemma2_bound = std::sqrt(row_bound) * std::sqrt(col_bound);
  report.prop1_bound =
      row_mass.cwiseQuotient(blocks.a_diag).maxCoeff() * col_mass.cwiseQuotient(blocks.c_diag).maxCoeff();
}

OracleReport oracle_report(const CrossedDesign& design, const FactorWeights& weights, double sigma2_a,
                           double sigma2_b, double delta) {
  const SchallBlocks blocks = schall_blocks(design, weights, sigma2_a, sigma2_b);
  OracleReport report;
  report.n_obs = design.n_obs();
  report.sigma2_a = sigma2_a;
  report.sigma2_b = sigma2_b;
  exact_T_and_traces(blocks, report);
  spectral_checks(blocks, report, delta);
  return report;
}

double lemma1_series_check(const SchallBlocks& blocks, double eta, int truncation) {
  guard(blocks.rows() + blocks.cols(), kMaxOracleLevels, "R + C");
  if (truncation < 0) throw InputError("truncation must be nonnegative");
  const MatrixXd scaled = blocks.scaled_b();
  const double rho = Eigen::BDCSVD<MatrixXd>(scaled).singularValues()[0];
  if (!(eta >= 0.0 && eta * rho < 1.0)) throw InputError("the trace series needs 0 <= eta < 1/rho");

  Eigen::LLT<MatrixXd> llt(blocks.dense(eta));
  if (llt.info() != Eigen::Success) throw SingularSystemError("T(eta) is not positive definite");
  const Index n = blocks.rows() + blocks.cols();
  const double exact = llt.solve(MatrixXd::Identity(n, n)).trace();
  const double base = blocks.a_diag.cwiseInverse().sum() + blocks.c_diag.cwiseInverse().sum();

  const MatrixXd left = eta * eta * scaled * scaled.transpose();
  const MatrixXd right = eta * eta * scaled.transpose() * scaled;
  MatrixXd left_power = left;
  MatrixXd right_power = right;
  double series = 0.0;
  for (int k = 1; k <= truncation; ++k) {
    series += left_power.diagonal().cwiseQuotient(blocks.a_diag).sum();
    series += right_power.diagonal().cwiseQuotient(blocks.c_diag).sum();
    left_power = left_power * left;
    right_power = right_power * right;
  }
  return std::abs(exact - base - series);
}

PwlsSolution dense_pwls_solve(const PwlsProblem& problem) {
  const CrossedDesign& d = problem.design;
  const Index p = d.n_features();
  const Index r = d.n_rows;
  const Index c = d.n_cols;
  guard(p + r + c, kMaxOracleLevels, "p + R + C");
  const VectorXd& w = problem.weights.w;

  MatrixXd h = MatrixXd::Zero(p + r + c, p + r + c);
  VectorXd rhs = VectorXd::Zero(p + r + c);
  h.topLeftCorner(p, p) = d.x.transpose() * w.asDiagonal() * d.x;
  rhs.head(p) = d.x.transpose() * w.cwiseProduct(problem.z);
  for (Index k = 0; k < d.n_obs(); ++k) {
    const Index i = p + d.row_of[k];
    const Index j = p + r + d.col_of[k];
    const double wz = w[k] * problem.z[k];
    h.block(0, i, p, 1) += w[k] * d.x.row(k).transpose();
    h.block(0, j, p, 1) += w[k] * d.x.row(k).transpose();
    h(i, i) += w[k];
    h(j, j) += w[k];
    h(i, j) += w[k];
    rhs[i] += wz;
    rhs[j] += wz;
  }
  h.diagonal().segment(p, r).array() += inverse_variance(problem.sigma2_a);
  h.diagonal().tail(c).array() += inverse_variance(problem.sigma2_b);
  h.triangularView<Eigen::StrictlyLower>() = h.transpose();

  Eigen::LLT<MatrixXd> llt(h);
  if (llt.info() != Eigen::Success) throw SingularSystemError("penalized normal equations are singular");
  const VectorXd theta = llt.solve(rhs);

  PwlsSolution sol;
  sol.beta = theta.head(p);
  sol.a = theta.segment(p, r);
  sol.b = theta.tail(c);
  sol.zeta = linear_predictor(d, sol.beta, sol.a, sol.b);
  sol.objective = penalized_objective(d, w, problem.z, sol.beta, sol.a, sol.b, problem.sigma2_a, problem.sigma2_b);
  sol.converged = true;
  return sol;
}

NuPair exact_nu(const CrossedDesign& design, const FactorWeights& weights, double sigma2_a, double sigma2_b) {
  const SchallBlocks blocks = schall_blocks(design, weights, sigma2_a, sigma2_b);
  const MatrixXd inv = schall_inverse(blocks);
  return {inv.topLeftCorner(blocks.rows(), blocks.rows()).trace() / sigma2_a,
          inv.bottomRightCorner(blocks.cols(), blocks.cols()).trace() / sigma2_b};
}

MatrixXd dense_sab_operator(const CrossedDesign& design, const FactorWeights& weights, double sigma2_a,
                            double sigma2_b) {
  guard(design.n_obs(), kMaxOracleObs, "N");
  const SchallBlocks blocks = schall_blocks(design, weights, sigma2_a, sigma2_b);
  MatrixXd z = MatrixXd::Zero(design.n_obs(), design.n_rows + design.n_cols);
  for (Index k = 0; k < design.n_obs(); ++k) {
    z(k, design.row_of[k]) = 1.0;
    z(k, design.n_rows + design.col_of[k]) = 1.0;
  }
  return z * schall_inverse(blocks) * z.transpose() * weights.w.asDiagonal();
}

MatrixXd dense_sandwich_cov(const CrossedDesign& design, const FitState& state) {
  const FactorWeights weights = make_factor_weights(design, state.w);
  const Index n = design.n_obs();
  const MatrixXd sab = dense_sab_operator(design, weights, state.sigma2_a, state.sigma2_b);
  const MatrixXd ws = state.w.asDiagonal() * (MatrixXd::Identity(n, n) - sab);
  const MatrixXd wsx = ws * design.x;

  MatrixXd sigma = state.w.cwiseInverse().asDiagonal();
  for (Index k = 0; k < n; ++k) {
    for (Index l = 0; l < n; ++l) {
      if (design.row_of[k] == design.row_of[l]) sigma(k, l) += state.sigma2_a;
      if (design.col_of[k] == design.col_of[l]) sigma(k, l) += state.sigma2_b;
    }
  }
  const MatrixXd bread_inv = (design.x.transpose() * wsx).inverse();
  return bread_inv * (wsx.transpose() * sigma * wsx) * bread_inv.transpose();
}

}  // namespace crossfit
