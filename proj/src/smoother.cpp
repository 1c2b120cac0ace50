#include "crossfit/smoother.hpp"

#include "crossfit/parallel.hpp"

#include <cmath>

namespace crossfit {

namespace {

void check_sigma2(double sigma2) {
  if (!(sigma2 > 0.0)) throw InputError("variance component must be positive");
}

void check_length(const CrossedDesign& design, Index len) {
  if (len != design.n_obs()) throw InputError("vector length does not match the number of observations");
}

VectorXd denominators(const FactorWeights& weights, Factor f, double sigma2) {
  return weights.sums(f).array() + 1.0 / sigma2;
}

// Z_F' (w * r) in one pass, without an N-length temporary.
VectorXd weighted_gather(const CrossedDesign& design, Factor f, const VectorXd& w,
                         const Eigen::Ref<const VectorXd>& r) {
  const VectorXi& index = design.index(f);
  VectorXd out = VectorXd::Zero(design.levels(f));
  for (Index k = 0; k < index.size(); ++k) out[index[k]] += w[k] * r[k];
  return out;
}

}  // namespace

FactorWeights make_factor_weights(const CrossedDesign& design, VectorXd w) {
  check_length(design, w.size());
  if (!w.allFinite() || (w.array() <= 0.0).any()) {
    throw InputError("observation weights must be positive and finite");
  }
  FactorWeights out;
  out.row_sums = segment_sum(design.row_of, design.n_rows, w);
  out.col_sums = segment_sum(design.col_of, design.n_cols, w);
  out.w = std::move(w);
  return out;
}

GroupFit apply_group_smoother(const CrossedDesign& design, Factor f, const FactorWeights& weights,
                              double sigma2, const Eigen::Ref<const VectorXd>& r) {
  check_sigma2(sigma2);
  check_length(design, r.size());
  GroupFit out;
  out.coef = weighted_gather(design, f, weights.w, r).cwiseQuotient(denominators(weights, f, sigma2));
  out.fitted = scatter(design, f, out.coef);
  return out;
}

GroupFit apply_centered_smoother(const CrossedDesign& design, Factor f, const FactorWeights& weights,
                                 double sigma2, const Eigen::Ref<const VectorXd>& r) {
  check_sigma2(sigma2);
  check_length(design, r.size());
  const VectorXd inv_denom = denominators(weights, f, sigma2).cwiseInverse();
  GroupFit out;
  out.coef = weighted_gather(design, f, weights.w, r).cwiseProduct(inv_denom);
  const double lambda = out.coef.sum() / inv_denom.sum();
  out.coef -= lambda * inv_denom;
  out.fitted = scatter(design, f, out.coef);
  return out;
}

VectorXd symmetric_weighted_residualizer(const CrossedDesign& design, Factor f,
                                         const FactorWeights& weights, double sigma2,
                                         const Eigen::Ref<const VectorXd>& r) {
  const GroupFit fit = apply_group_smoother(design, f, weights, sigma2, r);
  return weights.w.cwiseProduct(r - fit.fitted);
}

MatrixXd residualize_columns(const CrossedDesign& design, Factor f, const FactorWeights& weights,
                             double sigma2, const MatrixXd& x) {
  check_sigma2(sigma2);
  check_length(design, x.rows());
  MatrixXd out(x.rows(), x.cols());
  parallel_for(x.cols(), [&](Index q) {
    out.col(q) = x.col(q) - apply_group_smoother(design, f, weights, sigma2, x.col(q)).fitted;
  });
  return out;
}

}  // namespace crossfit
