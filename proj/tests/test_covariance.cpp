#include "support.hpp"

#include "crossfit/covariance.hpp"
#include "crossfit/oracle.hpp"

#include <doctest.h>

using namespace crossfit;

namespace {

FitState random_state(std::mt19937_64& rng, const CrossedDesign& d, double s2a, double s2b) {
  FitState s = initial_state(d);
  s.w = testing::random_weights(rng, d.n_obs(), 0.05, 0.25);
  s.sigma2_a = s2a;
  s.sigma2_b = s2b;
  return s;
}

double frobenius_relative(const MatrixXd& x, const MatrixXd& ref) { return (x - ref).norm() / ref.norm(); }

MatrixXd dense_sigma(const CrossedDesign& d, const VectorXd& w, double s2a, double s2b) {
  const MatrixXd za = testing::incidence(d, Factor::A);
  const MatrixXd zb = testing::incidence(d, Factor::B);
  MatrixXd sigma = s2a * za * za.transpose() + s2b * zb * zb.transpose();
  sigma.diagonal() += w.cwiseInverse();
  return sigma;
}

}  // namespace

TEST_CASE("working covariance matches its dense form and is symmetric") {
  std::mt19937_64 rng(71);
  const CrossedDesign d = testing::random_design(rng, 9, 7, 1, 0.3);
  const VectorXd w = testing::random_weights(rng, d.n_obs());
  const MatrixXd sigma = dense_sigma(d, w, 0.7, 0.3);
  for (int rep = 0; rep < 10; ++rep) {
    const VectorXd u = testing::random_normal(rng, d.n_obs());
    const VectorXd v = testing::random_normal(rng, d.n_obs());
    const VectorXd su = apply_working_covariance(d, w, 0.7, 0.3, u);
    CHECK((su - sigma * u).cwiseAbs().maxCoeff() < 1e-10 * su.cwiseAbs().maxCoeff());
    CHECK(std::abs(v.dot(su) - u.dot(apply_working_covariance(d, w, 0.7, 0.3, v))) < 1e-10 * su.norm() * v.norm());
  }
}

TEST_CASE("two-factor sandwich matches the dense construction") {
  std::mt19937_64 rng(72);
  for (int rep = 0; rep < 3; ++rep) {
    const CrossedDesign d = testing::random_design(rng, 25, 20, 3, 0.25);
    const FitState s = random_state(rng, d, 0.64, 0.16);
    const MatrixXd fast = sandwich_cov_two_factor(d, s);
    CHECK(frobenius_relative(fast, dense_sandwich_cov(d, s)) < 1e-6);
    CHECK((fast - fast.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("vanishing variances give the weighted least squares covariance") {
  std::mt19937_64 rng(73);
  const CrossedDesign d = testing::random_design(rng, 12, 10, 2, 0.3);
  const FitState s = random_state(rng, d, 1e-9, 1e-9);
  const MatrixXd wls = (d.x.transpose() * s.w.asDiagonal() * d.x).inverse();
  CHECK(frobenius_relative(sandwich_cov_two_factor(d, s), wls) < 1e-6);
  CHECK(frobenius_relative(sandwich_cov_one_factor(d, s), wls) < 1e-6);
}

TEST_CASE("random effects inflate the intercept variance") {
  // Balanced 6 x 6 grid, intercept only, equal weights.
  CrossedDesign d;
  d.n_rows = d.n_cols = 6;
  d.row_of.resize(36);
  d.col_of.resize(36);
  for (int k = 0; k < 36; ++k) {
    d.row_of[k] = k / 6;
    d.col_of[k] = k % 6;
  }
  d.y = VectorXd::Zero(36);
  d.x = MatrixXd::Ones(36, 1);
  FitState s = initial_state(d);
  s.sigma2_a = 0.5;
  s.sigma2_b = 0.2;
  const double iid = 1.0 / s.w.sum();
  CHECK(sandwich_cov_two_factor(d, s)(0, 0) > iid);
  CHECK(sandwich_cov_one_factor(d, s)(0, 0) > iid);
}

TEST_CASE("one-factor sandwich matches its dense form") {
  std::mt19937_64 rng(74);
  const CrossedDesign d = testing::random_design(rng, 15, 12, 3, 0.3);
  const FitState s = random_state(rng, d, 0.8, 0.3);
  const MatrixXd za = testing::incidence(d, Factor::A);
  MatrixXd gram = za.transpose() * s.w.asDiagonal() * za;
  gram.diagonal().array() += 1.0 / s.sigma2_a;
  const MatrixXd smoother = za * gram.inverse() * za.transpose() * s.w.asDiagonal();
  const Index n = d.n_obs();
  const MatrixXd wsx = s.w.asDiagonal() * (MatrixXd::Identity(n, n) - smoother) * d.x;
  const MatrixXd bread = (d.x.transpose() * wsx).inverse();
  const MatrixXd dense = bread * wsx.transpose() * dense_sigma(d, s.w, s.sigma2_a, 0.0) * wsx * bread.transpose();
  CHECK(frobenius_relative(sandwich_cov_one_factor(d, s), dense) < 1e-8);
}

TEST_CASE("one and two factors agree with a single column at the variance floor") {
  std::mt19937_64 rng(75);
  const CrossedDesign d = testing::random_design(rng, 20, 1, 2, 0.0);
  const FitState s = random_state(rng, d, 0.7, 1e-8);
  CHECK(frobenius_relative(sandwich_cov_two_factor(d, s), sandwich_cov_one_factor(d, s)) < 1e-6);
}

TEST_CASE("covariance ratios") {
  const MatrixXd base = (MatrixXd(2, 2) << 2.0, 0.3, 0.3, 1.0).finished();
  SUBCASE("identical inputs") {
    const CovReport r = covariance_ratios(base, base, base);
    CHECK((r.naivete.array() - 1.0).abs().maxCoeff() < 1e-14);
    CHECK((r.inefficiency.array() - 1.0).abs().maxCoeff() < 1e-14);
    CHECK(r.max_naivete == doctest::Approx(1.0));
    CHECK(r.max_inefficiency == doctest::Approx(1.0));
  }
  SUBCASE("scaled input") {
    const CovReport r = covariance_ratios(base, 4.0 * base, base);
    CHECK((r.naivete.array() - 4.0).abs().maxCoeff() < 1e-14);
    CHECK(r.max_naivete == doctest::Approx(4.0));
  }
  SUBCASE("the worst combination dominates the coordinates") {
    const MatrixXd other = (MatrixXd(2, 2) << 3.0, -0.5, -0.5, 1.5).finished();
    const CovReport r = covariance_ratios(base, other, base);
    CHECK(r.max_naivete >= r.naivete.maxCoeff() - 1e-12);
  }
  SUBCASE("indefinite input is rejected") {
    const MatrixXd bad = (MatrixXd(2, 2) << 1.0, 2.0, 2.0, 1.0).finished();
    CHECK_THROWS_AS(covariance_ratios(base, bad, base), InputError);
    const MatrixXd asym = (MatrixXd(2, 2) << 1.0, 0.2, 0.0, 1.0).finished();
    CHECK_THROWS_AS(covariance_ratios(asym, base, base), InputError);
  }
}

TEST_CASE("plain logistic regression understates the intercept variance on crossed data") {
  const SimulatedData data = simulate(preset_config('a', 1e4, 76));
  const FitResult glmm = fit(data.design);
  const LrFit lr = irls_logistic(data.design);
  const CovReport r = naivete_and_inefficiency(data.design, glmm.state, lr);
  CHECK(r.naivete[0] > 1.0);
  CHECK(r.max_naivete >= r.naivete.maxCoeff() - 1e-9);
  CHECK((r.naivete.array() >= 0.0).all());
  CHECK((r.inefficiency.array() >= 0.0).all());
}
