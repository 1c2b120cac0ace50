#include "support.hpp"

#include "crossfit/smoother.hpp"

#include <doctest.h>

#include <chrono>
#include <limits>

using namespace crossfit;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

CrossedDesign one_group(const VectorXd& y_dummy) {
  CrossedDesign d;
  const Index n = y_dummy.size();
  d.n_rows = 1;
  d.n_cols = n;
  d.row_of = VectorXi::Zero(n);
  d.col_of = VectorXi::LinSpaced(n, 0, static_cast<int>(n - 1));
  d.y = VectorXd::Zero(n);
  d.x = MatrixXd::Ones(n, 1);
  return d;
}

// Z (Z'WZ + I/sigma2)^{-1} Z'W r formed densely.
VectorXd dense_smooth(const CrossedDesign& d, Factor f, const VectorXd& w, double sigma2, const VectorXd& r) {
  const MatrixXd z = testing::incidence(d, f);
  MatrixXd gram = z.transpose() * w.asDiagonal() * z;
  gram.diagonal().array() += 1.0 / sigma2;
  return z * gram.ldlt().solve(z.transpose() * w.cwiseProduct(r));
}

}  // namespace

TEST_CASE("unshrunk smoother is the weighted group mean") {
  const VectorXd r = (VectorXd(2) << 1, 3).finished();
  const CrossedDesign d = one_group(r);
  const auto fw = make_factor_weights(d, VectorXd::Ones(2));
  const GroupFit g = apply_group_smoother(d, Factor::A, fw, kInf, r);
  CHECK(g.coef[0] == doctest::Approx(2.0));
  CHECK(g.fitted == (VectorXd(2) << 2, 2).finished());
}

TEST_CASE("shrinkage divides by the weight sum plus the inverse variance") {
  const VectorXd r = (VectorXd(2) << 1, 3).finished();
  const CrossedDesign d = one_group(r);
  const auto fw = make_factor_weights(d, VectorXd::Ones(2));
  CHECK(apply_group_smoother(d, Factor::A, fw, 0.5, r).coef[0] == doctest::Approx(1.0));
}

TEST_CASE("smoother matches the dense ridge operator") {
  std::mt19937_64 rng(1);
  const CrossedDesign d = testing::random_design(rng, 5, 4, 1, 0.3);
  const VectorXd w = testing::random_weights(rng, d.n_obs());
  const auto fw = make_factor_weights(d, w);
  for (Factor f : {Factor::A, Factor::B}) {
    const VectorXd r = testing::random_normal(rng, d.n_obs());
    const VectorXd fitted = apply_group_smoother(d, f, fw, 0.7, r).fitted;
    CHECK((fitted - dense_smooth(d, f, w, 0.7, r)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("smoother satisfies its per-level normal equations and contracts") {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 10; ++rep) {
    const CrossedDesign d = testing::random_design(rng, 8, 6, 1, 0.3);
    const VectorXd w = testing::random_weights(rng, d.n_obs());
    const auto fw = make_factor_weights(d, w);
    const double sigma2 = testing::random_uniform(rng, 0.1, 3.0);
    const VectorXd r = testing::random_normal(rng, d.n_obs());
    for (Factor f : {Factor::A, Factor::B}) {
      const GroupFit g = apply_group_smoother(d, f, fw, sigma2, r);
      const VectorXd residual = gather(d, f, w.cwiseProduct(r - g.fitted)) - g.coef / sigma2;
      CHECK(residual.cwiseAbs().maxCoeff() < 1e-10);
      CHECK(g.fitted.dot(w.cwiseProduct(g.fitted)) <= r.dot(w.cwiseProduct(r)));
    }
  }
}

TEST_CASE("centered smoother solves the sum-zero constrained problem") {
  std::mt19937_64 rng(3);
  const CrossedDesign d = testing::random_design(rng, 6, 5, 1, 0.4);
  const VectorXd w = testing::random_weights(rng, d.n_obs());
  const auto fw = make_factor_weights(d, w);
  const double sigma2 = 0.8;
  for (Factor f : {Factor::A, Factor::B}) {
    const VectorXd r = testing::random_normal(rng, d.n_obs());
    const GroupFit g = apply_centered_smoother(d, f, fw, sigma2, r);
    CHECK(std::abs(g.coef.sum()) < 1e-12);

    // KKT system [[Z'WZ + I/s2, 1], [1', 0]] of the constrained problem.
    const Index l = d.levels(f);
    const MatrixXd z = testing::incidence(d, f);
    MatrixXd kkt = MatrixXd::Zero(l + 1, l + 1);
    kkt.topLeftCorner(l, l) = z.transpose() * w.asDiagonal() * z;
    kkt.diagonal().head(l).array() += 1.0 / sigma2;
    kkt.col(l).head(l).setOnes();
    kkt.row(l).head(l).setOnes();
    VectorXd rhs = VectorXd::Zero(l + 1);
    rhs.head(l) = z.transpose() * w.cwiseProduct(r);
    const VectorXd sol = kkt.fullPivLu().solve(rhs);
    CHECK((g.coef - sol.head(l)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("centering two symmetric groups keeps their difference") {
  CrossedDesign d;
  d.n_rows = 2;
  d.n_cols = 2;
  d.row_of = (VectorXi(4) << 0, 0, 1, 1).finished();
  d.col_of = (VectorXi(4) << 0, 1, 0, 1).finished();
  d.y = VectorXd::Zero(4);
  d.x = MatrixXd::Ones(4, 1);
  const auto fw = make_factor_weights(d, VectorXd::Ones(4));
  const VectorXd r = (VectorXd(4) << 3, 3, 1, 1).finished();
  const GroupFit plain = apply_group_smoother(d, Factor::A, fw, 1.0, r);
  const GroupFit centered = apply_centered_smoother(d, Factor::A, fw, 1.0, r);
  CHECK(centered.coef.sum() == doctest::Approx(0.0));
  CHECK(centered.coef[0] - centered.coef[1] == doctest::Approx(plain.coef[0] - plain.coef[1]));
}

TEST_CASE("weighted residualizer") {
  SUBCASE("equal weights and no shrinkage remove the mean") {
    const VectorXd r = (VectorXd(3) << 1, 2, 6).finished();
    const CrossedDesign d = one_group(r);
    const auto fw = make_factor_weights(d, VectorXd::Constant(3, 0.5));
    const VectorXd out = symmetric_weighted_residualizer(d, Factor::A, fw, kInf, r);
    CHECK((out - 0.5 * (r.array() - 3.0).matrix()).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("zero input gives zero output") {
    std::mt19937_64 rng(8);
    const CrossedDesign d = testing::random_design(rng, 4, 4, 1, 0.3);
    const auto fw = make_factor_weights(d, testing::random_weights(rng, d.n_obs()));
    CHECK(symmetric_weighted_residualizer(d, Factor::B, fw, 1.0, VectorXd::Zero(d.n_obs())).isZero(0.0));
  }
  SUBCASE("the induced operator is symmetric") {
    std::mt19937_64 rng(9);
    const CrossedDesign d = testing::random_design(rng, 6, 5, 1, 0.3);
    const auto fw = make_factor_weights(d, testing::random_weights(rng, d.n_obs()));
    for (int rep = 0; rep < 20; ++rep) {
      const VectorXd u = testing::random_normal(rng, d.n_obs());
      const VectorXd v = testing::random_normal(rng, d.n_obs());
      for (Factor f : {Factor::A, Factor::B}) {
        const double vu = v.dot(symmetric_weighted_residualizer(d, f, fw, 0.6, u));
        const double uv = u.dot(symmetric_weighted_residualizer(d, f, fw, 0.6, v));
        CHECK(std::abs(vu - uv) < 1e-10);
      }
    }
  }
}

TEST_CASE("residualize_columns applies the smoother per column") {
  std::mt19937_64 rng(10);
  const CrossedDesign d = testing::random_design(rng, 7, 6, 3, 0.3);
  const auto fw = make_factor_weights(d, testing::random_weights(rng, d.n_obs()));
  const MatrixXd res = residualize_columns(d, Factor::B, fw, 1.3, d.x);
  for (Index q = 0; q < d.n_features(); ++q) {
    const VectorXd expect = d.x.col(q) - apply_group_smoother(d, Factor::B, fw, 1.3, d.x.col(q)).fitted;
    CHECK((res.col(q) - expect).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("invalid variances and weights are rejected") {
  std::mt19937_64 rng(12);
  const CrossedDesign d = testing::random_design(rng, 3, 3, 1, 0.3);
  const auto fw = make_factor_weights(d, VectorXd::Ones(d.n_obs()));
  const VectorXd r = VectorXd::Ones(d.n_obs());
  CHECK_THROWS_AS(apply_group_smoother(d, Factor::A, fw, 0.0, r), InputError);
  CHECK_THROWS_AS(apply_group_smoother(d, Factor::A, fw, -1.0, r), InputError);
  CHECK_THROWS_AS(apply_group_smoother(d, Factor::A, fw, std::nan(""), r), InputError);
  VectorXd bad = VectorXd::Ones(d.n_obs());
  bad[0] = 0.0;
  CHECK_THROWS_AS(make_factor_weights(d, bad), InputError);
}

TEST_CASE("one smoother application scales linearly in N") {
  const auto time_for = [](double s) {
    SimConfig cfg = preset_config('a', s, 3);
    const CrossedDesign d = sample_pattern(cfg);
    const auto fw = make_factor_weights(d, VectorXd::Constant(d.n_obs(), 0.2));
    const VectorXd r = VectorXd::LinSpaced(d.n_obs(), -1.0, 1.0);
    double best = 1e300;
    for (int rep = 0; rep < 7; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto g = apply_group_smoother(d, Factor::A, fw, 1.0, r);
      const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      CHECK(g.coef.size() == d.n_rows);
      best = std::min(best, dt);
    }
    return best / static_cast<double>(d.n_obs());
  };
  // Both sizes are past the last-level cache and past the size at which the
  // allocator hands out fresh pages, so the comparison is between like
  // memory regimes.
  const double small = time_for(5e6);
  const double large = time_for(2e7);
  // Four times the data should cost four times as much, give or take 40%.
  CHECK(large / small < 1.4);
  CHECK(large / small > 0.6);
}
