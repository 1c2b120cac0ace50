#pragma once

#include "crossfit/smoother.hpp"

#include <vector>

namespace crossfit {

// Penalized weighted least squares with fixed weights and variances:
//   min_{beta,a,b} sum W (z - x'beta - a_i - b_j)^2 + |a|^2/sigma2_a + |b|^2/sigma2_b
struct PwlsProblem {
  const CrossedDesign& design;
  FactorWeights weights;
  VectorXd z;
  double sigma2_a = 1.0;
  double sigma2_b = 1.0;
  double tol = 1e-8;      // on squared relative change of zeta per sweep
  int max_sweeps = 1000;
  bool track_objective = false;  // record pl() after every half step
};

struct PwlsSolution {
  VectorXd beta;
  VectorXd a;
  VectorXd b;
  VectorXd zeta;  // X beta + Z_A a + Z_B b
  int sweeps_used = 0;
  double objective = 0.0;
  bool converged = false;
  std::vector<double> objective_trace;  // initial value, then one per half step
};

// One clubbed half step: fixed effects solved jointly with one factor.
struct ClubStep {
  VectorXd beta;
  VectorXd effects;
};

// Holds (I - S_F) X and the factorized p x p Gram X'W(I - S_F)X for both
// factors. Both depend only on the weights and variances, so one instance
// serves every sweep of a solve.
class ClubbedSolver {
 public:
  explicit ClubbedSolver(const PwlsProblem& problem);

  // Minimizes pl over (beta, a) with b fixed.
  ClubStep step_a(const VectorXd& b) const;
  // Minimizes pl over (beta, b) with a fixed.
  ClubStep step_b(const VectorXd& a) const;

 private:
  struct Side {
    Factor factor;
    double sigma2;
    MatrixXd residualized_x;
    Eigen::ColPivHouseholderQR<MatrixXd> gram;
  };

  Side build_side(Factor f, double sigma2) const;
  ClubStep step(const Side& side, const VectorXd& other_effects) const;

  const PwlsProblem& problem_;
  Side side_a_;
  Side side_b_;
};

ClubStep club_step_a(const PwlsProblem& problem, const VectorXd& b_current);
ClubStep club_step_b(const PwlsProblem& problem, const VectorXd& a_current);

// Alternates club_step_a and club_step_b until
//   |zeta_k - zeta_{k-1}|^2 < tol * |zeta_{k-1}|^2.
// A warm start supplies the initial (beta, a, b); zeros otherwise. Hitting
// max_sweeps returns the last iterate with converged == false.
PwlsSolution solve_pwls_clubbed(const PwlsProblem& problem, const PwlsSolution* warm_start = nullptr);

struct SabOptions {
  double tol = 1e-8;
  int max_sweeps = 1000;
  bool centered = true;
};

struct SabFit {
  VectorXd a;
  VectorXd b;
  VectorXd fitted;  // S_AB r
  int sweeps = 0;
};

// Two-factor ridge smoother applied to a generic response by backfitting the
// two blocks of estimating equations. With centered operators the fit is
// restricted to sum(a) == sum(b) == 0. The bread X'W(I - S)X moves, but the
// GLS map (X'W(I - S)X)^-1 X'W(I - S) does not when X carries an intercept.
// Throws ConvergenceError at the sweep cap.
SabFit apply_sab(const CrossedDesign& design, const FactorWeights& weights, double sigma2_a,
                 double sigma2_b, const Eigen::Ref<const VectorXd>& r, const SabOptions& options = {});

// apply_sab over each column of x (in parallel); returns S_AB x.
MatrixXd apply_sab_columns(const CrossedDesign& design, const FactorWeights& weights, double sigma2_a,
                           double sigma2_b, const MatrixXd& x, const SabOptions& options = {});

double penalized_objective(const CrossedDesign& design, const VectorXd& w, const VectorXd& z,
                           const VectorXd& beta, const VectorXd& a, const VectorXd& b, double sigma2_a,
                           double sigma2_b);

// Linear predictor X beta + Z_A a + Z_B b.
VectorXd linear_predictor(const CrossedDesign& design, const VectorXd& beta, const VectorXd& a,
                          const VectorXd& b);

}  // namespace crossfit
