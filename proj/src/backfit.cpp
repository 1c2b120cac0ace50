#include "crossfit/backfit.hpp"

#include "crossfit/parallel.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace crossfit {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Squared relative change test. The floor keeps iterates that tend to zero
// from stalling the rule.
bool settled(double change_sq, double previous_sq, double scale_sq, double tol) {
  return change_sq < tol * std::max(previous_sq, kEps * scale_sq) || change_sq == 0.0;
}

}  // namespace

VectorXd linear_predictor(const CrossedDesign& design, const VectorXd& beta, const VectorXd& a,
                          const VectorXd& b) {
  VectorXd eta = design.x * beta;
  eta += scatter(design, Factor::A, a);
  eta += scatter(design, Factor::B, b);
  return eta;
}

double penalized_objective(const CrossedDesign& design, const VectorXd& w, const VectorXd& z,
                           const VectorXd& beta, const VectorXd& a, const VectorXd& b, double sigma2_a,
                           double sigma2_b) {
  const VectorXd resid = z - linear_predictor(design, beta, a, b);
  return w.dot(resid.cwiseAbs2()) + a.squaredNorm() / sigma2_a + b.squaredNorm() / sigma2_b;
}

// ---------------------------------------------------------------------------
// Clubbed half steps
// ---------------------------------------------------------------------------

ClubbedSolver::ClubbedSolver(const PwlsProblem& problem)
    : problem_(problem),
      side_a_(build_side(Factor::A, problem.sigma2_a)),
      side_b_(build_side(Factor::B, problem.sigma2_b)) {}

ClubbedSolver::Side ClubbedSolver::build_side(Factor f, double sigma2) const {
  const auto& d = problem_.design;
  if (problem_.z.size() != d.n_obs()) throw InputError("working response has wrong length");
  Side side{f, sigma2, residualize_columns(d, f, problem_.weights, sigma2, d.x), {}};
  // X'W(I - S_F)X; symmetric because W S_F is.
  MatrixXd gram = d.x.transpose() * problem_.weights.w.asDiagonal() * side.residualized_x;
  gram = 0.5 * (gram + gram.transpose()).eval();
  side.gram.compute(gram);
  if (side.gram.rank() < gram.cols()) {
    throw SingularSystemError("fixed-effect Gram matrix is singular after residualizing on factor " +
                              std::string(f == Factor::A ? "A" : "B"));
  }
  return side;
}

ClubStep ClubbedSolver::step(const Side& side, const VectorXd& other_effects) const {
  const auto& d = problem_.design;
  const Factor other = side.factor == Factor::A ? Factor::B : Factor::A;
  const VectorXd u = problem_.z - scatter(d, other, other_effects);
  // X'W(I - S)u == ((I - S)X)' W u by symmetry of W(I - S).
  const VectorXd rhs = side.residualized_x.transpose() * problem_.weights.w.cwiseProduct(u);
  ClubStep out;
  out.beta = side.gram.solve(rhs);
  out.effects = apply_group_smoother(d, side.factor, problem_.weights, side.sigma2, u - d.x * out.beta).coef;
  return out;
}

ClubStep ClubbedSolver::step_a(const VectorXd& b) const { return step(side_a_, b); }
ClubStep ClubbedSolver::step_b(const VectorXd& a) const { return step(side_b_, a); }

ClubStep club_step_a(const PwlsProblem& problem, const VectorXd& b_current) {
  return ClubbedSolver(problem).step_a(b_current);
}

ClubStep club_step_b(const PwlsProblem& problem, const VectorXd& a_current) {
  return ClubbedSolver(problem).step_b(a_current);
}

// ---------------------------------------------------------------------------
// Full solve
// ---------------------------------------------------------------------------

PwlsSolution solve_pwls_clubbed(const PwlsProblem& problem, const PwlsSolution* warm_start) {
  const auto& d = problem.design;
  if (!(problem.tol > 0.0)) throw InputError("tolerance must be positive");
  if (problem.max_sweeps < 1) throw InputError("max_sweeps must be at least 1");

  const ClubbedSolver solver(problem);
  const auto objective = [&](const VectorXd& beta, const VectorXd& a, const VectorXd& b) {
    return penalized_objective(d, problem.weights.w, problem.z, beta, a, b, problem.sigma2_a,
                               problem.sigma2_b);
  };

  PwlsSolution sol;
  if (warm_start != nullptr) {
    sol.beta = warm_start->beta;
    sol.a = warm_start->a;
    sol.b = warm_start->b;
  } else {
    sol.beta = VectorXd::Zero(d.n_features());
    sol.a = VectorXd::Zero(d.n_rows);
    sol.b = VectorXd::Zero(d.n_cols);
  }
  if (sol.beta.size() != d.n_features() || sol.a.size() != d.n_rows || sol.b.size() != d.n_cols) {
    throw InputError("warm start does not match the design");
  }
  sol.zeta = linear_predictor(d, sol.beta, sol.a, sol.b);
  if (problem.track_objective) sol.objective_trace.push_back(objective(sol.beta, sol.a, sol.b));

  const double scale_sq = problem.z.squaredNorm();
  for (int sweep = 1; sweep <= problem.max_sweeps; ++sweep) {
    const ClubStep half = solver.step_a(sol.b);
    sol.a = half.effects;
    if (problem.track_objective) sol.objective_trace.push_back(objective(half.beta, sol.a, sol.b));

    const ClubStep full = solver.step_b(sol.a);
    sol.beta = full.beta;
    sol.b = full.effects;

    VectorXd zeta = linear_predictor(d, sol.beta, sol.a, sol.b);
    if (!zeta.allFinite()) throw ConvergenceError("clubbed backfitting produced non-finite values");
    if (problem.track_objective) sol.objective_trace.push_back(objective(sol.beta, sol.a, sol.b));

    const double change_sq = (zeta - sol.zeta).squaredNorm();
    const double previous_sq = sol.zeta.squaredNorm();
    sol.zeta = std::move(zeta);
    sol.sweeps_used = sweep;
    if (settled(change_sq, previous_sq, scale_sq, problem.tol)) {
      sol.converged = true;
      break;
    }
  }
  sol.objective = objective(sol.beta, sol.a, sol.b);
  if (!std::isfinite(sol.objective)) throw ConvergenceError("penalized objective is not finite");
  return sol;
}

// ---------------------------------------------------------------------------
// Two-factor smoother
// ---------------------------------------------------------------------------

SabFit apply_sab(const CrossedDesign& design, const FactorWeights& weights, double sigma2_a,
                 double sigma2_b, const Eigen::Ref<const VectorXd>& r, const SabOptions& options) {
  if (r.size() != design.n_obs()) throw InputError("response has wrong length");
  const auto smooth = options.centered ? apply_centered_smoother : apply_group_smoother;

  SabFit fit;
  fit.a = VectorXd::Zero(design.n_rows);
  fit.b = VectorXd::Zero(design.n_cols);
  fit.fitted = VectorXd::Zero(design.n_obs());
  const double scale_sq = r.squaredNorm();
  for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    fit.a = smooth(design, Factor::A, weights, sigma2_a, r - scatter(design, Factor::B, fit.b)).coef;
    fit.b = smooth(design, Factor::B, weights, sigma2_b, r - scatter(design, Factor::A, fit.a)).coef;
    VectorXd fitted = scatter(design, Factor::A, fit.a) + scatter(design, Factor::B, fit.b);
    const double change_sq = (fitted - fit.fitted).squaredNorm();
    const double previous_sq = fit.fitted.squaredNorm();
    fit.fitted = std::move(fitted);
    fit.sweeps = sweep;
    if (settled(change_sq, previous_sq, scale_sq, options.tol)) return fit;
  }
  throw ConvergenceError("two-factor backfitting did not converge in " +
                         std::to_string(options.max_sweeps) + " sweeps");
}

MatrixXd apply_sab_columns(const CrossedDesign& design, const FactorWeights& weights, double sigma2_a,
                           double sigma2_b, const MatrixXd& x, const SabOptions& options) {
  MatrixXd out(x.rows(), x.cols());
  parallel_for(x.cols(), [&](Index q) {
    out.col(q) = apply_sab(design, weights, sigma2_a, sigma2_b, x.col(q), options).fitted;
  });
  return out;
}

}  // namespace crossfit
