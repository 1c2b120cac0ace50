#include "crossfit/schall.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>

namespace crossfit {

FitState initial_state(const CrossedDesign& design) {
  FitState s;
  s.beta = VectorXd::Zero(design.n_features());
  s.a = VectorXd::Zero(design.n_rows);
  s.b = VectorXd::Zero(design.n_cols);
  s.zeta = VectorXd::Zero(design.n_obs());
  refresh_weights(s);
  return s;
}

VectorXd working_response(const CrossedDesign& design, const FitState& state) {
  const Index n = design.n_obs();
  if (state.zeta.size() != n || state.mu.size() != n) throw InputError("state does not match design");
  VectorXd z(n);
  for (Index k = 0; k < n; ++k) {
    const double mu = state.mu[k];
    // 1 - mu from the linear predictor to avoid cancellation near mu = 1.
    const double one_minus_mu = logistic(-state.zeta[k]);
    if (!(mu > 0.0) || !(one_minus_mu > 0.0)) {
      throw DegenerateFitError("fitted probability reached 0 or 1; consider a weight floor");
    }
    // (Y - mu) / (mu (1 - mu)) simplifies to 1/mu or -1/(1 - mu).
    z[k] = state.zeta[k] + (design.y[k] == 1.0 ? 1.0 / mu : -1.0 / one_minus_mu);
  }
  return z;
}

void refresh_weights(FitState& state, double weight_floor) {
  state.mu = logistic(state.zeta);
  const VectorXd one_minus_mu = logistic(-state.zeta);
  state.w = state.mu.cwiseProduct(one_minus_mu) / state.phi;
  if (weight_floor > 0.0) state.w = state.w.cwiseMax(weight_floor);
}

NuPair approx_nu(const CrossedDesign& /*design*/, const FactorWeights& weights, double sigma2_a,
                 double sigma2_b) {
  // [1/(W + 1/s2)]/s2 == 1/(s2 W + 1), which stays finite as s2 -> 0.
  const auto trace = [](const VectorXd& sums, double sigma2) {
    return (sigma2 * sums.array() + 1.0).inverse().sum();
  };
  return {trace(weights.row_sums, sigma2_a), trace(weights.col_sums, sigma2_b)};
}

VarianceUpdate update_variances(const VectorXd& a, const VectorXd& b, const NuPair& nu,
                                const FitConfig& config) {
  const auto one = [&](const VectorXd& effects, double nu_f, bool& guarded) {
    const double df = static_cast<double>(effects.size()) - nu_f;
    if (!(df > 0.0)) throw DegenerateFitError("no degrees of freedom left for a variance component");
    guarded = df < config.min_df;
    const double raw = effects.squaredNorm() / std::max(df, config.min_df);
    return std::clamp(raw, config.sigma2_floor, config.sigma2_cap);
  };
  VarianceUpdate out;
  out.sigma2_a = one(a, nu.a, out.df_guard_a);
  out.sigma2_b = one(b, nu.b, out.df_guard_b);
  return out;
}

double update_dispersion(const CrossedDesign& design, const VectorXd& mu, const VectorXd& z,
                         const VectorXd& beta, const VectorXd& a, const VectorXd& b, const NuPair& nu) {
  const double denom = static_cast<double>(design.n_obs() - design.n_features()) -
                       (static_cast<double>(design.n_rows) - nu.a) -
                       (static_cast<double>(design.n_cols) - nu.b);
  if (!(denom > 0.0)) {
    throw DegenerateFitError("dispersion has no residual degrees of freedom");
  }
  const VectorXd resid = z - linear_predictor(design, beta, a, b);
  const VectorXd v = mu.array() * (1.0 - mu.array());
  return v.dot(resid.cwiseAbs2()) / denom;
}

FitResult fit(const CrossedDesign& design, const FitConfig& config) {
  validate(design);
  if (!(config.epsilon > 0.0)) throw InputError("epsilon must be positive");
  if (!(config.sigma2_floor > 0.0) || !(config.sigma2_floor < config.sigma2_cap)) {
    throw InputError("need 0 < sigma2_floor < sigma2_cap");
  }
  using Clock = std::chrono::steady_clock;

  FitResult result;
  FitState& state = result.state;
  state = initial_state(design);
  const double inner_tol = config.inner_tol > 0.0 ? config.inner_tol : config.epsilon;
  std::optional<PwlsSolution> previous;

  for (int stage = 1; stage <= config.max_outer; ++stage) {
    const auto started = Clock::now();
    const VectorXd z = working_response(design, state);
    const FactorWeights weights = make_factor_weights(design, state.w);

    const PwlsProblem problem{design, weights, z, state.sigma2_a, state.sigma2_b, inner_tol, config.max_sweeps};
    PwlsSolution sol = solve_pwls_clubbed(problem, previous ? &*previous : nullptr);

    const NuPair nu = config.nu ? config.nu(design, weights, state.sigma2_a, state.sigma2_b)
                                : approx_nu(design, weights, state.sigma2_a, state.sigma2_b);
    const VarianceUpdate var = update_variances(sol.a, sol.b, nu, config);
    result.df_guard_hit = result.df_guard_hit || var.df_guard_a || var.df_guard_b;

    // Dispersion uses the refreshed means and working response at the new iterate.
    FitState next;
    next.beta = sol.beta;
    next.a = sol.a;
    next.b = sol.b;
    next.zeta = sol.zeta;
    next.sigma2_a = var.sigma2_a;
    next.sigma2_b = var.sigma2_b;
    next.nu_a = nu.a;
    next.nu_b = nu.b;
    next.phi = 1.0;
    refresh_weights(next);
    const VectorXd z_next = working_response(design, next);
    result.phi_raw = update_dispersion(design, next.mu, z_next, next.beta, next.a, next.b, nu);
    next.phi = std::max(result.phi_raw, config.phi_floor);
    refresh_weights(next, config.weight_floor);

    const double previous_sq = state.zeta.squaredNorm();
    const double change_sq = (next.zeta - state.zeta).squaredNorm();
    const double rel = previous_sq > 0.0 ? change_sq / previous_sq : std::numeric_limits<double>::infinity();

    IterationLog log;
    log.iteration = stage;
    log.objective = sol.objective;
    log.sigma2_a = next.sigma2_a;
    log.sigma2_b = next.sigma2_b;
    log.phi = next.phi;
    log.relative_change = rel;
    log.sweeps = sol.sweeps_used;
    log.inner_converged = sol.converged;

    state = std::move(next);
    previous = std::move(sol);
    result.outer_iterations = stage;
    log.seconds = std::chrono::duration<double>(Clock::now() - started).count();
    result.trace.push_back(log);
    if (rel < config.epsilon) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace crossfit
