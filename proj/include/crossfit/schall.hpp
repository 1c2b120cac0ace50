#pragma once

#include "crossfit/backfit.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace crossfit {

// Degrees-of-freedom quantities nu_A = tr(T*_11)/sigma2_A and nu_B.
struct NuPair {
  double a = 0.0;
  double b = 0.0;
};

// Strategy for the nu computation; approx_nu unless overridden.
using NuFunction =
    std::function<NuPair(const CrossedDesign&, const FactorWeights&, double sigma2_a, double sigma2_b)>;

struct FitConfig {
  double epsilon = 1e-8;  // outer squared relative change of zeta
  int max_outer = 200;
  double sigma2_floor = 1e-8;
  double sigma2_cap = 100.0;  // sigma <= 10
  double weight_floor = 0.0;  // 0 disables
  double phi_floor = 1e-8;
  double inner_tol = 0.0;     // 0 means "same as epsilon"
  int max_sweeps = 1000;
  double min_df = 0.5;        // guard on R - nu_A and C - nu_B
  NuFunction nu;              // empty means approx_nu
};

struct FitState {
  VectorXd beta;
  VectorXd a;
  VectorXd b;
  double sigma2_a = 1.0;
  double sigma2_b = 1.0;
  double phi = 1.0;
  VectorXd zeta;
  VectorXd mu;
  VectorXd w;
  double nu_a = 0.0;
  double nu_b = 0.0;
};

struct IterationLog {
  int iteration = 0;
  double objective = 0.0;
  double sigma2_a = 0.0;
  double sigma2_b = 0.0;
  double phi = 0.0;
  double relative_change = 0.0;  // +inf on the first stage
  int sweeps = 0;
  bool inner_converged = true;
  double seconds = 0.0;
};

struct FitResult {
  FitState state;
  int outer_iterations = 0;
  bool converged = false;
  double phi_raw = 0.0;  // last dispersion estimate before flooring
  bool df_guard_hit = false;
  std::vector<IterationLog> trace;
};

// Overflow-safe logistic CDF.
inline double logistic(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

template <typename Derived>
VectorXd logistic(const Eigen::MatrixBase<Derived>& eta) {
  return eta.unaryExpr([](double t) { return logistic(t); });
}

// Initial state: beta, a, b = 0 and sigma2_a = sigma2_b = phi = 1.
FitState initial_state(const CrossedDesign& design);

// z = zeta + (Y - mu) / (mu (1 - mu)). Throws DegenerateFitError if some mu
// rounds to 0 or 1.
VectorXd working_response(const CrossedDesign& design, const FitState& state);

// mu = logistic(zeta), w = mu (1 - mu) / phi, floored at weight_floor when > 0.
void refresh_weights(FitState& state, double weight_floor = 0.0);

// Diagonal-block trace approximation, O(N).
NuPair approx_nu(const CrossedDesign& design, const FactorWeights& weights, double sigma2_a,
                 double sigma2_b);

struct VarianceUpdate {
  double sigma2_a = 0.0;
  double sigma2_b = 0.0;
  bool df_guard_a = false;
  bool df_guard_b = false;
};

// sigma2 = |a|^2 / max(R - nu, min_df), clamped to [floor, cap].
VarianceUpdate update_variances(const VectorXd& a, const VectorXd& b, const NuPair& nu,
                                const FitConfig& config = {});

// sum mu(1-mu)(z - x'beta - a - b)^2 / (N - p - (R - nu_A) - (C - nu_B)), unfloored.
double update_dispersion(const CrossedDesign& design, const VectorXd& mu, const VectorXd& z,
                         const VectorXd& beta, const VectorXd& a, const VectorXd& b, const NuPair& nu);

// Modified Schall iteration with clubbed backfitting.
FitResult fit(const CrossedDesign& design, const FitConfig& config = {});

}  // namespace crossfit
