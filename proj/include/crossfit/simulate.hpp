#pragma once

#include "crossfit/design.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace crossfit {

struct SimConfig {
  double s = 1e4;        // size parameter S
  double rho = 0.56;     // R = floor(S^rho)
  double kappa = 0.56;   // C = floor(S^kappa)
  double upsilon = 1.0;  // p_ij in [S/(RC), upsilon S/(RC)]
  VectorXd beta_true;    // includes the intercept as element 0
  double sigma_a = 0.8;
  double sigma_b = 0.4;
  double ar_gamma = 0.5;
  std::uint64_t seed = 1;
};

// The two accuracy settings: 'a' has every slope zero, 'b' has
// beta_l = -2 + 0.5 l for l = 1..7; both use intercept -2 and p = 8.
VectorXd preset_beta(char preset);
SimConfig preset_config(char preset, double s, std::uint64_t seed);

// Independent RNG stream for (seed, stream), e.g. stream = replicate index.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream);

// Bernoulli(p_ij) inclusion of each (i, j). With upsilon > 1, p_ij =
// (S/RC) u_i v_j with u_i, v_j ~ U[1, sqrt(upsilon)]; probabilities above 1
// are clamped. Cells are visited by geometric skipping, so cost is O(N + R).
// Empty rows and columns are dropped and the survivors renumbered in order.
// The result has no responses or features yet.
CrossedDesign sample_pattern(const SimConfig& config);

// N x p features: an intercept column followed by p - 1 AR(1)-correlated
// N(0, Sigma) columns with Sigma_kl = gamma^|k-l|.
MatrixXd gen_features(Index n_obs, Index p, double ar_gamma, std::uint64_t seed);

struct RandomEffects {
  VectorXd a;
  VectorXd b;
};

// Draws a ~ N(0, sigma_a^2 I), b ~ N(0, sigma_b^2 I) and Y ~ Bernoulli(pi(x'beta + a + b)).
RandomEffects gen_response(CrossedDesign& design, const VectorXd& beta_true, double sigma_a, double sigma_b,
                           std::uint64_t seed);

struct SimulatedData {
  CrossedDesign design;
  RandomEffects truth;
};

SimulatedData simulate(const SimConfig& config);

// ---------------------------------------------------------------------------
// Experiment grids
// ---------------------------------------------------------------------------

enum class Fitter { Backfit, Naive };
std::string to_string(Fitter f);
Fitter parse_fitter(const std::string& name);

// One line of the experiment table `fitter,S,N,metric,value,replicate`.
struct ResultRow {
  std::string fitter;
  double s = 0.0;
  Index n = 0;
  std::string metric;
  double value = 0.0;
  int replicate = 0;
};

// Per replicate: squared errors of the intercept and mean squared error of
// the remaining coefficients, plus sigma errors for the backfit fitter.
// A failing fit yields a `failed` row instead of aborting the grid.
std::vector<ResultRow> run_mse_grid(const std::vector<SimConfig>& configs, const std::vector<Fitter>& fitters,
                                    int replicates);

// Wall-clock seconds for the whole fit and per outer iteration.
std::vector<ResultRow> run_timing_grid(const std::vector<SimConfig>& configs, int replicates = 1);

struct SummaryRow {
  std::string fitter;
  double s = 0.0;
  double mean_n = 0.0;
  std::string metric;
  double value = 0.0;  // average over replicates
  int count = 0;
};

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

// Least-squares slope of log10(y) on log10(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

}  // namespace crossfit
