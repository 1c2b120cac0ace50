#include "crossfit/simulate.hpp"

#include "crossfit/io.hpp"
#include "crossfit/logistic.hpp"
#include "crossfit/parallel.hpp"
#include "crossfit/schall.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

namespace crossfit {

VectorXd preset_beta(char preset) {
  VectorXd beta = VectorXd::Zero(8);
  beta[0] = -2.0;
  if (preset == 'b') {
    for (Index l = 1; l <= 7; ++l) beta[l] = -2.0 + 0.5 * static_cast<double>(l);
  } else if (preset != 'a') {
    throw InputError(std::string("unknown preset '") + preset + "', expected a or b");
  }
  return beta;
}

SimConfig preset_config(char preset, double s, std::uint64_t seed) {
  SimConfig cfg;
  cfg.s = s;
  cfg.beta_true = preset_beta(preset);
  cfg.seed = seed;
  return cfg;
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

namespace {

Index level_count(double s, double exponent) {
  // Guard against pow() landing just below an exact integer.
  return static_cast<Index>(std::floor(std::pow(s, exponent) * (1.0 + 1e-12)));
}

}  // namespace

CrossedDesign sample_pattern(const SimConfig& config) {
  if (!(config.s >= 1.0)) throw InputError("size parameter S must be at least 1 (expected N < 1)");
  if (!(config.rho > 0.0 && config.rho < 1.0 && config.kappa > 0.0 && config.kappa < 1.0)) {
    throw InputError("rho and kappa must lie in (0, 1)");
  }
  if (!(config.upsilon >= 1.0)) throw InputError("upsilon must be at least 1");
  const Index n_rows = level_count(config.s, config.rho);
  const Index n_cols = level_count(config.s, config.kappa);
  if (n_rows < 1 || n_cols < 1) throw InputError("configuration yields no rows or columns");

  auto rng = make_rng(config.seed, 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double base = config.s / (static_cast<double>(n_rows) * static_cast<double>(n_cols));
  const double spread = std::sqrt(config.upsilon);
  const bool heterogeneous = config.upsilon > 1.0;

  VectorXd u = VectorXd::Ones(n_rows);
  VectorXd v = VectorXd::Ones(n_cols);
  if (heterogeneous) {
    for (Index i = 0; i < n_rows; ++i) u[i] = 1.0 + (spread - 1.0) * unif(rng);
    for (Index j = 0; j < n_cols; ++j) v[j] = 1.0 + (spread - 1.0) * unif(rng);
  }

  std::vector<int> rows;
  std::vector<int> cols;
  rows.reserve(static_cast<std::size_t>(1.2 * config.s * config.upsilon) + 16);
  cols.reserve(rows.capacity());
  for (Index i = 0; i < n_rows; ++i) {
    // Geometric skipping at the row's largest probability, then thinning.
    const double q = std::min(1.0, base * u[i] * (heterogeneous ? spread : 1.0));
    const auto accept = [&](Index j) {
      const double p = std::min(1.0, base * u[i] * v[j]);
      return p >= q || unif(rng) * q < p;
    };
    if (q >= 1.0) {
      for (Index j = 0; j < n_cols; ++j) {
        if (accept(j)) {
          rows.push_back(static_cast<int>(i));
          cols.push_back(static_cast<int>(j));
        }
      }
      continue;
    }
    const double log_miss = std::log1p(-q);
    double j = -1.0;
    while (true) {
      const double draw = 1.0 - unif(rng);  // (0, 1]
      j += 1.0 + std::floor(std::log(draw) / log_miss);
      if (j >= static_cast<double>(n_cols)) break;
      if (accept(static_cast<Index>(j))) {
        rows.push_back(static_cast<int>(i));
        cols.push_back(static_cast<int>(j));
      }
    }
  }
  if (rows.empty()) throw InputError("sampled pattern is empty");

  // Drop empty levels, keeping the original order.
  std::vector<int> row_new(n_rows, -1);
  std::vector<int> col_new(n_cols, -1);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    row_new[rows[k]] = 0;
    col_new[cols[k]] = 0;
  }
  int next = 0;
  for (auto& r : row_new) {
    if (r == 0) r = next++;
  }
  const int kept_rows = next;
  next = 0;
  for (auto& c : col_new) {
    if (c == 0) c = next++;
  }

  CrossedDesign d;
  d.n_rows = kept_rows;
  d.n_cols = next;
  const Index n = static_cast<Index>(rows.size());
  d.row_of.resize(n);
  d.col_of.resize(n);
  for (Index k = 0; k < n; ++k) {
    d.row_of[k] = row_new[rows[k]];
    d.col_of[k] = col_new[cols[k]];
  }
  d.y = VectorXd::Zero(n);
  d.x = MatrixXd::Ones(n, 1);
  return d;
}

MatrixXd gen_features(Index n_obs, Index p, double ar_gamma, std::uint64_t seed) {
  if (p < 1) throw InputError("need at least the intercept column");
  if (!(std::abs(ar_gamma) < 1.0)) throw InputError("autocorrelation must lie in (-1, 1)");
  MatrixXd x(n_obs, p);
  x.col(0).setOnes();
  const Index q = p - 1;
  if (q == 0) return x;

  MatrixXd sigma(q, q);
  for (Index k = 0; k < q; ++k) {
    for (Index l = 0; l < q; ++l) sigma(k, l) = std::pow(ar_gamma, static_cast<double>(std::abs(k - l)));
  }
  const MatrixXd chol = Eigen::LLT<MatrixXd>(sigma).matrixL();

  auto rng = make_rng(seed, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd draw(q);
  for (Index k = 0; k < n_obs; ++k) {
    for (Index l = 0; l < q; ++l) draw[l] = normal(rng);
    x.row(k).tail(q) = (chol * draw).transpose();
  }
  return x;
}

RandomEffects gen_response(CrossedDesign& design, const VectorXd& beta_true, double sigma_a, double sigma_b,
                           std::uint64_t seed) {
  if (beta_true.size() != design.n_features()) throw InputError("beta_true length does not match features");
  if (!(sigma_a >= 0.0 && sigma_b >= 0.0)) throw InputError("random-effect scales must be nonnegative");
  auto rng = make_rng(seed, 2);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  RandomEffects truth{VectorXd(design.n_rows), VectorXd(design.n_cols)};
  for (Index i = 0; i < design.n_rows; ++i) truth.a[i] = sigma_a * normal(rng);
  for (Index j = 0; j < design.n_cols; ++j) truth.b[j] = sigma_b * normal(rng);

  const VectorXd eta = design.x * beta_true + scatter(design, Factor::A, truth.a) +
                       scatter(design, Factor::B, truth.b);
  design.y.resize(design.n_obs());
  for (Index k = 0; k < design.n_obs(); ++k) design.y[k] = unif(rng) < logistic(eta[k]) ? 1.0 : 0.0;
  return truth;
}

SimulatedData simulate(const SimConfig& config) {
  SimulatedData out;
  out.design = sample_pattern(config);
  const Index p = config.beta_true.size();
  out.design.x = gen_features(out.design.n_obs(), p, config.ar_gamma, config.seed);
  out.truth = gen_response(out.design, config.beta_true, config.sigma_a, config.sigma_b, config.seed);
  return out;
}

// ---------------------------------------------------------------------------
// Experiment grids
// ---------------------------------------------------------------------------

std::string to_string(Fitter f) { return f == Fitter::Backfit ? "backfit" : "naive"; }

Fitter parse_fitter(const std::string& name) {
  if (name == "backfit") return Fitter::Backfit;
  if (name == "naive") return Fitter::Naive;
  throw InputError("unknown fitter '" + name + "'");
}

namespace {

std::uint64_t replicate_seed(std::uint64_t seed, int replicate) {
  auto rng = make_rng(seed, 1000 + static_cast<std::uint64_t>(replicate));
  return rng();
}

std::vector<ResultRow> score_replicate(const SimConfig& base, const std::vector<Fitter>& fitters, int rep) {
  SimConfig cfg = base;
  cfg.seed = replicate_seed(base.seed, rep);
  const SimulatedData data = simulate(cfg);
  const Index n = data.design.n_obs();
  const VectorXd& truth = cfg.beta_true;

  std::vector<ResultRow> rows;
  const auto add = [&](Fitter f, const std::string& metric, double value) {
    rows.push_back({to_string(f), cfg.s, n, metric, value, rep});
  };
  const auto beta_errors = [&](Fitter f, const VectorXd& beta) {
    const VectorXd err = beta - truth;
    add(f, "sq_err_intercept", err[0] * err[0]);
    if (err.size() > 1) add(f, "mse_nonintercept", err.tail(err.size() - 1).squaredNorm() / double(err.size() - 1));
  };

  for (Fitter f : fitters) {
    try {
      if (f == Fitter::Backfit) {
        const FitResult res = fit(data.design);
        beta_errors(f, res.state.beta);
        add(f, "sq_err_sigma_a", std::pow(std::sqrt(res.state.sigma2_a) - cfg.sigma_a, 2));
        add(f, "sq_err_sigma_b", std::pow(std::sqrt(res.state.sigma2_b) - cfg.sigma_b, 2));
        add(f, "outer_iterations", res.outer_iterations);
        add(f, "converged", res.converged ? 1.0 : 0.0);
      } else {
        const LrFit lr = irls_logistic(data.design);
        beta_errors(f, lr.beta);
      }
    } catch (const std::exception&) {
      add(f, "failed", 1.0);
    }
  }
  return rows;
}

}  // namespace

std::vector<ResultRow> run_mse_grid(const std::vector<SimConfig>& configs, const std::vector<Fitter>& fitters,
                                    int replicates) {
  if (configs.size() < 2) throw InputError("an MSE grid needs at least two configurations");
  if (replicates < 1) throw InputError("need at least one replicate");
  const Index jobs = static_cast<Index>(configs.size()) * replicates;
  std::vector<std::vector<ResultRow>> per_job(static_cast<std::size_t>(jobs));
  parallel_for(jobs, [&](Index job) {
    const auto& cfg = configs[static_cast<std::size_t>(job / replicates)];
    per_job[static_cast<std::size_t>(job)] = score_replicate(cfg, fitters, static_cast<int>(job % replicates));
  });
  std::vector<ResultRow> rows;
  for (auto& chunk : per_job) rows.insert(rows.end(), chunk.begin(), chunk.end());
  return rows;
}

std::vector<ResultRow> run_timing_grid(const std::vector<SimConfig>& configs, int replicates) {
  using Clock = std::chrono::steady_clock;
  std::vector<ResultRow> rows;
  for (const auto& base : configs) {
    for (int rep = 0; rep < replicates; ++rep) {
      SimConfig cfg = base;
      cfg.seed = replicate_seed(base.seed, rep);
      const SimulatedData data = simulate(cfg);
      const Index n = data.design.n_obs();
      const auto started = Clock::now();
      const FitResult res = fit(data.design);
      const double total = std::chrono::duration<double>(Clock::now() - started).count();
      int sweeps = 0;
      for (const auto& log : res.trace) sweeps += log.sweeps;
      const std::string name = to_string(Fitter::Backfit);
      rows.push_back({name, cfg.s, n, "seconds_total", total, rep});
      rows.push_back({name, cfg.s, n, "seconds_per_iteration", total / res.outer_iterations, rep});
      rows.push_back({name, cfg.s, n, "outer_iterations", double(res.outer_iterations), rep});
      rows.push_back({name, cfg.s, n, "inner_sweeps", double(sweeps), rep});
    }
  }
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  struct Acc {
    double value = 0.0;
    double n = 0.0;
    int count = 0;
    std::size_t order = 0;
  };
  std::map<std::tuple<std::string, double, std::string>, Acc> groups;
  for (const auto& r : rows) {
    auto [it, inserted] = groups.try_emplace({r.fitter, r.s, r.metric});
    if (inserted) it->second.order = groups.size();
    it->second.value += r.value;
    it->second.n += static_cast<double>(r.n);
    ++it->second.count;
  }
  std::vector<std::pair<std::size_t, SummaryRow>> ordered;
  for (const auto& [key, acc] : groups) {
    ordered.push_back({acc.order,
                       {std::get<0>(key), std::get<1>(key), acc.n / acc.count, std::get<2>(key),
                        acc.value / acc.count, acc.count}});
  }
  std::sort(ordered.begin(), ordered.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
  std::vector<SummaryRow> out;
  for (auto& [order, row] : ordered) out.push_back(std::move(row));
  return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("slope needs at least two matching points");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += std::log10(x[k]);
    my += std::log10(y[k]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = std::log10(x[k]) - mx;
    sxy += dx * (std::log10(y[k]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << "fitter,S,N,metric,value,replicate\n";
  for (const auto& r : rows) {
    out << r.fitter << ',' << format_double(r.s) << ',' << r.n << ',' << r.metric << ','
        << format_double(r.value) << ',' << r.replicate << '\n';
  }
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "fitter,S,mean_N,log10_N,metric,value,replicates\n";
  for (const auto& r : rows) {
    out << r.fitter << ',' << format_double(r.s) << ',' << format_double(r.mean_n) << ','
        << format_double(std::log10(r.mean_n)) << ',' << r.metric << ',' << format_double(r.value) << ','
        << r.count << '\n';
  }
}

}  // namespace crossfit
