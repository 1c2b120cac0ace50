#include "cli.hpp"

#include "crossfit/covariance.hpp"
#include "crossfit/io.hpp"
#include "crossfit/logistic.hpp"
#include "crossfit/oracle.hpp"
#include "crossfit/parallel.hpp"
#include "crossfit/schall.hpp"
#include "crossfit/simulate.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <ostream>
#include <sstream>

namespace crossfit {

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kNotConverged = 2;

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_text(path, text);
  }
}

char parse_preset(const std::string& name) {
  if (name != "a" && name != "b") throw InputError("preset must be a or b");
  return name[0];
}

struct FitArgs {
  std::string data;
  bool intercept = false;
  double epsilon = 1e-8;
  int max_outer = 200;
  bool compare_naive = false;
  bool full_covariance = false;
  std::string out;
};

int run_fit(const FitArgs& args, std::ostream& out, std::ostream& err) {
  const DesignTable table = read_design_csv(std::filesystem::path(args.data), args.intercept);
  const CrossedDesign& design = table.data.design;

  FitConfig config;
  config.epsilon = args.epsilon;
  config.max_outer = args.max_outer;
  FitOutput output;
  output.feature_names = table.feature_names;
  output.levels = table.data.levels;
  output.include_covariance = args.full_covariance;
  output.result = fit(design, config);

  try {
    output.covariance = sandwich_cov_two_factor(design, output.result.state);
  } catch (const std::exception& e) {
    err << "warning: no standard errors: " << e.what() << '\n';
  }
  if (args.compare_naive) {
    output.naive = irls_logistic(design);
    output.comparison = naivete_and_inefficiency(design, output.result.state, *output.naive);
  }
  emit(args.out, dump_json(to_json(output)), out);
  if (!output.result.converged) {
    err << "fit did not converge in " << output.result.outer_iterations << " outer iterations\n";
    return kNotConverged;
  }
  return kOk;
}

struct SimulateArgs {
  double s = 1e4;
  double rho = 0.56;
  double kappa = 0.56;
  double upsilon = 1.0;
  std::string preset = "a";
  std::uint64_t seed = 1;
  std::string out;
  std::string truth;
};

int run_simulate(const SimulateArgs& args, std::ostream& out) {
  SimConfig config = preset_config(parse_preset(args.preset), args.s, args.seed);
  config.rho = args.rho;
  config.kappa = args.kappa;
  config.upsilon = args.upsilon;
  const SimulatedData data = simulate(config);

  std::vector<std::string> names{"(Intercept)"};
  for (Index q = 1; q < data.design.n_features(); ++q) names.push_back("x" + std::to_string(q));
  std::ostringstream csv;
  write_design_csv(csv, data.design, default_levels(data.design), names, 1);
  emit(args.out, csv.str(), out);

  std::string truth_path = args.truth;
  if (truth_path.empty() && !args.out.empty() && args.out != "-") {
    truth_path = std::filesystem::path(args.out).replace_extension(".truth.json").string();
  }
  if (!truth_path.empty()) write_text(truth_path, dump_json(truth_json(config, data.truth)));
  return kOk;
}

struct BenchArgs {
  std::vector<double> grid;
  std::vector<std::string> fitters{"backfit", "naive"};
  int replicates = 20;
  std::string mode = "mse";
  std::string preset = "a";
  double rho = 0.56;
  double kappa = 0.56;
  std::uint64_t seed = 1;
  std::string out;
  std::string summary;
};

int run_bench(const BenchArgs& args, std::ostream& out) {
  std::vector<SimConfig> configs;
  for (double s : args.grid) {
    SimConfig cfg = preset_config(parse_preset(args.preset), s, args.seed);
    cfg.rho = args.rho;
    cfg.kappa = args.kappa;
    configs.push_back(cfg);
  }
  std::vector<ResultRow> rows;
  if (args.mode == "mse") {
    std::vector<Fitter> fitters;
    for (const auto& name : args.fitters) fitters.push_back(parse_fitter(name));
    rows = run_mse_grid(configs, fitters, args.replicates);
  } else if (args.mode == "timing") {
    rows = run_timing_grid(configs, args.replicates);
  } else {
    throw InputError("mode must be mse or timing");
  }
  std::ostringstream table;
  write_results_csv(table, rows);
  emit(args.out, table.str(), out);
  if (!args.summary.empty()) {
    std::ostringstream summary;
    write_summary_csv(summary, summarize(rows));
    write_text(args.summary, summary.str());
  }
  return kOk;
}

struct VerifyArgs {
  std::vector<double> sizes;
  double rho = 0.4;
  double kappa = 0.4;
  std::string preset = "a";
  std::uint64_t seed = 1;
  std::string weights = "true";
  double delta = 0.5;
  std::string out;
};

int run_verify(const VerifyArgs& args, std::ostream& out) {
  if (args.weights != "true" && args.weights != "fitted") throw InputError("weights must be true or fitted");
  Json reports = Json::array();
  for (double s : args.sizes) {
    SimConfig cfg = preset_config(parse_preset(args.preset), s, args.seed);
    cfg.rho = args.rho;
    cfg.kappa = args.kappa;
    const SimulatedData data = simulate(cfg);
    const CrossedDesign& d = data.design;

    VectorXd w;
    double sigma2_a = cfg.sigma_a * cfg.sigma_a;
    double sigma2_b = cfg.sigma_b * cfg.sigma_b;
    if (args.weights == "true") {
      const VectorXd mu = logistic(linear_predictor(d, cfg.beta_true, data.truth.a, data.truth.b));
      w = mu.cwiseProduct((1.0 - mu.array()).matrix());
    } else {
      const FitResult res = fit(d);
      w = res.state.w;
      sigma2_a = res.state.sigma2_a;
      sigma2_b = res.state.sigma2_b;
    }
    const OracleReport report = oracle_report(d, make_factor_weights(d, w), sigma2_a, sigma2_b, args.delta);
    Json entry;
    entry["S"] = s;
    entry["weights"] = args.weights;
    entry["report"] = to_json(report);
    reports.push_back(std::move(entry));
  }
  Json j;
  j["rho"] = args.rho;
  j["kappa"] = args.kappa;
  j["seed"] = args.seed;
  j["reports"] = std::move(reports);
  emit(args.out, dump_json(j), out);
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Binary GLMM with two crossed random effects"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (default: CROSSFIT_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "fit the crossed-effects logistic model to a CSV file");
  fit_cmd->add_option("data", fit_args.data, "CSV with header row,col,y,x1,...")->required();
  fit_cmd->add_flag("--intercept", fit_args.intercept, "prepend an intercept column");
  fit_cmd->add_option("--epsilon", fit_args.epsilon, "outer stopping threshold")->capture_default_str();
  fit_cmd->add_option("--max-outer", fit_args.max_outer, "maximum outer iterations")->capture_default_str();
  fit_cmd->add_flag("--compare-naive", fit_args.compare_naive, "add naivete and inefficiency ratios");
  fit_cmd->add_flag("--full-cov", fit_args.full_covariance, "include covariance matrices");
  fit_cmd->add_option("--out", fit_args.out, "result JSON (default stdout)");

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic crossed design");
  sim_cmd->add_option("--s", sim_args.s, "size parameter S")->capture_default_str();
  sim_cmd->add_option("--rho", sim_args.rho, "row exponent")->capture_default_str();
  sim_cmd->add_option("--kappa", sim_args.kappa, "column exponent")->capture_default_str();
  sim_cmd->add_option("--upsilon", sim_args.upsilon, "inclusion probability spread")->capture_default_str();
  sim_cmd->add_option("--preset", sim_args.preset, "coefficient preset a or b")->capture_default_str();
  sim_cmd->add_option("--seed", sim_args.seed, "random seed")->capture_default_str();
  sim_cmd->add_option("--out", sim_args.out, "design CSV (default stdout)");
  sim_cmd->add_option("--truth", sim_args.truth, "truth JSON (default next to --out)");

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "run an MSE or timing experiment grid");
  bench_cmd->add_option("--grid", bench_args.grid, "comma-separated S values")->delimiter(',')->required();
  bench_cmd->add_option("--fitters", bench_args.fitters, "backfit,naive")->delimiter(',');
  bench_cmd->add_option("--replicates", bench_args.replicates, "replicates per S")->capture_default_str();
  bench_cmd->add_option("--mode", bench_args.mode, "mse or timing")->capture_default_str();
  bench_cmd->add_option("--preset", bench_args.preset, "coefficient preset a or b")->capture_default_str();
  bench_cmd->add_option("--rho", bench_args.rho, "row exponent")->capture_default_str();
  bench_cmd->add_option("--kappa", bench_args.kappa, "column exponent")->capture_default_str();
  bench_cmd->add_option("--seed", bench_args.seed, "base seed")->capture_default_str();
  bench_cmd->add_option("--out", bench_args.out, "results CSV (default stdout)");
  bench_cmd->add_option("--summary", bench_args.summary, "per-S averages with log10 N");

  VerifyArgs verify_args;
  auto* verify_cmd = app.add_subcommand("verify", "dense checks of the trace approximation");
  verify_cmd->add_option("--s", verify_args.sizes, "comma-separated S values")->delimiter(',')->required();
  verify_cmd->add_option("--rho", verify_args.rho, "row exponent")->capture_default_str();
  verify_cmd->add_option("--kappa", verify_args.kappa, "column exponent")->capture_default_str();
  verify_cmd->add_option("--preset", verify_args.preset, "coefficient preset a or b")->capture_default_str();
  verify_cmd->add_option("--seed", verify_args.seed, "random seed")->capture_default_str();
  verify_cmd->add_option("--weights", verify_args.weights, "true or fitted")->capture_default_str();
  verify_cmd->add_option("--delta", verify_args.delta, "eigenvalue threshold")->capture_default_str();
  verify_cmd->add_option("--out", verify_args.out, "report JSON (default stdout)");

  // CLI11 consumes the vector from the back.
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kFailure;
  }

  try {
    if (threads > 0) set_num_threads(threads);
    if (*fit_cmd) return run_fit(fit_args, out, err);
    if (*sim_cmd) return run_simulate(sim_args, out);
    if (*bench_cmd) return run_bench(bench_args, out);
    if (*verify_cmd) return run_verify(verify_args, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}

}  // namespace crossfit
