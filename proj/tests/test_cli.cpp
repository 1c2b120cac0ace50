#include "cli.hpp"

#include "crossfit/io.hpp"

#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

using namespace crossfit;

namespace {

namespace fs = std::filesystem;

const fs::path kTiny = fs::path(CROSSFIT_TEST_DATA_DIR) / "tiny.csv";

struct Scratch {
  fs::path dir;
  Scratch() : dir(fs::temp_directory_path() / ("crossfit_cli_" + std::to_string(::getpid()))) {
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("fit on the bundled fixture") {
  const Run r = run({"fit", kTiny.string(), "--intercept", "--threads", "1"});
  REQUIRE(r.code == 0);
  const Json j = Json::parse(r.out);
  CHECK(j["converged"].get<bool>());
  CHECK(j["coefficients"].size() == 2);
  CHECK(j["coefficients"][0]["name"] == "(Intercept)");
  CHECK(std::abs(j["sum_a"].get<double>()) < 1e-8);
  CHECK(std::abs(j["sum_b"].get<double>()) < 1e-8);
  CHECK_FALSE(j.contains("compare_naive"));
}

TEST_CASE("compare-naive output agrees with the covariance module") {
  Scratch tmp;
  const Run r = run({"fit", kTiny.string(), "--intercept", "--compare-naive", "--out", tmp / "fit.json"});
  REQUIRE(r.code == 0);
  const Json j = read_json(tmp / "fit.json");

  const DesignTable t = read_design_csv(kTiny, true);
  const FitResult res = fit(t.data.design);
  const LrFit lr = irls_logistic(t.data.design);
  const CovReport report = naivete_and_inefficiency(t.data.design, res.state, lr);
  for (Index q = 0; q < 2; ++q) {
    CHECK(j["compare_naive"]["naivete"][q].get<double>() == doctest::Approx(report.naivete[q]).epsilon(1e-12));
    CHECK(j["compare_naive"]["inefficiency"][q].get<double>() ==
          doctest::Approx(report.inefficiency[q]).epsilon(1e-12));
  }
}

TEST_CASE("fit exit codes") {
  Scratch tmp;
  CHECK(run({"fit", "/nonexistent.csv"}).code == 1);
  CHECK(run({"fit"}).code == 1);
  CHECK(run({"bogus"}).code == 1);
  const Run capped = run({"fit", kTiny.string(), "--intercept", "--max-outer", "1", "--out", tmp / "capped.json"});
  CHECK(capped.code == 2);
  CHECK_FALSE(read_json(tmp / "capped.json")["converged"].get<bool>());
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("default epsilon") {
  const Run r = run({"fit", "--help"});
  CHECK(r.out.find("1e-08") != std::string::npos);
}

TEST_CASE("simulate is reproducible and writes the truth") {
  Scratch tmp;
  REQUIRE(run({"simulate", "--s", "10000", "--preset", "a", "--seed", "7", "--out", tmp / "a1.csv"}).code == 0);
  REQUIRE(run({"simulate", "--s", "10000", "--preset", "a", "--seed", "7", "--out", tmp / "a2.csv"}).code == 0);
  CHECK(slurp(tmp / "a1.csv") == slurp(tmp / "a2.csv"));
  CHECK(fs::exists(tmp / "a1.truth.json"));

  REQUIRE(run({"simulate", "--s", "2000", "--preset", "b", "--seed", "7", "--out", tmp / "b.csv"}).code == 0);
  const Json truth = read_json(tmp / "b.truth.json");
  CHECK(truth["beta_true"][0].get<double>() == -2.0);
  CHECK(truth["beta_true"][7].get<double>() == 1.5);

  const DesignTable t = read_design_csv(fs::path(tmp / "a1.csv"), true);
  CHECK(std::abs(static_cast<double>(t.data.design.n_obs()) - 1e4) < 400.0);
  CHECK(t.feature_names.size() == 8);

  CHECK(run({"simulate", "--s", "0.5", "--out", tmp / "bad.csv"}).code == 1);
  CHECK(run({"simulate", "--preset", "z"}).code == 1);
}

TEST_CASE("bench emits rows per fitter and metric") {
  Scratch tmp;
  const Run r = run({"bench", "--grid", "1000,2000", "--fitters", "backfit,naive", "--replicates", "2", "--out",
                     tmp / "table.csv", "--summary", tmp / "summary.csv"});
  REQUIRE(r.code == 0);
  std::istringstream table(slurp(tmp / "table.csv"));
  std::string line;
  std::getline(table, line);
  CHECK(line == "fitter,S,N,metric,value,replicate");
  std::map<std::pair<std::string, std::string>, int> counts;
  while (std::getline(table, line)) {
    std::istringstream fields(line);
    std::string fitter, s, n, metric;
    std::getline(fields, fitter, ',');
    std::getline(fields, s, ',');
    std::getline(fields, n, ',');
    std::getline(fields, metric, ',');
    ++counts[{fitter, metric}];
  }
  CHECK(counts[{"backfit", "mse_nonintercept"}] >= 2);
  CHECK(counts[{"naive", "sq_err_intercept"}] >= 2);
  CHECK(slurp(tmp / "summary.csv").find("log10_N") != std::string::npos);

  CHECK(run({"bench", "--grid", "1000,2000", "--mode", "timing", "--replicates", "1", "--out", tmp / "t.csv"}).code == 0);
  CHECK(run({"bench", "--grid", "1000,2000", "--mode", "other"}).code == 1);
}

TEST_CASE("verify reports a spectral radius below one") {
  const Run r = run({"verify", "--s", "1000"});
  REQUIRE(r.code == 0);
  const Json j = Json::parse(r.out);
  CHECK(j["reports"][0]["report"]["spectral_radius"].get<double>() < 1.0);

  const Run fitted = run({"verify", "--s", "1000", "--weights", "fitted"});
  CHECK(fitted.code == 0);
  CHECK(run({"verify", "--s", "1000", "--weights", "maybe"}).code == 1);
}
