#include "crossfit/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace crossfit {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace {

// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_record(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (quoted) {
      if (ch == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        fields.back() += '"';
        ++k;
      } else if (ch == '"') {
        quoted = false;
      } else {
        fields.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back();
    } else {
      fields.back() += ch;
    }
  }
  if (quoted) throw InputError("line " + std::to_string(line_no) + ": unterminated quote");
  return fields;
}

double parse_number(const std::string& text, std::size_t line_no) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && last[-1] == ' ') --last;
  if (first < last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    throw InputError("line " + std::to_string(line_no) + ": cannot parse number '" + text + "'");
  }
  return value;
}

std::string quote_key(const std::string& key) {
  if (key.find_first_of(",\"\n") == std::string::npos) return key;
  std::string out = "\"";
  for (char ch : key) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

}  // namespace

DesignTable read_design_csv(std::istream& in, bool add_intercept) {
  std::string line;
  std::size_t line_no = 0;
  const auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };
  if (!next_line()) throw InputError("empty CSV input");
  const auto header = split_record(line, line_no);
  if (header.size() < 3 || header[0] != "row" || header[1] != "col" || header[2] != "y") {
    throw InputError("CSV header must start with row,col,y");
  }

  DesignTable table;
  if (add_intercept) table.feature_names.push_back("(Intercept)");
  table.feature_names.insert(table.feature_names.end(), header.begin() + 3, header.end());

  std::vector<RawObservation> raw;
  while (next_line()) {
    const auto fields = split_record(line, line_no);
    if (fields.size() != header.size()) {
      throw InputError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                       " fields, found " + std::to_string(fields.size()));
    }
    RawObservation obs;
    obs.row_key = fields[0];
    obs.col_key = fields[1];
    obs.y = parse_number(fields[2], line_no);
    if (add_intercept) obs.features.push_back(1.0);
    for (std::size_t k = 3; k < fields.size(); ++k) obs.features.push_back(parse_number(fields[k], line_no));
    raw.push_back(std::move(obs));
  }
  table.data = validate_and_compact(raw);
  return table;
}

DesignTable read_design_csv(const std::filesystem::path& path, bool add_intercept) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return read_design_csv(in, add_intercept);
}

void write_design_csv(std::ostream& out, const CrossedDesign& design, const LevelMaps& levels,
                      const std::vector<std::string>& feature_names, Index first_feature) {
  if (static_cast<Index>(feature_names.size()) != design.n_features()) {
    throw InputError("feature name count does not match the design");
  }
  out << "row,col,y";
  for (Index q = first_feature; q < design.n_features(); ++q) out << ',' << quote_key(feature_names[q]);
  out << '\n';
  for (Index k = 0; k < design.n_obs(); ++k) {
    out << quote_key(levels.rows[design.row_of[k]]) << ',' << quote_key(levels.cols[design.col_of[k]]) << ','
        << (design.y[k] != 0.0 ? '1' : '0');
    for (Index q = first_feature; q < design.n_features(); ++q) out << ',' << format_double(design.x(k, q));
    out << '\n';
  }
}

LevelMaps default_levels(const CrossedDesign& design) {
  LevelMaps levels;
  for (Index i = 0; i < design.n_rows; ++i) levels.rows.push_back("r" + std::to_string(i));
  for (Index j = 0; j < design.n_cols; ++j) levels.cols.push_back("c" + std::to_string(j));
  return levels;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace {

// Non-finite values have no JSON spelling.
Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json keyed(const std::vector<std::string>& keys, const VectorXd& values) {
  Json out = Json::object();
  for (Index l = 0; l < values.size(); ++l) out[keys[static_cast<std::size_t>(l)]] = number(values[l]);
  return out;
}

}  // namespace

Json to_json(const VectorXd& v) {
  Json out = Json::array();
  for (Index k = 0; k < v.size(); ++k) out.push_back(number(v[k]));
  return out;
}

Json to_json(const MatrixXd& m) {
  Json out = Json::array();
  for (Index r = 0; r < m.rows(); ++r) out.push_back(to_json(VectorXd(m.row(r).transpose())));
  return out;
}

Json to_json(const FitOutput& output) {
  const FitResult& res = output.result;
  const FitState& st = res.state;
  if (static_cast<Index>(output.feature_names.size()) != st.beta.size()) {
    throw InputError("coefficient names do not match the fitted coefficients");
  }

  Json j;
  j["converged"] = res.converged;
  j["outer_iterations"] = res.outer_iterations;
  j["n_obs"] = st.zeta.size();
  j["n_rows"] = st.a.size();
  j["n_cols"] = st.b.size();

  Json coefs = Json::array();
  for (Index q = 0; q < st.beta.size(); ++q) {
    Json c;
    c["name"] = output.feature_names[static_cast<std::size_t>(q)];
    c["estimate"] = number(st.beta[q]);
    c["std_error"] = output.covariance ? number(std::sqrt((*output.covariance)(q, q))) : Json(nullptr);
    coefs.push_back(std::move(c));
  }
  j["coefficients"] = std::move(coefs);
  j["sigma2_a"] = number(st.sigma2_a);
  j["sigma2_b"] = number(st.sigma2_b);
  j["phi"] = number(st.phi);
  j["phi_raw"] = number(res.phi_raw);
  j["df_guard_hit"] = res.df_guard_hit;
  j["sum_a"] = number(st.a.sum());
  j["sum_b"] = number(st.b.sum());

  Json iters = Json::array();
  for (const auto& log : res.trace) {
    Json it;
    it["iteration"] = log.iteration;
    it["objective"] = number(log.objective);
    it["sigma2_a"] = number(log.sigma2_a);
    it["sigma2_b"] = number(log.sigma2_b);
    it["phi"] = number(log.phi);
    it["relative_change"] = number(log.relative_change);
    it["sweeps"] = log.sweeps;
    it["inner_converged"] = log.inner_converged;
    iters.push_back(std::move(it));
  }
  j["iterations"] = std::move(iters);

  if (output.include_covariance && output.covariance) j["covariance"] = to_json(*output.covariance);

  if (output.naive) {
    Json naive;
    naive["estimate"] = to_json(output.naive->beta);
    naive["std_error"] = to_json(VectorXd(output.naive->cov.diagonal().cwiseSqrt()));
    naive["iterations"] = output.naive->iterations;
    j["naive_logistic"] = std::move(naive);
  }
  if (output.comparison) {
    const CovReport& cr = *output.comparison;
    Json c;
    c["naivete"] = to_json(cr.naivete);
    c["inefficiency"] = to_json(cr.inefficiency);
    c["max_naivete"] = number(cr.max_naivete);
    c["max_inefficiency"] = number(cr.max_inefficiency);
    if (output.include_covariance) {
      c["cov_glmm"] = to_json(cr.cov_glmm);
      c["cov_lr_naive"] = to_json(cr.cov_lr_naive);
      c["cov_glmm_of_lr"] = to_json(cr.cov_glmm_of_lr);
    }
    j["compare_naive"] = std::move(c);
  }

  j["random_effects"] = {{"a", keyed(output.levels.rows, st.a)}, {"b", keyed(output.levels.cols, st.b)}};
  return j;
}

Json to_json(const OracleReport& r) {
  Json j;
  j["n_obs"] = r.n_obs;
  j["n_rows"] = r.n_rows;
  j["n_cols"] = r.n_cols;
  j["sigma2_a"] = number(r.sigma2_a);
  j["sigma2_b"] = number(r.sigma2_b);
  j["exact_tr11"] = number(r.exact_tr11);
  j["exact_tr22"] = number(r.exact_tr22);
  j["approx_tr11"] = number(r.approx_tr11);
  j["approx_tr22"] = number(r.approx_tr22);
  j["err_a"] = number(r.err_a);
  j["err_b"] = number(r.err_b);
  j["err_a_per_row"] = number((r.exact_tr11 - r.approx_tr11) / static_cast<double>(r.n_rows));
  j["err_b_per_col"] = number((r.exact_tr22 - r.approx_tr22) / static_cast<double>(r.n_cols));
  j["series_terms"] = r.series_terms;
  j["spectral_radius"] = number(r.spectral_radius);
  j["lemma2_bound"] = number(r.lemma2_bound);
  j["prop1_bound"] = number(r.prop1_bound);
  j["lambda1"] = number(r.lambda1);
  j["delta"] = number(r.delta);
  j["eig_count_above_delta"] = r.eig_count_above_delta;
  return j;
}

Json truth_json(const SimConfig& config, const RandomEffects& truth) {
  Json j;
  j["S"] = config.s;
  j["rho"] = config.rho;
  j["kappa"] = config.kappa;
  j["upsilon"] = config.upsilon;
  j["seed"] = config.seed;
  j["beta_true"] = to_json(config.beta_true);
  j["sigma_a"] = config.sigma_a;
  j["sigma_b"] = config.sigma_b;
  j["ar_gamma"] = config.ar_gamma;
  j["a"] = to_json(truth.a);
  j["b"] = to_json(truth.b);
  return j;
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("write failed for " + path.string());
}

}  // namespace crossfit
