#pragma once

#include "crossfit/covariance.hpp"
#include "crossfit/oracle.hpp"
#include "crossfit/schall.hpp"
#include "crossfit/simulate.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace crossfit {

using Json = nlohmann::ordered_json;

// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

struct DesignTable {
  CompactedDesign data;
  std::vector<std::string> feature_names;
};

// Reads `row,col,y,x1,...,xp`. With add_intercept a ones column named
// "(Intercept)" is prepended. Throws InputError on malformed input.
DesignTable read_design_csv(std::istream& in, bool add_intercept = false);
DesignTable read_design_csv(const std::filesystem::path& path, bool add_intercept = false);

// Writes the same format; columns before first_feature are left out (used
// to drop an intercept column the reader can add back).
void write_design_csv(std::ostream& out, const CrossedDesign& design, const LevelMaps& levels,
                      const std::vector<std::string>& feature_names, Index first_feature = 0);

// Level keys "r0", "r1", ... and "c0", ... for generated designs.
LevelMaps default_levels(const CrossedDesign& design);

struct FitOutput {
  std::vector<std::string> feature_names;
  LevelMaps levels;
  FitResult result;
  std::optional<MatrixXd> covariance;  // sandwich covariance of beta-hat
  bool include_covariance = false;     // emit the full matrix, not just std errors
  std::optional<LrFit> naive;
  std::optional<CovReport> comparison;
};

Json to_json(const FitOutput& output);
Json to_json(const OracleReport& report);
Json to_json(const MatrixXd& m);
Json to_json(const VectorXd& v);
Json truth_json(const SimConfig& config, const RandomEffects& truth);

Json read_json(const std::filesystem::path& path);
std::string dump_json(const Json& j);  // two-space indent, trailing newline
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace crossfit
