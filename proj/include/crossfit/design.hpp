#pragma once

#include "crossfit/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace crossfit {

// The two crossed factors: A indexes rows (e.g. customers), B columns (items).
enum class Factor { A, B };

// Sparse crossed observation pattern with binary responses and dense
// features. Incidence matrices are never formed; row_of / col_of are the
// only representation of Z_A and Z_B.
struct CrossedDesign {
  Index n_rows = 0;
  Index n_cols = 0;
  VectorXi row_of;
  VectorXi col_of;
  VectorXd y;
  MatrixXd x;  // N x p, includes the intercept column when present

  Index n_obs() const { return row_of.size(); }
  Index n_features() const { return x.cols(); }
  const VectorXi& index(Factor f) const { return f == Factor::A ? row_of : col_of; }
  Index levels(Factor f) const { return f == Factor::A ? n_rows : n_cols; }
};

struct GroupCounts {
  VectorXi row_counts;
  VectorXi col_counts;
};

// Original keys for the compacted 0-based levels.
struct LevelMaps {
  std::vector<std::string> rows;
  std::vector<std::string> cols;
};

struct RawObservation {
  std::string row_key;
  std::string col_key;
  double y = 0.0;
  std::vector<double> features;
};

struct CompactedDesign {
  CrossedDesign design;
  LevelMaps levels;
};

// Relabels keys to contiguous indices in order of first appearance. A
// repeated (row, col) pair keeps only its last occurrence.
CompactedDesign validate_and_compact(std::span<const RawObservation> raw);

// Throws InputError unless every invariant of CrossedDesign holds.
void validate(const CrossedDesign& design);

GroupCounts group_counts(const CrossedDesign& design);

// Index of the first all-ones column, or -1.
Index intercept_column(const CrossedDesign& design);
inline bool has_intercept(const CrossedDesign& design) { return intercept_column(design) >= 0; }

// Per-level sums: out[index[k]] += values[k], accumulated in observation order.
template <typename Derived>
VectorXd segment_sum(const VectorXi& index, Index levels, const Eigen::MatrixBase<Derived>& values) {
  VectorXd out = VectorXd::Zero(levels);
  const auto& v = values.derived();
  for (Index k = 0; k < index.size(); ++k) out[index[k]] += v.coeff(k);
  return out;
}

// Z_F^T v for factor F.
template <typename Derived>
VectorXd gather(const CrossedDesign& design, Factor f, const Eigen::MatrixBase<Derived>& values) {
  return segment_sum(design.index(f), design.levels(f), values);
}

// Z_F c for factor F, as an Eigen indexed view.
inline auto scatter(const CrossedDesign& design, Factor f, const VectorXd& coef) {
  return coef(design.index(f));
}

}  // namespace crossfit
