#include "crossfit/design.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace crossfit {

namespace {

struct PairHash {
  std::size_t operator()(const std::pair<Index, Index>& p) const noexcept {
    return std::hash<std::uint64_t>{}((static_cast<std::uint64_t>(p.first) << 32) ^
                                      static_cast<std::uint64_t>(p.second));
  }
};

Index intern(std::unordered_map<std::string, Index>& map, std::vector<std::string>& keys,
             const std::string& key) {
  auto [it, inserted] = map.try_emplace(key, static_cast<Index>(keys.size()));
  if (inserted) keys.push_back(key);
  return it->second;
}

}  // namespace

CompactedDesign validate_and_compact(std::span<const RawObservation> raw) {
  if (raw.empty()) throw InputError("no observations");
  const std::size_t p = raw.front().features.size();

  CompactedDesign out;
  std::unordered_map<std::string, Index> row_map;
  std::unordered_map<std::string, Index> col_map;
  std::vector<Index> rows(raw.size());
  std::vector<Index> cols(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) {
    const auto& obs = raw[k];
    if (obs.features.size() != p) {
      throw InputError("observation " + std::to_string(k) + " has " +
                       std::to_string(obs.features.size()) + " features, expected " +
                       std::to_string(p));
    }
    if (obs.y != 0.0 && obs.y != 1.0) {
      throw InputError("observation " + std::to_string(k) + " has non-binary response");
    }
    rows[k] = intern(row_map, out.levels.rows, obs.row_key);
    cols[k] = intern(col_map, out.levels.cols, obs.col_key);
  }

  // Last occurrence of each (row, col) pair wins.
  std::unordered_map<std::pair<Index, Index>, std::size_t, PairHash> last;
  last.reserve(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) last[{rows[k], cols[k]}] = k;

  std::vector<std::size_t> keep;
  keep.reserve(last.size());
  for (std::size_t k = 0; k < raw.size(); ++k) {
    if (last[{rows[k], cols[k]}] == k) keep.push_back(k);
  }

  auto& d = out.design;
  const Index n = static_cast<Index>(keep.size());
  d.n_rows = static_cast<Index>(out.levels.rows.size());
  d.n_cols = static_cast<Index>(out.levels.cols.size());
  d.row_of.resize(n);
  d.col_of.resize(n);
  d.y.resize(n);
  d.x.resize(n, static_cast<Index>(p));
  for (Index k = 0; k < n; ++k) {
    const auto& obs = raw[keep[k]];
    d.row_of[k] = static_cast<int>(rows[keep[k]]);
    d.col_of[k] = static_cast<int>(cols[keep[k]]);
    d.y[k] = obs.y;
    for (std::size_t q = 0; q < p; ++q) d.x(k, static_cast<Index>(q)) = obs.features[q];
  }
  return out;
}

void validate(const CrossedDesign& d) {
  const Index n = d.n_obs();
  if (n == 0) throw InputError("design has no observations");
  if (d.col_of.size() != n || d.y.size() != n || d.x.rows() != n) {
    throw InputError("design arrays have inconsistent lengths");
  }
  if (d.n_rows < 1 || d.n_cols < 1) throw InputError("design needs at least one row and column level");

  std::vector<char> row_seen(d.n_rows, 0);
  std::vector<char> col_seen(d.n_cols, 0);
  std::unordered_set<std::pair<Index, Index>, PairHash> pairs;
  pairs.reserve(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) {
    const Index i = d.row_of[k];
    const Index j = d.col_of[k];
    if (i < 0 || i >= d.n_rows || j < 0 || j >= d.n_cols) {
      throw InputError("observation " + std::to_string(k) + " has an index out of range");
    }
    if (d.y[k] != 0.0 && d.y[k] != 1.0) {
      throw InputError("observation " + std::to_string(k) + " has non-binary response");
    }
    if (!pairs.insert({i, j}).second) {
      throw InputError("duplicate (row, col) pair at observation " + std::to_string(k));
    }
    row_seen[i] = 1;
    col_seen[j] = 1;
  }
  for (char s : row_seen) {
    if (!s) throw InputError("a row level has no observations");
  }
  for (char s : col_seen) {
    if (!s) throw InputError("a column level has no observations");
  }
  if (!d.x.allFinite()) throw InputError("features contain non-finite values");
}

GroupCounts group_counts(const CrossedDesign& d) {
  GroupCounts counts{VectorXi::Zero(d.n_rows), VectorXi::Zero(d.n_cols)};
  for (Index k = 0; k < d.n_obs(); ++k) {
    ++counts.row_counts[d.row_of[k]];
    ++counts.col_counts[d.col_of[k]];
  }
  return counts;
}

Index intercept_column(const CrossedDesign& d) {
  for (Index q = 0; q < d.x.cols(); ++q) {
    if ((d.x.col(q).array() == 1.0).all()) return q;
  }
  return -1;
}

}  // namespace crossfit
