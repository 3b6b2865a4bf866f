#pragma once

// Rectangular min-cost bipartite matching with a deterministic tie-break.
//
// hungarian() returns min(rows, cols) pairs minimizing total cost. Among all
// optimal matchings it returns the one whose (row, col) pair list, sorted by
// row, is lexicographically smallest. The shortest-augmenting-path solver
// supplies dual potentials; only edges that are tight under those duals can
// belong to an optimal matching, so the tie-break fixes rows one at a time
// and re-solves the remainder for each tight candidate.

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tba/errors.hpp"

namespace tba {

class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  CostMatrix(std::initializer_list<std::initializer_list<double>> init) {
    rows_ = init.size();
    cols_ = rows_ == 0 ? 0 : init.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& row : init) {
      if (row.size() != cols_) throw ParameterError("CostMatrix: ragged initializer");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct MatchPair {
  std::size_t row = 0;
  std::size_t col = 0;

  friend auto operator<=>(const MatchPair&, const MatchPair&) = default;
};

// Sum of costs, accumulated in the order of `pairs`.
inline double matching_cost(const CostMatrix& cost, std::span<const MatchPair> pairs) {
  double total = 0.0;
  for (const auto& p : pairs) total += cost(p.row, p.col);
  return total;
}

namespace detail {

struct SubSolution {
  double total = 0.0;
  std::vector<long> row_to_col;  // indexed by original row, -1 if unmatched
  std::vector<double> u;         // row potentials, original indexing
  std::vector<double> v;         // column potentials, original indexing
};

// Shortest augmenting path (Jonker-Volgenant style) for n <= m, 1-based.
// `a(i, j)` for i in [1, n], j in [1, m]. Returns p[j] = matched row of column j.
template <class Cost>
void solve_wide(std::size_t n, std::size_t m, const Cost& a, std::vector<double>& u,
                std::vector<double>& v, std::vector<std::size_t>& p) {
  const double inf = std::numeric_limits<double>::infinity();
  u.assign(n + 1, 0.0);
  v.assign(m + 1, 0.0);
  p.assign(m + 1, 0);
  std::vector<std::size_t> way(m + 1, 0);
  std::vector<double> minv(m + 1);
  std::vector<char> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
}

// Optimal matching restricted to the alive rows/columns.
inline SubSolution solve_subset(const CostMatrix& cost, const std::vector<char>& row_alive,
                                const std::vector<char>& col_alive) {
  std::vector<std::size_t> rows;
  std::vector<std::size_t> cols;
  for (std::size_t r = 0; r < cost.rows(); ++r) {
    if (row_alive[r]) rows.push_back(r);
  }
  for (std::size_t c = 0; c < cost.cols(); ++c) {
    if (col_alive[c]) cols.push_back(c);
  }
  SubSolution sol;
  sol.row_to_col.assign(cost.rows(), -1);
  sol.u.assign(cost.rows(), 0.0);
  sol.v.assign(cost.cols(), 0.0);
  if (rows.empty() || cols.empty()) return sol;

  std::vector<double> u;
  std::vector<double> v;
  std::vector<std::size_t> p;
  if (rows.size() <= cols.size()) {
    auto a = [&](std::size_t i, std::size_t j) { return cost(rows[i - 1], cols[j - 1]); };
    solve_wide(rows.size(), cols.size(), a, u, v, p);
    for (std::size_t j = 1; j <= cols.size(); ++j) {
      if (p[j] != 0) sol.row_to_col[rows[p[j] - 1]] = static_cast<long>(cols[j - 1]);
    }
    for (std::size_t i = 1; i <= rows.size(); ++i) sol.u[rows[i - 1]] = u[i];
    for (std::size_t j = 1; j <= cols.size(); ++j) sol.v[cols[j - 1]] = v[j];
  } else {
    auto a = [&](std::size_t i, std::size_t j) { return cost(rows[j - 1], cols[i - 1]); };
    solve_wide(cols.size(), rows.size(), a, u, v, p);
    for (std::size_t j = 1; j <= rows.size(); ++j) {
      if (p[j] != 0) sol.row_to_col[rows[j - 1]] = static_cast<long>(cols[p[j] - 1]);
    }
    for (std::size_t i = 1; i <= cols.size(); ++i) sol.v[cols[i - 1]] = u[i];
    for (std::size_t j = 1; j <= rows.size(); ++j) sol.u[rows[j - 1]] = v[j];
  }
  for (std::size_t r = 0; r < cost.rows(); ++r) {
    if (sol.row_to_col[r] >= 0) sol.total += cost(r, static_cast<std::size_t>(sol.row_to_col[r]));
  }
  return sol;
}

}  // namespace detail

inline std::vector<MatchPair> hungarian(const CostMatrix& cost) {
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  double max_abs = 1.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < m; ++c) {
      const double x = cost(r, c);
      if (!std::isfinite(x)) {
        throw DataError("hungarian: non-finite cost at (" + std::to_string(r) + ", " +
                        std::to_string(c) + ")");
      }
      max_abs = std::max(max_abs, std::abs(x));
    }
  }
  if (n == 0 || m == 0) return {};

  std::size_t remaining = std::min(n, m);
  // Round-off allowance for comparing sums of up to `remaining` entries.
  const double eps = 64.0 * DBL_EPSILON * static_cast<double>(remaining) * max_abs;

  std::vector<char> row_alive(n, 1);
  std::vector<char> col_alive(m, 1);
  std::size_t rows_left = n;
  std::size_t cols_left = m;
  detail::SubSolution sol = detail::solve_subset(cost, row_alive, col_alive);
  const double target = sol.total;
  double fixed_cost = 0.0;
  std::vector<MatchPair> out;
  out.reserve(remaining);

  auto try_fix = [&](std::size_t r, std::size_t c) -> bool {
    row_alive[r] = 0;
    col_alive[c] = 0;
    auto sub = detail::solve_subset(cost, row_alive, col_alive);
    if (fixed_cost + cost(r, c) + sub.total <= target + eps) {
      fixed_cost += cost(r, c);
      out.push_back({r, c});
      sol = std::move(sub);
      --remaining;
      --rows_left;
      --cols_left;
      return true;
    }
    row_alive[r] = 1;
    col_alive[c] = 1;
    return false;
  };

  for (std::size_t r = 0; r < n && remaining > 0; ++r) {
    bool fixed = false;
    for (std::size_t c = 0; c < m && !fixed; ++c) {
      if (!col_alive[c]) continue;
      const double reduced = cost(r, c) - sol.u[r] - sol.v[c];
      if (reduced <= eps) fixed = try_fix(r, c);
    }
    if (fixed) continue;
    if (rows_left - 1 >= remaining) {
      // Leaving row r out keeps a full-size matching available.
      row_alive[r] = 0;
      auto sub = detail::solve_subset(cost, row_alive, col_alive);
      if (fixed_cost + sub.total <= target + eps) {
        sol = std::move(sub);
        --rows_left;
        continue;
      }
      row_alive[r] = 1;
    }
    // Duals too loose for the tight-edge filter; scan every column.
    for (std::size_t c = 0; c < m && !fixed; ++c) {
      if (col_alive[c]) fixed = try_fix(r, c);
    }
    if (!fixed) {
      // Unreachable for finite inputs: keep the solver's own choice.
      const long c = sol.row_to_col[r];
      if (c < 0) throw StateError("hungarian: tie-break lost feasibility");
      fixed_cost += cost(r, static_cast<std::size_t>(c));
      out.push_back({r, static_cast<std::size_t>(c)});
      row_alive[r] = 0;
      col_alive[static_cast<std::size_t>(c)] = 0;
      --remaining;
      --rows_left;
      --cols_left;
      sol = detail::solve_subset(cost, row_alive, col_alive);
    }
  }
  return out;
}

}  // namespace tba
