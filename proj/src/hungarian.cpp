#include "sscl/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sscl {

namespace {

// Shortest-augmenting-path Hungarian method with potentials for an n x m
// cost matrix, n <= m. Returns the column assigned to each row.
std::vector<int> solve_min_cost(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is a virtual source.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> owner(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    owner[0] = i;
    int j0 = 0;
    std::vector<double> min_slack(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = owner[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double slack = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (slack < min_slack[j]) {
          min_slack[j] = slack;
          way[j] = j0;
        }
        if (min_slack[j] < delta) {
          delta = min_slack[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          min_slack[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const int j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (owner[j] != 0) row_to_col[owner[j] - 1] = j - 1;
  }
  return row_to_col;
}

// Some optimal assignment as (row, col) pairs sorted by row.
std::vector<std::pair<int, int>> solve_max(const Eigen::MatrixXd& s) {
  std::vector<std::pair<int, int>> pairs;
  if (s.rows() == 0 || s.cols() == 0) return pairs;
  if (s.rows() <= s.cols()) {
    const auto cols = solve_min_cost(-s);
    for (int r = 0; r < static_cast<int>(cols.size()); ++r) pairs.emplace_back(r, cols[r]);
  } else {
    const Eigen::MatrixXd t = -s.transpose();
    const auto rows = solve_min_cost(t);
    for (int c = 0; c < static_cast<int>(rows.size()); ++c) pairs.emplace_back(rows[c], c);
    std::sort(pairs.begin(), pairs.end());
  }
  return pairs;
}

double sum_pairs(const Eigen::MatrixXd& s,
                 const std::vector<std::pair<int, int>>& pairs) {
  double total = 0.0;
  for (const auto& [r, c] : pairs) total += s(r, c);
  return total;
}

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& s, const std::vector<int>& rows,
                          const std::vector<int>& cols) {
  Eigen::MatrixXd sub(rows.size(), cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) sub(r, c) = s(rows[r], cols[c]);
  }
  return sub;
}

}  // namespace

double assignment_value(const Eigen::MatrixXd& similarity) {
  return sum_pairs(similarity, solve_max(similarity));
}

MatrixAssignment hungarian_max(const Eigen::MatrixXd& s) {
  const int rows = static_cast<int>(s.rows());
  const int cols = static_cast<int>(s.cols());
  MatrixAssignment result;
  if (rows == 0 || cols == 0) {
    for (int r = 0; r < rows; ++r) result.unmatched_rows.push_back(r);
    for (int c = 0; c < cols; ++c) result.unmatched_cols.push_back(c);
    return result;
  }

  // Lexicographic refinement: fix rows one at a time, each to the lowest
  // column that keeps the optimum reachable.
  const double optimum = assignment_value(s);
  const double tolerance = 1e-12 * std::max(1.0, std::abs(optimum));
  std::vector<int> free_cols(cols);
  for (int c = 0; c < cols; ++c) free_cols[c] = c;
  double fixed = 0.0;
  for (int r = 0; r < rows; ++r) {
    std::vector<int> later_rows;
    for (int k = r + 1; k < rows; ++k) later_rows.push_back(k);

    bool matched = false;
    for (std::size_t k = 0; k < free_cols.size(); ++k) {
      std::vector<int> rest = free_cols;
      rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(k));
      const double value =
          fixed + s(r, free_cols[k]) + assignment_value(submatrix(s, later_rows, rest));
      if (value >= optimum - tolerance) {
        result.pairs.emplace_back(r, free_cols[k]);
        fixed += s(r, free_cols[k]);
        free_cols = std::move(rest);
        matched = true;
        break;
      }
    }
    if (!matched) result.unmatched_rows.push_back(r);
  }
  result.unmatched_cols = free_cols;
  result.total = sum_pairs(s, result.pairs);
  return result;
}

}  // namespace sscl
