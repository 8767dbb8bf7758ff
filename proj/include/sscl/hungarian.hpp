#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

namespace sscl {

// Result of a maximum-weight assignment on a rectangular matrix.
struct MatrixAssignment {
  // (row, col) pairs, ascending by row.
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> unmatched_rows;
  std::vector<int> unmatched_cols;
  // Sum of the matched entries, accumulated in row order.
  double total = 0.0;
};

// Maximum-weight assignment that matches every row or every column, whichever
// side is smaller. Among optimal assignments the lexicographically smallest is
// returned: rows are considered in ascending order and each takes the lowest
// column index that still admits an optimum (a row of a tall matrix prefers
// any column over staying unmatched).
//
// Entries must be finite. An empty matrix yields no pairs.
MatrixAssignment hungarian_max(const Eigen::MatrixXd& similarity);

// Optimal value only, without tie refinement.
double assignment_value(const Eigen::MatrixXd& similarity);

}  // namespace sscl
