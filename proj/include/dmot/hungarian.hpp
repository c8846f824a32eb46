#pragma once

#include <Eigen/Dense>
#include <vector>

namespace dmot {

/// Minimum-cost assignment of rows to columns (Jonker-Volgenant style
/// shortest augmenting paths, O(n^3)). Rectangular matrices are handled;
/// when rows > cols the extra rows stay unassigned (-1). Entries must be
/// finite; forbidden pairings should carry a large sentinel cost.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

double assignment_cost(const Eigen::MatrixXd& cost, const std::vector<int>& row_to_col);

}  // namespace dmot
