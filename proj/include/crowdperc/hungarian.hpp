#pragma once

#include <Eigen/Core>

#include <vector>

namespace crowdperc {

/// Minimum-cost assignment on a rectangular cost matrix (Kuhn-Munkres with
/// potentials, O(n^2 m)). Returns, per row, the assigned column or -1. Every
/// row is assigned when rows <= cols, every column otherwise.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

/// Maximum-cardinality assignment among pairs with `allowed(i, j)`, breaking
/// ties by minimum total cost. Returns per row the column or -1.
std::vector<int> solve_gated_assignment(const Eigen::MatrixXd& cost,
                                        const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& allowed);

}  // namespace crowdperc
