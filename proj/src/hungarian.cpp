#include "crowdperc/hungarian.hpp"

#include <cmath>
#include <limits>

namespace crowdperc {

namespace {

// Requires rows <= cols. 1-based potentials formulation.
std::vector<int> solve_tall(const Eigen::MatrixXd& a) {
    const int n = static_cast<int>(a.rows());
    const int m = static_cast<int>(a.cols());
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
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
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> assign(n, -1);
    for (int j = 1; j <= m; ++j) {
        if (p[j] != 0) assign[p[j] - 1] = j - 1;
    }
    return assign;
}

}  // namespace

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
    if (cost.rows() == 0) return {};
    if (cost.cols() == 0) return std::vector<int>(cost.rows(), -1);
    if (cost.rows() <= cost.cols()) return solve_tall(cost);
    const auto by_col = solve_tall(cost.transpose());
    std::vector<int> out(cost.rows(), -1);
    for (std::size_t j = 0; j < by_col.size(); ++j) {
        if (by_col[j] >= 0) out[by_col[j]] = static_cast<int>(j);
    }
    return out;
}

std::vector<int> solve_gated_assignment(const Eigen::MatrixXd& cost,
                                        const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& allowed) {
    if (cost.size() == 0) return std::vector<int>(cost.rows(), -1);
    // A forbidden pair must cost more than any full set of allowed pairs, so
    // the optimum first maximizes allowed matches, then minimizes their cost.
    double max_allowed = 0;
    for (Eigen::Index i = 0; i < cost.rows(); ++i) {
        for (Eigen::Index j = 0; j < cost.cols(); ++j) {
            if (allowed(i, j)) max_allowed = std::max(max_allowed, std::abs(cost(i, j)));
        }
    }
    const double forbidden =
        (max_allowed + 1.0) * static_cast<double>(std::min(cost.rows(), cost.cols()) + 1) * 2.0;
    Eigen::MatrixXd gated = cost;
    for (Eigen::Index i = 0; i < cost.rows(); ++i) {
        for (Eigen::Index j = 0; j < cost.cols(); ++j) {
            if (!allowed(i, j)) gated(i, j) = forbidden;
        }
    }
    auto assign = solve_assignment(gated);
    for (std::size_t i = 0; i < assign.size(); ++i) {
        if (assign[i] >= 0 && !allowed(static_cast<Eigen::Index>(i), assign[i])) assign[i] = -1;
    }
    return assign;
}

}  // namespace crowdperc
