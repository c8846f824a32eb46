#include "dmot/hungarian.hpp"

#include <limits>

namespace dmot {

namespace {

// Assumes rows <= cols; returns row -> col.
std::vector<int> solve_wide(const Eigen::MatrixXd& a) {
    const int n = static_cast<int>(a.rows());
    const int m = static_cast<int>(a.cols());
    constexpr double inf = std::numeric_limits<double>::infinity();

    // 1-based potentials; p[j] = row matched to column j (0 = none).
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
            int j1 = -1;
            double delta = inf;
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
        } while (j0 != 0);
    }

    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= m; ++j) {
        if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
    }
    return row_to_col;
}

}  // namespace

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
    if (cost.rows() == 0 || cost.cols() == 0) {
        return std::vector<int>(cost.rows(), -1);
    }
    if (cost.rows() <= cost.cols()) {
        return solve_wide(cost);
    }
    const std::vector<int> col_to_row = solve_wide(cost.transpose());
    std::vector<int> row_to_col(cost.rows(), -1);
    for (int j = 0; j < static_cast<int>(col_to_row.size()); ++j) {
        if (col_to_row[j] >= 0) row_to_col[col_to_row[j]] = j;
    }
    return row_to_col;
}

double assignment_cost(const Eigen::MatrixXd& cost, const std::vector<int>& row_to_col) {
    double total = 0.0;
    for (int i = 0; i < static_cast<int>(row_to_col.size()); ++i) {
        if (row_to_col[i] >= 0) total += cost(i, row_to_col[i]);
    }
    return total;
}

}  // namespace dmot
