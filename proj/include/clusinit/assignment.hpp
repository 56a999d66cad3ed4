#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "clusinit/core.hpp"

namespace clusinit {

/// Dense rows x cols cost matrix, row-major.
struct CostMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> cost;

    CostMatrix() = default;
    CostMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), cost(r * c, fill) {}
    double& operator()(std::size_t r, std::size_t c) { return cost[r * cols + c]; }
    [[nodiscard]] double operator()(std::size_t r, std::size_t c) const { return cost[r * cols + c]; }
};

/// Minimum-cost assignment on a rectangular matrix (Hungarian method with
/// potentials, O(min^2 * max)). Returns, for every row, the matched column or
/// -1 when rows > cols leaves it unmatched. Exactly min(rows, cols) pairs.
inline std::vector<int> solve_assignment(const CostMatrix& m) {
    if (m.rows == 0 || m.cols == 0) return std::vector<int>(m.rows, -1);
    const bool transposed = m.rows > m.cols;
    const std::size_t n = transposed ? m.cols : m.rows;  // n <= w
    const std::size_t w = transposed ? m.rows : m.cols;
    auto a = [&](std::size_t i, std::size_t j) { return transposed ? m(j - 1, i - 1) : m(i - 1, j - 1); };

    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(w + 1, 0.0);
    std::vector<std::size_t> p(w + 1, 0), way(w + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(w + 1, inf);
        std::vector<char> used(w + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= w; ++j) {
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
            for (std::size_t j = 0; j <= w; ++j) {
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

    std::vector<int> row_to_col(m.rows, -1);
    for (std::size_t j = 1; j <= w; ++j) {
        if (p[j] == 0) continue;
        if (transposed)
            row_to_col[j - 1] = static_cast<int>(p[j] - 1);
        else
            row_to_col[p[j] - 1] = static_cast<int>(j - 1);
    }
    return row_to_col;
}

}  // namespace clusinit
