#pragma once

#include <limits>
#include <stdexcept>
#include <vector>

namespace diarkit {

// Hungarian algorithm (Jonker-Volgenant style shortest augmenting path),
// O(n^2 m). Minimizes total cost of a one-to-one assignment on an
// n_rows x n_cols cost matrix (row-major). Returns row_to_col, -1 for
// unassigned rows when n_rows > n_cols. Deterministic: ties are resolved by
// scan order, so callers that need a specific tie-break should order their
// rows/columns accordingly (e.g. lexicographic labels).
inline std::vector<int> hungarian_min_assignment(const std::vector<double>& cost,
                                                 int n_rows, int n_cols) {
    if (n_rows < 0 || n_cols < 0 ||
        cost.size() != static_cast<size_t>(n_rows) * static_cast<size_t>(n_cols)) {
        throw std::invalid_argument("hungarian: cost matrix shape mismatch");
    }
    const bool transposed = n_rows > n_cols;
    const int n = transposed ? n_cols : n_rows;  // rows of the working problem
    const int m = transposed ? n_rows : n_cols;
    auto at = [&](int r, int c) -> double {
        return transposed ? cost[static_cast<size_t>(c) * n_cols + r]
                          : cost[static_cast<size_t>(r) * n_cols + c];
    };

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> match(m + 1, 0);  // 1-based; match[c] = row assigned to column c
    for (int r = 1; r <= n; ++r) {
        std::vector<double> min_to(m + 1, inf);
        std::vector<int> prev(m + 1, -1);
        std::vector<char> used(m + 1, 0);
        int c0 = 0;
        match[0] = r;
        do {
            used[c0] = 1;
            const int r0 = match[c0];
            double delta = inf;
            int c1 = -1;
            for (int c = 1; c <= m; ++c) {
                if (used[c]) continue;
                const double cur = at(r0 - 1, c - 1) - u[r0] - v[c];
                if (cur < min_to[c]) {
                    min_to[c] = cur;
                    prev[c] = c0;
                }
                if (min_to[c] < delta) {
                    delta = min_to[c];
                    c1 = c;
                }
            }
            for (int c = 0; c <= m; ++c) {
                if (used[c]) {
                    u[match[c]] += delta;
                    v[c] -= delta;
                } else {
                    min_to[c] -= delta;
                }
            }
            c0 = c1;
        } while (match[c0] != 0);
        // Augment along the path.
        while (c0 != 0) {
            const int c1 = prev[c0];
            match[c0] = match[c1];
            c0 = c1;
        }
    }

    std::vector<int> row_to_col(n_rows, -1);
    for (int c = 1; c <= m; ++c) {
        if (match[c] == 0) continue;
        if (transposed) {
            row_to_col[c - 1] = match[c] - 1;
        } else {
            row_to_col[match[c] - 1] = c - 1;
        }
    }
    return row_to_col;
}

// Maximize total value instead of minimizing cost.
inline std::vector<int> hungarian_max_assignment(const std::vector<double>& value,
                                                 int n_rows, int n_cols) {
    std::vector<double> cost(value.size());
    for (size_t i = 0; i < value.size(); ++i) cost[i] = -value[i];
    return hungarian_min_assignment(cost, n_rows, n_cols);
}

}  // namespace diarkit
