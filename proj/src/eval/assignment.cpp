#include <limits>

#include "gen1s/error.hpp"
#include "gen1s/transport.hpp"

namespace gen1s {

Assignment solve_assignment(const Matrix& cost) {
    const Eigen::Index n = cost.rows();
    if (n != cost.cols()) throw ShapeError("assignment: cost matrix must be square");
    if (n == 0) return {};
    if (!all_finite(cost)) throw NumericError("assignment: non-finite cost");
    const double inf = std::numeric_limits<double>::infinity();

    // 1-based potentials u (rows), v (columns); match[j] is the row assigned to column j.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), min_to(n + 1);
    std::vector<Eigen::Index> match(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (Eigen::Index i = 1; i <= n; ++i) {
        match[0] = i;
        Eigen::Index j0 = 0;
        std::fill(min_to.begin(), min_to.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const Eigen::Index i0 = match[j0];
            double delta = inf;
            Eigen::Index j1 = 0;
            for (Eigen::Index j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < min_to[j]) {
                    min_to[j] = cur;
                    way[j] = j0;
                }
                if (min_to[j] < delta) {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for (Eigen::Index j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const Eigen::Index j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    Assignment a;
    a.column_of_row.assign(static_cast<std::size_t>(n), 0);
    for (Eigen::Index j = 1; j <= n; ++j) a.column_of_row[static_cast<std::size_t>(match[j] - 1)] = j - 1;
    for (Eigen::Index i = 0; i < n; ++i) a.cost += cost(i, a.column_of_row[static_cast<std::size_t>(i)]);
    return a;
}

}  // namespace gen1s
