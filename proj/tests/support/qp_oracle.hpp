#pragma once

// Dense brute-force KKT oracle for small strictly convex QPs: enumerate every
// active set, solve the equality-constrained KKT system, keep the points that
// are primal feasible with correctly signed multipliers.

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "facts/qp_solver.hpp"

namespace facts::testing {

struct DenseRow {
    Eigen::VectorXd a;
    double lo, hi;
};

inline std::vector<DenseRow> dense_rows(const QpProblem& p) {
    std::vector<DenseRow> rows;
    const Eigen::MatrixXd eq = Eigen::MatrixXd(p.eq_matrix);
    const Eigen::MatrixXd in = Eigen::MatrixXd(p.ineq_matrix);
    for (Eigen::Index i = 0; i < eq.rows(); ++i) rows.push_back({eq.row(i).transpose(), p.eq_rhs[i], p.eq_rhs[i]});
    for (Eigen::Index i = 0; i < in.rows(); ++i) rows.push_back({in.row(i).transpose(), p.ineq_lower[i], p.ineq_upper[i]});
    for (Eigen::Index j = 0; j < p.n_vars(); ++j) {
        if (!std::isfinite(p.var_lower[j]) && !std::isfinite(p.var_upper[j])) continue;
        Eigen::VectorXd e = Eigen::VectorXd::Zero(p.n_vars());
        e[j] = 1.0;
        rows.push_back({e, p.var_lower[j], p.var_upper[j]});
    }
    return rows;
}

/// Returns the optimal objective, or nullopt if no KKT point exists.
inline std::optional<double> kkt_oracle(const QpProblem& p, Eigen::VectorXd* x_out = nullptr) {
    const auto rows = dense_rows(p);
    const Eigen::Index n = p.n_vars();
    const Eigen::MatrixXd H = Eigen::MatrixXd(p.hessian);
    // 0 inactive, 1 at lower, 2 at upper; equalities are always at lower.
    std::vector<int> state(rows.size(), 0);
    std::optional<double> best;
    const double tol = 1e-9;
    while (true) {
        std::vector<std::size_t> act;
        bool skip = false;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const bool eq = rows[i].lo == rows[i].hi;
            if (eq && state[i] != 1) skip = true;
            if (state[i] == 1 && !std::isfinite(rows[i].lo)) skip = true;
            if (state[i] == 2 && !std::isfinite(rows[i].hi)) skip = true;
            if (state[i] != 0) act.push_back(i);
        }
        if (!skip && static_cast<Eigen::Index>(act.size()) <= n) {
            const auto m = static_cast<Eigen::Index>(act.size());
            Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + m, n + m);
            Eigen::VectorXd rhs(n + m);
            K.topLeftCorner(n, n) = H;
            rhs.head(n) = -p.linear_cost;
            for (Eigen::Index r = 0; r < m; ++r) {
                const auto& row = rows[act[static_cast<std::size_t>(r)]];
                K.block(n + r, 0, 1, n) = row.a.transpose();
                K.block(0, n + r, n, 1) = row.a;
                rhs[n + r] = state[act[static_cast<std::size_t>(r)]] == 1 ? row.lo : row.hi;
            }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
            if (lu.isInvertible()) {
                const Eigen::VectorXd sol = lu.solve(rhs);
                const Eigen::VectorXd x = sol.head(n);
                bool ok = true;
                for (const auto& row : rows) {
                    const double ax = row.a.dot(x);
                    const double scale = 1.0 + std::abs(ax);
                    if (ax < row.lo - tol * scale || ax > row.hi + tol * scale) ok = false;
                }
                // Stationarity here is Hx + q + A'lambda = 0, so lambda <= 0 at a
                // lower bound and >= 0 at an upper bound.
                for (Eigen::Index r = 0; r < m && ok; ++r) {
                    const std::size_t i = act[static_cast<std::size_t>(r)];
                    if (rows[i].lo == rows[i].hi) continue;
                    const double lam = sol[n + r];
                    if (state[i] == 1 && lam > tol) ok = false;
                    if (state[i] == 2 && lam < -tol) ok = false;
                }
                if (ok) {
                    const double f = p.objective(x);
                    if (!best || f < *best) {
                        best = f;
                        if (x_out) *x_out = x;
                    }
                }
            }
        }
        std::size_t k = 0;
        while (k < state.size() && state[k] == 2) state[k++] = 0;
        if (k == state.size()) break;
        ++state[k];
    }
    return best;
}

}  // namespace facts::testing
