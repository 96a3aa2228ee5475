#pragma once

#include <limits>
#include <random>

#include "facts/qp_solver.hpp"

namespace facts::testing {

/// Random strictly convex QP with n <= 6 variables that is feasible by
/// construction: all constraints are built around a random point.
inline QpProblem random_feasible_qp(std::mt19937_64& rng, int n, int n_eq, int n_ineq, int n_box) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.05, 1.5);
    const double inf = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) M(i, j) = g(rng);
    const Eigen::MatrixXd H = M.transpose() * M + 0.1 * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd x0(n), q(n);
    for (int i = 0; i < n; ++i) {
        x0[i] = g(rng);
        q[i] = 3.0 * g(rng);
    }
    QpProblem p = QpProblem::unconstrained(n);
    p.hessian = H.sparseView();
    p.linear_cost = q;
    Eigen::MatrixXd Aeq(n_eq, n), Ain(n_ineq, n);
    for (int i = 0; i < n_eq; ++i)
        for (int j = 0; j < n; ++j) Aeq(i, j) = g(rng);
    for (int i = 0; i < n_ineq; ++i)
        for (int j = 0; j < n; ++j) Ain(i, j) = g(rng);
    p.eq_matrix = Aeq.sparseView();
    p.eq_rhs = Aeq * x0;
    p.ineq_matrix = Ain.sparseView();
    const Eigen::VectorXd ax = Ain * x0;
    p.ineq_lower.resize(n_ineq);
    p.ineq_upper.resize(n_ineq);
    for (int i = 0; i < n_ineq; ++i) {
        p.ineq_lower[i] = (i % 3 == 2) ? -inf : ax[i] - u(rng);
        p.ineq_upper[i] = (i % 3 == 1) ? inf : ax[i] + u(rng);
    }
    for (int j = 0; j < std::min(n_box, n); ++j) {
        p.var_lower[j] = x0[j] - u(rng);
        p.var_upper[j] = x0[j] + u(rng);
    }
    return p;
}

}  // namespace facts::testing

namespace facts::testing {

/// Ten primal-infeasible instances of different shapes, indexed 0..9.
inline QpProblem infeasible_qp(int k) {
    const double inf = std::numeric_limits<double>::infinity();
    std::mt19937_64 rng(1000 + static_cast<unsigned>(k));
    std::normal_distribution<double> g(0.0, 1.0);
    const int n = 2 + k % 4;
    QpProblem p = QpProblem::unconstrained(n);
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n) * (k % 2 ? 1.0 : 0.0);
    p.hessian = H.sparseView();
    for (int j = 0; j < n; ++j) p.linear_cost[j] = g(rng);
    Eigen::VectorXd a(n);
    for (int j = 0; j < n; ++j) a[j] = g(rng);
    switch (k % 5) {
        case 0: {  // a'x >= 1 and a'x <= -1 as two rows
            Eigen::MatrixXd A(2, n);
            A.row(0) = a.transpose();
            A.row(1) = a.transpose();
            p.ineq_matrix = A.sparseView();
            p.ineq_lower = Eigen::Vector2d(1.0, -inf);
            p.ineq_upper = Eigen::Vector2d(inf, -1.0);
            break;
        }
        case 1: {  // equality a'x = 5 with boxes |x| <= 0.1 and |a| small
            Eigen::MatrixXd A = a.transpose();
            p.eq_matrix = A.sparseView();
            p.eq_rhs = Eigen::VectorXd::Constant(1, 5.0 + a.cwiseAbs().sum());
            p.var_lower.setConstant(-1.0);
            p.var_upper.setConstant(1.0);
            break;
        }
        case 2: {  // two contradictory equalities
            Eigen::MatrixXd A(2, n);
            A.row(0) = a.transpose();
            A.row(1) = 2.0 * a.transpose();
            p.eq_matrix = A.sparseView();
            p.eq_rhs = Eigen::Vector2d(1.0, 3.0);
            break;
        }
        case 3: {  // sum x >= n + 1 with x <= 1
            Eigen::MatrixXd A = Eigen::MatrixXd::Ones(1, n);
            p.ineq_matrix = A.sparseView();
            p.ineq_lower = Eigen::VectorXd::Constant(1, n + 1.0);
            p.ineq_upper = Eigen::VectorXd::Constant(1, inf);
            p.var_upper.setConstant(1.0);
            break;
        }
        default: {  // x0 - x1 >= 1, x1 - x0 >= 1
            Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, n);
            A(0, 0) = 1.0;
            A(0, 1) = -1.0;
            A(1, 0) = -1.0;
            A(1, 1) = 1.0;
            p.ineq_matrix = A.sparseView();
            p.ineq_lower = Eigen::Vector2d(1.0, 1.0);
            p.ineq_upper = Eigen::Vector2d(inf, inf);
            break;
        }
    }
    if (p.eq_matrix.rows() == 0) {
        p.eq_matrix.resize(0, n);
        p.eq_rhs.resize(0);
    }
    if (p.ineq_matrix.rows() == 0) {
        p.ineq_matrix.resize(0, n);
        p.ineq_lower.resize(0);
        p.ineq_upper.resize(0);
    }
    return p;
}

}  // namespace facts::testing
