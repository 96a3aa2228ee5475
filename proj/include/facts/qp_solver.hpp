#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace facts {

/// What a QP column stands for in a planning problem. Generic problems
/// leave `QpProblem::var_map` empty.
enum class Quantity { v, theta, p_gen, q_gen, dx, dq, sc_capacity, svc_capacity };

struct VarKey {
    int scenario = -1;  // -1 for variables shared by all scenarios
    Quantity quantity = Quantity::v;
    std::size_t element = 0;  // dense bus/branch/generator index
};

/// min 1/2 x'Hx + c'x + c0
///   s.t. eq_matrix x = eq_rhs
///        ineq_lower <= ineq_matrix x <= ineq_upper
///        var_lower  <= x <= var_upper
/// Infinite bounds are written as +-infinity.
struct QpProblem {
    Eigen::SparseMatrix<double> hessian;
    Eigen::VectorXd linear_cost;
    double objective_constant = 0.0;
    Eigen::SparseMatrix<double> eq_matrix;
    Eigen::VectorXd eq_rhs;
    Eigen::SparseMatrix<double> ineq_matrix;
    Eigen::VectorXd ineq_lower;
    Eigen::VectorXd ineq_upper;
    Eigen::VectorXd var_lower;
    Eigen::VectorXd var_upper;
    std::vector<VarKey> var_map;

    Eigen::Index n_vars() const { return linear_cost.size(); }
    double objective(const Eigen::VectorXd& x) const;

    /// Largest violation of any constraint or bound at x (absolute).
    double max_violation(const Eigen::VectorXd& x) const;

    /// Throws std::invalid_argument on inconsistent dimensions or bounds.
    void validate() const;

    /// Empty problem with n variables, no constraints, free bounds.
    static QpProblem unconstrained(Eigen::Index n);
};

enum class QpStatus { optimal, max_iter, primal_infeasible, dual_infeasible };

enum class QpMethod { admm, interior_point };

std::string to_string(QpMethod m);

std::string to_string(QpStatus s);

struct QpSolution {
    Eigen::VectorXd x;
    /// Multipliers of the stacked constraints [eq; ineq; var bounds].
    Eigen::VectorXd y;
    QpStatus status = QpStatus::max_iter;
    /// Infinity-norm residuals normalized by max(1, problem scale), see
    /// solve(); optimal implies primal_res <= tol_primal, dual_res <= tol_dual.
    double primal_res = 0.0;
    double dual_res = 0.0;
    int iterations = 0;
    bool polished = false;
    QpMethod method = QpMethod::admm;  // the method that produced x
};

struct QpSettings {
    QpMethod method = QpMethod::admm;
    double tol_primal = 1e-6;
    double tol_dual = 1e-6;
    int max_iter = 20000;  // ADMM iterations
    int ipm_max_iter = 100;
    double rho = 0.1;
    double sigma = 1e-6;
    double alpha = 1.6;
    bool adaptive_rho = true;
    int check_every = 25;
    int scaling_iter = 10;
    bool polish = true;
    int polish_refine_iter = 3;
    double eps_infeasible = 1e-6;
    std::optional<Eigen::VectorXd> warm_start;
};

/// Convex QP solver. The default method is operator splitting (ADMM);
/// QpMethod::interior_point runs a primal-dual interior-point method and
/// falls back to ADMM when it does not reach the tolerances, so that
/// infeasibility is still certified. The residuals reported in QpSolution are
///   primal_res = |Ax - z|_inf / max(1, |Ax|_inf, |z|_inf)
///   dual_res   = |Hx + c + A'y|_inf / max(1, |Hx|_inf, |A'y|_inf, |c|_inf)
/// over the stacked constraint matrix A.
QpSolution solve(const QpProblem& problem, const QpSettings& settings = {});

/// Settings used inside the sequential planner: interior point, which keeps
/// the iteration count flat in the number of scenarios.
inline QpSettings planner_qp_settings() {
    QpSettings s;
    s.method = QpMethod::interior_point;
    return s;
}

inline QpSolution solve(const QpProblem& problem, double tol_primal, double tol_dual, int max_iter) {
    QpSettings s;
    s.tol_primal = tol_primal;
    s.tol_dual = tol_dual;
    s.max_iter = max_iter;
    return solve(problem, s);
}

/// Writes the problem as sparse triplets ("H i j v", "c i v", "A i j v",
/// "b i lo hi") for cross-checking with external solvers.
void write_triplets(const QpProblem& problem, std::ostream& os);

}  // namespace facts
