#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "facts/acpf.hpp"
#include "facts/grid_model.hpp"
#include "facts/qp_solver.hpp"
#include "facts/scenarios.hpp"

namespace facts {

/// Planner and QP-assembly parameters. Costs are in $ per Ohm (SC) and
/// $ per MVAr (SVC); voltages and powers in pu.
struct PlanConfig {
    double c_sc = 50000.0;
    double c_svc = 50000.0;
    double n_years = 1.0;
    double eps_q = 0.1;
    double trust_v = 0.05;
    double trust_theta = 0.1;
    double trust_dx = 0.2;  // fraction of |x0|
    double sc_max = 0.8;    // largest |dx| as a fraction of |x0|
    double svc_threshold_mvar = 0.05;
    double sc_threshold = 0.005;  // fraction of |x0|
    double tol_feas = 1e-4;
    double tol_outer = 1e-4;
    int max_outer_iter = 50;
    /// Dense branch / bus indices; unset means all in-service branches and
    /// all buses without a generator.
    std::optional<std::vector<std::size_t>> candidate_sc;
    std::optional<std::vector<std::size_t>> candidate_svc;
    bool freeze_dispatch = false;
    bool include_line_limits = true;
    int threads = 0;  // 0 = hardware concurrency
    QpSettings qp = planner_qp_settings();

    /// Throws std::invalid_argument when a parameter is out of range.
    void validate() const;

    std::vector<std::size_t> sc_candidates(const Network& net) const;
    std::vector<std::size_t> svc_candidates(const Network& net) const;
};

/// Installed capacities: per dense branch (pu reactance) and per dense bus (pu).
struct Capacities {
    Eigen::VectorXd sc;
    Eigen::VectorXd svc;

    static Capacities zero(const Network& net);
};

/// $ per pu of installed capacity, per dense branch and per dense bus.
Eigen::VectorXd sc_unit_cost(const Network& net, double c_sc_per_ohm);
double svc_unit_cost(const Network& net, double c_svc_per_mvar);

/// Linear rows in the StateLayout columns of one scenario:
/// lower <= A * (y - y_pre) <= upper.
struct LinearRows {
    SparseMatrix a;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    std::vector<std::size_t> source;  // line end (k or n_branch + k) or bus row
};

/// F_pre + grad F * dy <= S^2 for every line end with a positive rating.
LinearRows linearize_line_limits(const Network& net, const Eigen::VectorXd& s_pre, const SparseMatrix& jac);

/// Balance residual plus its gradient equals zero: one P and one Q row per bus.
LinearRows linearize_balances(const Network& net, const SystemState& state, const Loads& loads,
                              const SparseMatrix& jac);

/// Column positions of the assembled QP.
struct QpLayout {
    struct Block {
        Eigen::Index v = 0, theta = 0, p_gen = 0, q_gen = 0, dx = 0, dq = 0;
    };
    std::vector<Block> scenario;
    Eigen::Index cap_sc = 0, cap_svc = 0;
    std::vector<std::size_t> sc_branches;  // dense branch per dx / cap_sc slot
    std::vector<std::size_t> svc_buses;    // dense bus per dq / cap_svc slot
    Eigen::Index n = 0;
};

struct AssembledQp {
    QpProblem qp;
    QpLayout layout;
    std::vector<std::size_t> line_rows_per_scenario;
};

/// Joint QP over deviations of every scenario plus the shared absolute
/// capacities. `weights` are the annual hours of each scenario.
AssembledQp assemble_qp(const Network& net, const std::vector<Scenario>& scenarios,
                        const std::vector<SystemState>& states, const std::vector<double>& weights,
                        const PlanConfig& cfg);

/// Moves every scenario state by the QP deviations and returns the capacity
/// vectors found by the QP.
Capacities apply_step(const Network& net, const AssembledQp& a, const Eigen::VectorXd& x,
                      std::vector<SystemState>& states);

}  // namespace facts
