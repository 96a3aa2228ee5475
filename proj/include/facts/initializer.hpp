#pragma once

#include "facts/acpf.hpp"
#include "facts/grid_model.hpp"
#include "facts/linearize.hpp"
#include "facts/scenarios.hpp"

namespace facts {

struct InitOptions {
    double alpha_min = 0.1;
    double alpha_tol = 1e-3;
    int max_bisection = 20;
    int max_outer_iter = 50;
    int probe_outer_iter = 15;  // per bisection probe; a probe that needs more counts as infeasible
    QpSettings qp = planner_qp_settings();
};

struct InitResult {
    SystemState state;
    bool feasible = false;  // true when the OPF met every limit it enforced
    double alpha = 1.0;     // load scale used by the proportional procedure
    int outer_iterations = 0;
};

/// Economic dispatch with line ratings ignored: the sequential QP with no
/// compensation candidates and no line rows. Throws std::runtime_error when
/// generation capacity is short of demand or the iteration fails.
InitResult init_opf_no_thermal(const Network& net, const Scenario& scenario, const InitOptions& opts = {});

/// Same machinery with line ratings enforced. `feasible` reports whether every
/// limit holds at the result.
InitResult init_opf(const Network& net, const Scenario& scenario, const InitOptions& opts = {});

/// Proportional response: find the largest load scale alpha in [alpha_min, 1]
/// at which the OPF is feasible, dispatch there, scale generation back up by
/// 1/alpha and re-solve the power flow at the full load.
InitResult init_proportional(const Network& net, const Scenario& scenario, const InitOptions& opts = {});

/// Scales every generator's active output by `factor`.
SystemState scale_dispatch(const Network& net, const SystemState& state, double factor);

/// Congestion class of a scenario at its no-thermal OPF dispatch: uncongested
/// if every rated line end carries at most (1 - margin) of its rating and no
/// other limit is violated.
Congestion classify_congestion(const Network& net, const Scenario& scenario, double margin = 0.02,
                               const InitOptions& opts = {});

}  // namespace facts
