#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "facts/acpf.hpp"
#include "facts/grid_model.hpp"
#include "facts/linearize.hpp"
#include "facts/qp_solver.hpp"
#include "facts/scenarios.hpp"

namespace facts {

struct Violation {
    enum class Kind { p_gen, q_gen, voltage, line };
    Kind kind;
    std::size_t element;  // dense generator, bus, or line end (k or n_branch + k)
    double magnitude;     // pu beyond the limit
};

std::string to_string(Violation::Kind k);

/// Generator boxes, voltage boxes and line apparent-power limits violated by
/// more than `tol`.
std::vector<Violation> check_feasibility(const Network& net, const SystemState& state, double tol = 0.0);

double max_violation(const std::vector<Violation>& v);

struct CostBreakdown {
    double investment = 0.0;       // $
    double hourly = 0.0;           // expected operational $/h over an average year
    double total = 0.0;            // investment + n_years * 8760 * hourly
};

/// Investment plus operational cost of a plan. `weights` are annual hours per
/// scenario (see annual_hours).
CostBreakdown evaluate_objective(const Network& net, const Capacities& cap, const std::vector<SystemState>& states,
                                 const std::vector<double>& weights, const PlanConfig& cfg);

enum class PlanStatus { converged, not_converged, infeasible };
std::string to_string(PlanStatus s);

struct IterationRecord {
    int iteration = 0;
    double objective = 0.0;
    double max_violation = 0.0;
    QpStatus qp_status = QpStatus::optimal;
    int qp_iterations = 0;
    int pf_iterations = 0;
    double step_norm = 0.0;
    double trust_v = 0.0;
    bool accepted = false;
};

struct InvestmentPlan {
    Capacities capacity;
    std::vector<SystemState> states;
    CostBreakdown cost;
    int svc_count = 0;
    int sc_count = 0;
    PlanStatus status = PlanStatus::not_converged;
};

struct PlanResult {
    InvestmentPlan plan;
    std::vector<IterationRecord> trace;
    std::vector<std::vector<Violation>> violations_before;
    std::vector<std::vector<Violation>> violations_after;
    std::string message;
};

/// Sequential linearize / QP / power-flow loop without pruning. `states`
/// must be power-flow solutions for `scenarios`.
PlanResult run_sqp(const Network& net, const std::vector<Scenario>& scenarios, std::vector<SystemState> states,
                   const PlanConfig& cfg);

/// Full planner: run_sqp, then sparsity pruning verified by power flow.
PlanResult plan(const Network& net, const std::vector<Scenario>& scenarios, const std::vector<SystemState>& initial,
                const PlanConfig& cfg);

/// Solves a power flow for one scenario holding the state's non-slack
/// dispatch, generator-bus voltages, and compensation settings.
PfResult resolve_state(const Network& net, const Scenario& scenario, const SystemState& state);

}  // namespace facts
