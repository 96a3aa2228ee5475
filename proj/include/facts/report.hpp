#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "facts/grid_model.hpp"
#include "facts/linearize.hpp"
#include "facts/planner.hpp"
#include "facts/scenarios.hpp"

namespace facts {

/// Raised for malformed or unknown configuration / report content.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Flat JSON configuration. Keys (all optional):
///   c_sc ($/Ohm), c_svc ($/MVAr), n_years, eps_q, trust_v, trust_theta,
///   trust_dx, sc_max, sparsity_threshold_svc (MVAr), sparsity_threshold_sc,
///   tol_feas, tol_outer, max_outer_iter, freeze_dispatch,
///   include_line_limits, threads, candidate_sc_branches (1-based branch
///   rows of the case file), candidate_svc_buses (bus ids), qp_tol_primal,
///   qp_tol_dual, qp_max_iter, qp_rho, qp_sigma, qp_alpha, qp_polish,
///   qp_ipm_max_iter, qp_method ("admm" or "interior_point").
/// Values are applied on top of `base`. Throws SchemaError.
PlanConfig config_from_json(std::string_view text, const Network& net, const PlanConfig& base = {});
std::string config_to_json(const PlanConfig& cfg, const Network& net);

/// Plan report, schema version 1. Everything is in engineering units and
/// case-file identifiers so it stands on its own.
struct PlanReport {
    struct Svc {
        int bus = 0;
        double mvar = 0.0;
        bool operator==(const Svc&) const = default;
    };
    struct Sc {
        int branch = 0;  // 1-based case-file row
        int from = 0;
        int to = 0;
        double x_pu = 0.0;     // installed |dx| capacity, or a setting
        double percent = 0.0;  // of the original reactance
        bool operator==(const Sc&) const = default;
    };
    struct ViolationEntry {
        std::string kind;
        std::string element;  // "bus 8", "gen 2 at bus 2", "line 6-8 from"
        double magnitude = 0.0;
        bool operator==(const ViolationEntry&) const = default;
    };
    struct ScenarioEntry {
        int year = 0;
        int segment = 0;
        int sample = 0;
        double probability = 0.0;
        double hours = 0.0;
        double hourly_cost = 0.0;
        std::vector<Svc> svc_settings;
        std::vector<Sc> sc_settings;
        std::vector<ViolationEntry> before;
        std::vector<ViolationEntry> after;
        bool operator==(const ScenarioEntry&) const = default;
    };
    struct Iteration {
        int iteration = 0;
        double objective = 0.0;
        double max_violation = 0.0;
        std::string qp_status;
        int qp_iterations = 0;
        int pf_iterations = 0;
        double step_norm = 0.0;
        double trust_v = 0.0;
        bool accepted = false;
        bool operator==(const Iteration&) const = default;
    };

    int schema = 1;
    std::string status;
    std::string message;
    double investment = 0.0;
    double hourly = 0.0;
    double total = 0.0;
    double n_years = 0.0;
    std::vector<Svc> svc;
    std::vector<Sc> sc;
    std::vector<ScenarioEntry> scenarios;
    std::vector<Iteration> trace;
    std::string config;  // config_to_json output

    bool operator==(const PlanReport&) const = default;
};

PlanReport make_report(const Network& net, const std::vector<Scenario>& scenarios, const PlanResult& result,
                       const PlanConfig& cfg);

std::string report_to_json(const PlanReport& r);
/// Throws SchemaError on a wrong schema version or missing fields.
PlanReport report_from_json(std::string_view text);

/// Graphviz view of the network: nodes carry `svc_mvar`, edges `sc_pct` and
/// `overloaded` (any line violation before planning).
std::string plan_dot(const Network& net, const PlanResult& result);

/// Human-readable name of a violated element.
std::string element_name(const Network& net, const Violation& v);

}  // namespace facts
