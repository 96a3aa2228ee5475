#include "facts/initializer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "facts/planner.hpp"

namespace facts {

namespace {

Scenario scaled(const Scenario& s, double alpha) {
    Scenario out = s;
    out.p_load *= alpha;
    out.q_load *= alpha;
    return out;
}

// Case dispatch re-solved at the scenario's loads. Generation is first scaled
// to the demand so the slack bus does not carry the whole difference.
SystemState starting_state(const Network& net, const Scenario& sc) {
    SystemState s = SystemState::from_case(net);
    const double gen = s.p_gen.sum();
    const double load = sc.p_load.sum();
    if (gen > 0.0 && load > 0.0) s = scale_dispatch(net, s, load / gen);
    PfResult pf = resolve_state(net, sc, s);
    if (!pf.converged) throw std::runtime_error("initial power flow did not converge: " + pf.diagnostic);
    return pf.state;
}

InitResult run_opf(const Network& net, const Scenario& scenario, const InitOptions& opts, bool lines) {
    double pmax = 0.0;
    for (std::size_t g = 0; g < net.n_gen(); ++g) pmax += net.gen(g).p_max;
    if (pmax < scenario.p_load.sum()) throw std::runtime_error("insufficient generation capacity for the scenario load");

    PlanConfig cfg;
    cfg.candidate_sc = std::vector<std::size_t>{};
    cfg.candidate_svc = std::vector<std::size_t>{};
    cfg.include_line_limits = lines;
    cfg.n_years = 1.0;
    cfg.max_outer_iter = opts.max_outer_iter;
    cfg.threads = 1;
    cfg.qp = opts.qp;

    Scenario sc = scenario;
    sc.hours_per_year = 8760.0;
    sc.year = 0;
    const PlanResult r = run_sqp(net, {sc}, {starting_state(net, sc)}, cfg);
    if (r.plan.states.empty()) throw std::runtime_error("OPF failed: " + r.message);

    InitResult out;
    out.state = r.plan.states.front();
    out.feasible = r.plan.status == PlanStatus::converged;
    out.outer_iterations = static_cast<int>(r.trace.size());
    return out;
}

}  // namespace

SystemState scale_dispatch(const Network& net, const SystemState& state, double factor) {
    (void)net;
    SystemState out = state;
    out.p_gen *= factor;
    return out;
}

InitResult init_opf_no_thermal(const Network& net, const Scenario& scenario, const InitOptions& opts) {
    InitResult r = run_opf(net, scenario, opts, false);
    if (!r.feasible) throw std::runtime_error("no-thermal OPF did not converge");
    return r;
}

InitResult init_opf(const Network& net, const Scenario& scenario, const InitOptions& opts) {
    return run_opf(net, scenario, opts, true);
}

InitResult init_proportional(const Network& net, const Scenario& scenario, const InitOptions& opts) {
    InitOptions probe = opts;
    probe.max_outer_iter = std::min(opts.max_outer_iter, opts.probe_outer_iter);
    auto attempt = [&](double alpha) -> InitResult {
        try {
            InitResult r = run_opf(net, scaled(scenario, alpha), alpha == 1.0 ? opts : probe, true);
            r.alpha = alpha;
            return r;
        } catch (const std::runtime_error&) {
            InitResult r;
            r.alpha = alpha;
            return r;
        }
    };

    InitResult full = attempt(1.0);
    if (full.feasible) return full;

    InitResult lo = attempt(opts.alpha_min);
    if (!lo.feasible) throw std::runtime_error("no feasible load scale above alpha_min");
    double hi = 1.0;
    for (int k = 0; k < opts.max_bisection && hi - lo.alpha > opts.alpha_tol; ++k) {
        InitResult mid = attempt(0.5 * (lo.alpha + hi));
        if (mid.feasible) lo = std::move(mid);
        else hi = mid.alpha;
    }

    // Restore the load and scale every generator by the same factor; the
    // voltages stay at their OPF values and the slack absorbs the losses.
    SystemState up = scale_dispatch(net, lo.state, 1.0 / lo.alpha);
    PfResult pf = resolve_state(net, scenario, up);
    if (!pf.converged) throw std::runtime_error("power flow at restored load did not converge: " + pf.diagnostic);
    InitResult out;
    out.state = pf.state;
    out.alpha = lo.alpha;
    out.feasible = check_feasibility(net, out.state, 1e-4).empty();
    out.outer_iterations = lo.outer_iterations;
    return out;
}

Congestion classify_congestion(const Network& net, const Scenario& scenario, double margin, const InitOptions& opts) {
    InitResult r;
    try {
        r = init_opf_no_thermal(net, scenario, opts);
    } catch (const std::exception&) {
        return Congestion::infeasible;
    }
    for (const auto& v : check_feasibility(net, r.state, 1e-4))
        if (v.kind != Violation::Kind::line) return Congestion::infeasible;
    const Eigen::VectorXd sq = apparent_sq(net, r.state);
    const std::size_t nl = net.n_branch();
    for (std::size_t e = 0; e < 2 * nl; ++e) {
        const double lim = net.branch(e % nl).s_rate;
        if (lim > 0.0 && std::sqrt(sq[static_cast<Eigen::Index>(e)]) > (1.0 - margin) * lim) return Congestion::congested;
    }
    return Congestion::uncongested;
}

}  // namespace facts
