#include "facts/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "facts/parallel.hpp"

namespace facts {

namespace {

Capacities capacities_of(const Network& net, const std::vector<SystemState>& states) {
    Capacities cap = Capacities::zero(net);
    for (const auto& s : states) {
        cap.sc = cap.sc.cwiseMax(s.dx.cwiseAbs());
        cap.svc = cap.svc.cwiseMax(s.dq.cwiseAbs());
    }
    return cap;
}

double worst_violation(const Network& net, const std::vector<SystemState>& states, bool lines = true) {
    double v = 0.0;
    for (const auto& s : states)
        for (const auto& x : check_feasibility(net, s))
            if (lines || x.kind != Violation::Kind::line) v = std::max(v, x.magnitude);
    return v;
}

struct Iterate {
    std::vector<SystemState> states;
    Capacities cap;
    CostBreakdown cost;
    double violation = 0.0;
};

Iterate make_iterate(const Network& net, std::vector<SystemState> states, const std::vector<double>& weights,
                     const PlanConfig& cfg) {
    Iterate it;
    it.cap = capacities_of(net, states);
    it.cost = evaluate_objective(net, it.cap, states, weights, cfg);
    it.violation = worst_violation(net, states, cfg.include_line_limits);
    it.states = std::move(states);
    return it;
}

// Re-solves every scenario; returns false if any power flow fails.
bool resolve_all(const Network& net, const std::vector<Scenario>& scenarios, std::vector<SystemState>& states,
                 int threads, int* iterations) {
    std::vector<PfResult> out(states.size());
    parallel_for(states.size(), threads, [&](std::size_t a) { out[a] = resolve_state(net, scenarios[a], states[a]); });
    bool ok = true;
    for (std::size_t a = 0; a < states.size(); ++a) {
        if (iterations) *iterations += out[a].iterations;
        if (!out[a].converged) {
            ok = false;
            continue;
        }
        states[a] = std::move(out[a].state);
    }
    return ok;
}

int count_nonzero(const Eigen::VectorXd& v) { return static_cast<int>((v.array() > 0.0).count()); }

}  // namespace

std::string to_string(Violation::Kind k) {
    switch (k) {
        case Violation::Kind::p_gen: return "p_gen";
        case Violation::Kind::q_gen: return "q_gen";
        case Violation::Kind::voltage: return "voltage";
        case Violation::Kind::line: return "line";
    }
    return "unknown";
}

std::string to_string(PlanStatus s) {
    switch (s) {
        case PlanStatus::converged: return "converged";
        case PlanStatus::not_converged: return "not_converged";
        case PlanStatus::infeasible: return "infeasible";
    }
    return "unknown";
}

std::vector<Violation> check_feasibility(const Network& net, const SystemState& s, double tol) {
    std::vector<Violation> out;
    auto box = [&](Violation::Kind kind, std::size_t e, double val, double lo, double hi) {
        const double over = std::max(val - hi, lo - val);
        if (over > tol) out.push_back({kind, e, over});
    };
    for (std::size_t g = 0; g < net.n_gen(); ++g) {
        const Generator& gen = net.gen(g);
        box(Violation::Kind::p_gen, g, s.p_gen[static_cast<Eigen::Index>(g)], gen.p_min, gen.p_max);
        box(Violation::Kind::q_gen, g, s.q_gen[static_cast<Eigen::Index>(g)], gen.q_min, gen.q_max);
    }
    for (std::size_t i = 0; i < net.n_bus(); ++i)
        box(Violation::Kind::voltage, i, s.v[static_cast<Eigen::Index>(i)], net.bus(i).v_min, net.bus(i).v_max);
    const Eigen::VectorXd sq = apparent_sq(net, s);
    const std::size_t nl = net.n_branch();
    for (std::size_t e = 0; e < 2 * nl; ++e) {
        const double lim = net.branch(e % nl).s_rate;
        if (lim <= 0.0) continue;
        const double over = std::sqrt(sq[static_cast<Eigen::Index>(e)]) - lim;
        if (over > tol) out.push_back({Violation::Kind::line, e, over});
    }
    return out;
}

double max_violation(const std::vector<Violation>& v) {
    double m = 0.0;
    for (const auto& x : v) m = std::max(m, x.magnitude);
    return m;
}

CostBreakdown evaluate_objective(const Network& net, const Capacities& cap, const std::vector<SystemState>& states,
                                 const std::vector<double>& weights, const PlanConfig& cfg) {
    CostBreakdown c;
    c.investment = sc_unit_cost(net, cfg.c_sc).dot(cap.sc) + svc_unit_cost(net, cfg.c_svc) * cap.svc.sum();
    for (std::size_t a = 0; a < states.size(); ++a) {
        double h = 0.0;
        for (std::size_t g = 0; g < net.n_gen(); ++g) h += net.gen_cost(g, states[a].p_gen[static_cast<Eigen::Index>(g)]);
        c.hourly += weights[a] / 8760.0 * h;
    }
    c.total = c.investment + cfg.n_years * 8760.0 * c.hourly;
    return c;
}

PfResult resolve_state(const Network& net, const Scenario& scenario, const SystemState& state) {
    return solve_pf(net, state, scenario.loads());
}

PlanResult run_sqp(const Network& net, const std::vector<Scenario>& scenarios, std::vector<SystemState> states,
                   const PlanConfig& cfg) {
    cfg.validate();
    if (scenarios.empty() || states.size() != scenarios.size())
        throw std::invalid_argument("run_sqp: need one state per scenario");
    const std::vector<double> weights = annual_hours(scenarios);

    PlanResult res;
    for (const auto& s : states) res.violations_before.push_back(check_feasibility(net, s, cfg.tol_feas));
    if (!resolve_all(net, scenarios, states, cfg.threads, nullptr)) {
        res.plan.status = PlanStatus::infeasible;
        res.message = "initial power flow did not converge";
        return res;
    }

    Iterate cur = make_iterate(net, std::move(states), weights, cfg);
    bool have_best = cur.violation <= cfg.tol_feas;
    Iterate best = cur;

    double tv = cfg.trust_v, tth = cfg.trust_theta, tdx = cfg.trust_dx;
    double mu = 0.0;
    int pf_failures = 0;
    PlanStatus status = PlanStatus::not_converged;

    for (int iter = 1; iter <= cfg.max_outer_iter; ++iter) {
        PlanConfig step_cfg = cfg;
        step_cfg.trust_v = tv;
        step_cfg.trust_theta = tth;
        step_cfg.trust_dx = tdx;
        const AssembledQp qp = assemble_qp(net, scenarios, cur.states, weights, step_cfg);
        const QpSolution sol = solve(qp.qp, cfg.qp);

        IterationRecord rec;
        rec.iteration = iter;
        rec.qp_status = sol.status;
        rec.qp_iterations = sol.iterations;
        rec.trust_v = tv;

        if (sol.status == QpStatus::primal_infeasible || sol.status == QpStatus::dual_infeasible) {
            rec.objective = cur.cost.total;
            rec.max_violation = cur.violation;
            res.trace.push_back(rec);
            std::ostringstream os;
            os << "QP " << to_string(sol.status) << " at outer iteration " << iter;
            if (sol.status == QpStatus::primal_infeasible && sol.y.size()) {
                Eigen::Index row = 0;
                sol.y.cwiseAbs().maxCoeff(&row);
                os << "; largest certificate entry on stacked row " << row;
            }
            res.message = os.str();
            status = PlanStatus::infeasible;
            break;
        }
        if (sol.y.allFinite() && sol.y.size()) mu = std::max(mu, 2.0 * sol.y.cwiseAbs().maxCoeff());

        std::vector<SystemState> trial = cur.states;
        apply_step(net, qp, sol.x, trial);
        rec.step_norm = sol.x.cwiseAbs().maxCoeff();
        int pf_iter = 0;
        const bool pf_ok = resolve_all(net, scenarios, trial, cfg.threads, &pf_iter);
        rec.pf_iterations = pf_iter;
        if (!pf_ok) {
            tv *= 0.5;
            tth *= 0.5;
            tdx *= 0.5;
            rec.objective = cur.cost.total;
            rec.max_violation = cur.violation;
            res.trace.push_back(rec);
            if (++pf_failures > 3) {
                res.message = "power flow diverged after repeated trust-region reductions";
                break;
            }
            continue;
        }
        pf_failures = 0;

        Iterate next = make_iterate(net, std::move(trial), weights, cfg);
        rec.objective = next.cost.total;
        rec.max_violation = next.violation;

        const double merit_cur = cur.cost.total + mu * cur.violation;
        const double merit_next = next.cost.total + mu * next.violation;
        const double scale = std::max(1.0, std::abs(merit_cur));
        const double d_obj = std::abs(next.cost.total - cur.cost.total);
        // Floor of one dollar so a zero plan (objective ~0) can terminate.
        const bool small_change =
            d_obj <= cfg.tol_outer * std::max(1.0, std::abs(next.cost.total)) || rec.step_norm <= 1e-9;
        rec.accepted = merit_next <= merit_cur + 1e-12 * scale || (next.violation <= cfg.tol_feas && small_change &&
                                                                  cur.violation <= cfg.tol_feas);
        res.trace.push_back(rec);

        if (!rec.accepted) {
            tv *= 0.5;
            tth *= 0.5;
            tdx *= 0.5;
            if (tv < 1e-6 * cfg.trust_v) {
                if (cur.violation <= cfg.tol_feas) status = PlanStatus::converged;
                break;
            }
            continue;
        }

        cur = std::move(next);
        if (cur.violation <= cfg.tol_feas && (!have_best || cur.cost.total <= best.cost.total)) {
            best = cur;
            have_best = true;
        }
        if (cur.violation <= cfg.tol_feas && small_change) {
            status = PlanStatus::converged;
            break;
        }
        tv = std::min(cfg.trust_v, 2.0 * tv);
        tth = std::min(cfg.trust_theta, 2.0 * tth);
        tdx = std::min(cfg.trust_dx, 2.0 * tdx);
    }

    if (status == PlanStatus::infeasible && !have_best) {
        best = cur;
    } else if (!have_best) {
        status = PlanStatus::infeasible;
        best = cur;
        if (res.message.empty()) res.message = "no feasible iterate found";
    } else if (status == PlanStatus::converged && cur.violation <= cfg.tol_feas) {
        // Keep the final iterate: converged means its objective is stable.
        if (cur.cost.total <= best.cost.total * (1.0 + cfg.tol_outer)) best = cur;
    } else if (status == PlanStatus::infeasible) {
        status = PlanStatus::not_converged;
    }

    res.plan.capacity = best.cap;
    res.plan.cost = best.cost;
    res.plan.states = std::move(best.states);
    res.plan.status = status;
    res.plan.sc_count = count_nonzero(res.plan.capacity.sc);
    res.plan.svc_count = count_nonzero(res.plan.capacity.svc);
    for (const auto& s : res.plan.states) res.violations_after.push_back(check_feasibility(net, s, cfg.tol_feas));
    return res;
}

PlanResult plan(const Network& net, const std::vector<Scenario>& scenarios, const std::vector<SystemState>& initial,
                const PlanConfig& cfg) {
    PlanResult res = run_sqp(net, scenarios, initial, cfg);
    if (res.plan.status == PlanStatus::infeasible) return res;

    const std::vector<double> weights = annual_hours(scenarios);
    InvestmentPlan& p = res.plan;
    const double svc_threshold = cfg.svc_threshold_mvar / net.base_mva();

    // Candidates for pruning, smallest relative size first.
    struct Device {
        bool svc;
        std::size_t index;
        double relative;
    };
    std::vector<Device> small;
    for (std::size_t k = 0; k < net.n_branch(); ++k) {
        const double c = p.capacity.sc[static_cast<Eigen::Index>(k)];
        const double x0 = std::abs(net.branch(k).x0);
        if (c > 0.0 && c < cfg.sc_threshold * x0) small.push_back({false, k, c / (cfg.sc_threshold * x0)});
    }
    for (std::size_t i = 0; i < net.n_bus(); ++i) {
        const double c = p.capacity.svc[static_cast<Eigen::Index>(i)];
        if (c > 0.0 && c < svc_threshold) small.push_back({true, i, c / svc_threshold});
    }
    std::stable_sort(small.begin(), small.end(), [](const Device& a, const Device& b) { return a.relative < b.relative; });

    const double allowed = std::max(cfg.tol_feas, worst_violation(net, p.states, cfg.include_line_limits));
    auto try_prune = [&](const std::vector<Device>& devs, std::vector<SystemState>& states) {
        for (auto& s : states)
            for (const auto& d : devs) {
                if (d.svc) s.dq[static_cast<Eigen::Index>(d.index)] = 0.0;
                else s.dx[static_cast<Eigen::Index>(d.index)] = 0.0;
            }
        if (!resolve_all(net, scenarios, states, cfg.threads, nullptr)) return false;
        return worst_violation(net, states, cfg.include_line_limits) <= allowed;
    };

    if (!small.empty()) {
        std::vector<SystemState> all = p.states;
        if (try_prune(small, all)) {
            p.states = std::move(all);
        } else {
            for (const auto& d : small) {
                std::vector<SystemState> one = p.states;
                if (try_prune({d}, one)) p.states = std::move(one);
            }
        }
    }

    p.capacity = capacities_of(net, p.states);
    p.cost = evaluate_objective(net, p.capacity, p.states, weights, cfg);
    p.sc_count = count_nonzero(p.capacity.sc);
    p.svc_count = count_nonzero(p.capacity.svc);
    res.violations_after.clear();
    for (const auto& s : p.states) res.violations_after.push_back(check_feasibility(net, s, cfg.tol_feas));
    if (p.status == PlanStatus::converged && worst_violation(net, p.states, cfg.include_line_limits) > cfg.tol_feas)
        p.status = PlanStatus::not_converged;
    return res;
}

}  // namespace facts
