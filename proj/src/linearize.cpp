#include "facts/linearize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "facts/parallel.hpp"

namespace facts {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPfFeasTol = 1e-6;  // pu balance residual

using RowMajor = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

LinearRows select_rows(const RowMajor& jac, const std::vector<Eigen::Index>& rows) {
    LinearRows out;
    std::vector<Triplet> trip;
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (RowMajor::InnerIterator it(jac, rows[r]); it; ++it)
            trip.emplace_back(static_cast<int>(r), static_cast<int>(it.col()), it.value());
    out.a.resize(static_cast<Eigen::Index>(rows.size()), jac.cols());
    out.a.setFromTriplets(trip.begin(), trip.end());
    return out;
}

// Interval [lo, hi] intersected with [-radius, radius]; if the intersection
// is empty (the point already violates [lo, hi] by more than the radius) the
// radius is dropped.
std::pair<double, double> trust_box(double lo, double hi, double radius) {
    const double a = std::max(lo, -radius), b = std::min(hi, radius);
    if (a <= b) return {a, b};
    return {lo, hi};
}

}  // namespace

void PlanConfig::validate() const {
    auto fail = [](const char* what) { throw std::invalid_argument(std::string("PlanConfig: ") + what); };
    if (!(c_sc >= 0.0) || !(c_svc >= 0.0)) fail("costs must be non-negative");
    if (!(n_years >= 0.0)) fail("n_years must be non-negative");
    if (!(eps_q > 0.0)) fail("eps_q must be positive");
    if (!(trust_v > 0.0) || !(trust_theta > 0.0) || !(trust_dx > 0.0)) fail("trust radii must be positive");
    if (!(sc_max > 0.0) || !(sc_max < 1.0)) fail("sc_max must lie in (0, 1)");
    if (!(svc_threshold_mvar >= 0.0) || !(sc_threshold >= 0.0)) fail("thresholds must be non-negative");
    if (!(tol_feas > 0.0) || !(tol_outer > 0.0)) fail("tolerances must be positive");
    if (max_outer_iter < 1) fail("max_outer_iter must be at least 1");
}

std::vector<std::size_t> PlanConfig::sc_candidates(const Network& net) const {
    if (candidate_sc) {
        for (auto k : *candidate_sc)
            if (k >= net.n_branch()) throw std::invalid_argument("SC candidate branch out of range");
        return *candidate_sc;
    }
    std::vector<std::size_t> out(net.n_branch());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = k;
    return out;
}

std::vector<std::size_t> PlanConfig::svc_candidates(const Network& net) const {
    if (candidate_svc) {
        for (auto i : *candidate_svc)
            if (i >= net.n_bus()) throw std::invalid_argument("SVC candidate bus out of range");
        return *candidate_svc;
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < net.n_bus(); ++i)
        if (net.gens_at(i).empty()) out.push_back(i);
    return out;
}

Capacities Capacities::zero(const Network& net) {
    return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.n_branch())),
            Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.n_bus()))};
}

Eigen::VectorXd sc_unit_cost(const Network& net, double c_sc_per_ohm) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(net.n_branch()));
    for (std::size_t k = 0; k < net.n_branch(); ++k) {
        const double kv = net.bus(net.branch_from(k)).base_kv;
        const double z_base = kv > 0.0 ? kv * kv / net.base_mva() : 1.0;
        out[static_cast<Eigen::Index>(k)] = c_sc_per_ohm * z_base;
    }
    return out;
}

double svc_unit_cost(const Network& net, double c_svc_per_mvar) { return c_svc_per_mvar * net.base_mva(); }

LinearRows linearize_line_limits(const Network& net, const Eigen::VectorXd& s_pre, const SparseMatrix& jac) {
    const RowMajor rows_jac = jac;
    const auto nb = static_cast<Eigen::Index>(net.n_bus());
    const std::size_t nl = net.n_branch();
    std::vector<Eigen::Index> rows;
    std::vector<std::size_t> ends;
    for (std::size_t e = 0; e < 2 * nl; ++e)
        if (net.branch(e % nl).s_rate > 0.0) {
            rows.push_back(2 * nb + static_cast<Eigen::Index>(e));
            ends.push_back(e);
        }
    LinearRows out = select_rows(rows_jac, rows);
    out.lower = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(rows.size()), -kInf);
    out.upper.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < ends.size(); ++r) {
        const double lim = net.branch(ends[r] % nl).s_rate;
        out.upper[static_cast<Eigen::Index>(r)] = lim * lim - s_pre[static_cast<Eigen::Index>(ends[r])];
    }
    out.source = std::move(ends);
    return out;
}

LinearRows linearize_balances(const Network& net, const SystemState& state, const Loads& loads,
                              const SparseMatrix& jac) {
    const RowMajor rows_jac = jac;
    const auto nb2 = static_cast<Eigen::Index>(2 * net.n_bus());
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(nb2));
    for (Eigen::Index r = 0; r < nb2; ++r) rows[static_cast<std::size_t>(r)] = r;
    LinearRows out = select_rows(rows_jac, rows);
    out.lower = -balance_residual(net, state, loads);
    out.upper = out.lower;
    out.source.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) out.source[r] = r;
    return out;
}

AssembledQp assemble_qp(const Network& net, const std::vector<Scenario>& scenarios,
                        const std::vector<SystemState>& states, const std::vector<double>& weights,
                        const PlanConfig& cfg) {
    cfg.validate();
    if (scenarios.empty()) throw std::invalid_argument("assemble_qp: no scenarios");
    if (states.size() != scenarios.size() || weights.size() != scenarios.size())
        throw std::invalid_argument("assemble_qp: scenarios, states and weights differ in length");
    for (std::size_t a = 0; a < scenarios.size(); ++a) {
        const SystemState& st = states[a];
        if (st.v.size() != static_cast<Eigen::Index>(net.n_bus()) || st.p_gen.size() != static_cast<Eigen::Index>(net.n_gen()) ||
            st.dx.size() != static_cast<Eigen::Index>(net.n_branch()))
            throw std::invalid_argument("assemble_qp: state dimensions do not match the network");
        if (balance_residual(net, st, scenarios[a].loads()).cwiseAbs().maxCoeff() > kPfFeasTol)
            throw std::invalid_argument("assemble_qp: state " + std::to_string(a) + " is not a power-flow solution");
    }

    const std::size_t nb = net.n_bus(), ng = net.n_gen(), nl = net.n_branch();
    const std::size_t ns = scenarios.size();
    const double base = net.base_mva();

    AssembledQp out;
    QpLayout& lay = out.layout;
    lay.sc_branches = cfg.sc_candidates(net);
    lay.svc_buses = cfg.svc_candidates(net);
    const auto nsc = static_cast<Eigen::Index>(lay.sc_branches.size());
    const auto nsvc = static_cast<Eigen::Index>(lay.svc_buses.size());
    std::vector<long> sc_slot(nl, -1), svc_slot(nb, -1);
    for (std::size_t s = 0; s < lay.sc_branches.size(); ++s) sc_slot[lay.sc_branches[s]] = static_cast<long>(s);
    for (std::size_t s = 0; s < lay.svc_buses.size(); ++s) svc_slot[lay.svc_buses[s]] = static_cast<long>(s);

    Eigen::Index col = 0;
    lay.scenario.resize(ns);
    for (auto& b : lay.scenario) {
        b.v = col;
        b.theta = b.v + static_cast<Eigen::Index>(nb);
        b.p_gen = b.theta + static_cast<Eigen::Index>(nb);
        b.q_gen = b.p_gen + static_cast<Eigen::Index>(ng);
        b.dx = b.q_gen + static_cast<Eigen::Index>(ng);
        b.dq = b.dx + nsc;
        col = b.dq + nsvc;
    }
    lay.cap_sc = col;
    lay.cap_svc = col + nsc;
    lay.n = lay.cap_svc + nsvc;
    const Eigen::Index n = lay.n;

    // Per-scenario linearization, computed in parallel into fixed slots.
    std::vector<LinearRows> bal(ns), lines(ns);
    parallel_for(ns, cfg.threads, [&](std::size_t a) {
        const SparseMatrix jac = jacobian(net, states[a]);
        bal[a] = linearize_balances(net, states[a], scenarios[a].loads(), jac);
        if (cfg.include_line_limits) lines[a] = linearize_line_limits(net, apparent_sq(net, states[a]), jac);
    });

    const StateLayout sl(net);
    auto map_col = [&](std::size_t a, Eigen::Index c) -> Eigen::Index {
        const auto& b = lay.scenario[a];
        const auto u = static_cast<std::size_t>(c);
        if (u < sl.theta(0)) return b.v + c;
        if (u < sl.dx(0)) return b.theta + static_cast<Eigen::Index>(u - sl.theta(0));
        if (u < sl.dq(0)) {
            const long s = sc_slot[u - sl.dx(0)];
            return s < 0 ? -1 : b.dx + s;
        }
        if (u < sl.p_gen(0)) {
            const long s = svc_slot[u - sl.dq(0)];
            return s < 0 ? -1 : b.dq + s;
        }
        if (u < sl.q_gen(0)) return b.p_gen + static_cast<Eigen::Index>(u - sl.p_gen(0));
        return b.q_gen + static_cast<Eigen::Index>(u - sl.q_gen(0));
    };

    QpProblem& qp = out.qp;
    std::vector<Triplet> eq_trip, in_trip, h_trip;
    std::vector<double> eq_rhs, in_lo, in_hi;
    auto append = [&](std::size_t a, const LinearRows& rows, std::vector<Triplet>& trip, std::vector<double>& lo,
                      std::vector<double>* hi) {
        const auto r0 = static_cast<int>(lo.size());
        for (int j = 0; j < rows.a.outerSize(); ++j) {
            const Eigen::Index c = map_col(a, j);
            if (c < 0) continue;
            for (SparseMatrix::InnerIterator it(rows.a, j); it; ++it)
                trip.emplace_back(r0 + static_cast<int>(it.row()), static_cast<int>(c), it.value());
        }
        for (Eigen::Index r = 0; r < rows.lower.size(); ++r) {
            lo.push_back(rows.lower[r]);
            if (hi) hi->push_back(rows.upper[r]);
        }
    };

    qp.linear_cost = Eigen::VectorXd::Zero(n);
    qp.var_lower = Eigen::VectorXd::Constant(n, -kInf);
    qp.var_upper = Eigen::VectorXd::Constant(n, kInf);
    qp.var_map.resize(static_cast<std::size_t>(n));

    for (std::size_t a = 0; a < ns; ++a) {
        append(a, bal[a], eq_trip, eq_rhs, nullptr);
        if (cfg.include_line_limits) append(a, lines[a], in_trip, in_lo, &in_hi);
        out.line_rows_per_scenario.push_back(cfg.include_line_limits ? lines[a].source.size() : 0);

        const SystemState& st = states[a];
        const auto& b = lay.scenario[a];
        const int tag = static_cast<int>(a);

        for (std::size_t i = 0; i < nb; ++i) {
            const Bus& bus = net.bus(i);
            const auto cv = b.v + static_cast<Eigen::Index>(i), ct = b.theta + static_cast<Eigen::Index>(i);
            auto [lo, hi] = trust_box(bus.v_min - st.v[i], bus.v_max - st.v[i], cfg.trust_v);
            if (cfg.freeze_dispatch && !net.gens_at(i).empty()) lo = hi = 0.0;
            qp.var_lower[cv] = lo;
            qp.var_upper[cv] = hi;
            const bool slack = i == net.slack();
            qp.var_lower[ct] = slack ? 0.0 : -cfg.trust_theta;
            qp.var_upper[ct] = slack ? 0.0 : cfg.trust_theta;
            qp.var_map[static_cast<std::size_t>(cv)] = {tag, Quantity::v, i};
            qp.var_map[static_cast<std::size_t>(ct)] = {tag, Quantity::theta, i};
        }

        const double w = cfg.n_years * weights[a];
        for (std::size_t g = 0; g < ng; ++g) {
            const Generator& gen = net.gen(g);
            const auto cp = b.p_gen + static_cast<Eigen::Index>(g), cq = b.q_gen + static_cast<Eigen::Index>(g);
            double plo = gen.p_min - st.p_gen[g], phi = gen.p_max - st.p_gen[g];
            if (plo > phi) std::swap(plo, phi);
            if (cfg.freeze_dispatch && net.gen_bus(g) != net.slack()) plo = phi = 0.0;
            qp.var_lower[cp] = plo;
            qp.var_upper[cp] = phi;
            const auto [qlo, qhi] = trust_box(gen.q_min - st.q_gen[g], gen.q_max - st.q_gen[g], cfg.eps_q);
            qp.var_lower[cq] = qlo;
            qp.var_upper[cq] = qhi;
            qp.var_map[static_cast<std::size_t>(cp)] = {tag, Quantity::p_gen, g};
            qp.var_map[static_cast<std::size_t>(cq)] = {tag, Quantity::q_gen, g};

            // Exact second-order expansion of the polynomial cost in pu output.
            const CostPoly& c = gen.cost;
            const double h = 2.0 * c.c2 * base * base;
            if (w > 0.0 && h > 0.0) h_trip.emplace_back(static_cast<int>(cp), static_cast<int>(cp), w * h);
            qp.linear_cost[cp] += w * (h * st.p_gen[g] + c.c1 * base);
            qp.objective_constant += w * net.gen_cost(g, st.p_gen[g]);
        }

        for (Eigen::Index s = 0; s < nsc; ++s) {
            const std::size_t k = lay.sc_branches[static_cast<std::size_t>(s)];
            const double x0 = std::abs(net.branch(k).x0);
            const auto c = b.dx + s;
            const double dx = st.dx[static_cast<Eigen::Index>(k)];
            const auto [lo, hi] = trust_box(-cfg.sc_max * x0 - dx, cfg.sc_max * x0 - dx, cfg.trust_dx * x0);
            qp.var_lower[c] = lo;
            qp.var_upper[c] = hi;
            qp.var_map[static_cast<std::size_t>(c)] = {tag, Quantity::dx, k};
            // |dx + d| <= cap, written as two rows.
            const auto r = static_cast<int>(in_lo.size());
            in_trip.emplace_back(r, static_cast<int>(c), 1.0);
            in_trip.emplace_back(r, static_cast<int>(lay.cap_sc + s), -1.0);
            in_lo.push_back(-kInf);
            in_hi.push_back(-dx);
            in_trip.emplace_back(r + 1, static_cast<int>(c), 1.0);
            in_trip.emplace_back(r + 1, static_cast<int>(lay.cap_sc + s), 1.0);
            in_lo.push_back(-dx);
            in_hi.push_back(kInf);
        }
        for (Eigen::Index s = 0; s < nsvc; ++s) {
            const std::size_t i = lay.svc_buses[static_cast<std::size_t>(s)];
            const auto c = b.dq + s;
            const double dq = st.dq[static_cast<Eigen::Index>(i)];
            qp.var_map[static_cast<std::size_t>(c)] = {tag, Quantity::dq, i};
            const auto r = static_cast<int>(in_lo.size());
            in_trip.emplace_back(r, static_cast<int>(c), 1.0);
            in_trip.emplace_back(r, static_cast<int>(lay.cap_svc + s), -1.0);
            in_lo.push_back(-kInf);
            in_hi.push_back(-dq);
            in_trip.emplace_back(r + 1, static_cast<int>(c), 1.0);
            in_trip.emplace_back(r + 1, static_cast<int>(lay.cap_svc + s), 1.0);
            in_lo.push_back(-dq);
            in_hi.push_back(kInf);
        }
    }

    const Eigen::VectorXd sc_cost = sc_unit_cost(net, cfg.c_sc);
    const double svc_cost = svc_unit_cost(net, cfg.c_svc);
    for (Eigen::Index s = 0; s < nsc; ++s) {
        const std::size_t k = lay.sc_branches[static_cast<std::size_t>(s)];
        const auto c = lay.cap_sc + s;
        qp.linear_cost[c] = sc_cost[static_cast<Eigen::Index>(k)];
        qp.var_lower[c] = 0.0;
        qp.var_upper[c] = cfg.sc_max * std::abs(net.branch(k).x0);
        qp.var_map[static_cast<std::size_t>(c)] = {-1, Quantity::sc_capacity, k};
    }
    for (Eigen::Index s = 0; s < nsvc; ++s) {
        const auto c = lay.cap_svc + s;
        qp.linear_cost[c] = svc_cost;
        qp.var_lower[c] = 0.0;
        qp.var_map[static_cast<std::size_t>(c)] = {-1, Quantity::svc_capacity,
                                                   lay.svc_buses[static_cast<std::size_t>(s)]};
    }

    qp.hessian.resize(n, n);
    qp.hessian.setFromTriplets(h_trip.begin(), h_trip.end());
    qp.eq_matrix.resize(static_cast<Eigen::Index>(eq_rhs.size()), n);
    qp.eq_matrix.setFromTriplets(eq_trip.begin(), eq_trip.end());
    qp.eq_rhs = Eigen::Map<const Eigen::VectorXd>(eq_rhs.data(), static_cast<Eigen::Index>(eq_rhs.size()));
    qp.ineq_matrix.resize(static_cast<Eigen::Index>(in_lo.size()), n);
    qp.ineq_matrix.setFromTriplets(in_trip.begin(), in_trip.end());
    qp.ineq_lower = Eigen::Map<const Eigen::VectorXd>(in_lo.data(), static_cast<Eigen::Index>(in_lo.size()));
    qp.ineq_upper = Eigen::Map<const Eigen::VectorXd>(in_hi.data(), static_cast<Eigen::Index>(in_hi.size()));
    return out;
}

Capacities apply_step(const Network& net, const AssembledQp& a, const Eigen::VectorXd& x,
                      std::vector<SystemState>& states) {
    const QpLayout& lay = a.layout;
    if (x.size() != lay.n || states.size() != lay.scenario.size())
        throw std::invalid_argument("apply_step: dimensions do not match the assembled QP");
    const auto nb = static_cast<Eigen::Index>(net.n_bus()), ng = static_cast<Eigen::Index>(net.n_gen());
    for (std::size_t s = 0; s < states.size(); ++s) {
        const auto& b = lay.scenario[s];
        SystemState& st = states[s];
        st.v += x.segment(b.v, nb);
        st.theta += x.segment(b.theta, nb);
        st.p_gen += x.segment(b.p_gen, ng);
        st.q_gen += x.segment(b.q_gen, ng);
        for (std::size_t k = 0; k < lay.sc_branches.size(); ++k)
            st.dx[static_cast<Eigen::Index>(lay.sc_branches[k])] += x[b.dx + static_cast<Eigen::Index>(k)];
        for (std::size_t i = 0; i < lay.svc_buses.size(); ++i)
            st.dq[static_cast<Eigen::Index>(lay.svc_buses[i])] += x[b.dq + static_cast<Eigen::Index>(i)];
    }
    Capacities cap = Capacities::zero(net);
    for (std::size_t k = 0; k < lay.sc_branches.size(); ++k)
        cap.sc[static_cast<Eigen::Index>(lay.sc_branches[k])] = std::max(0.0, x[lay.cap_sc + static_cast<Eigen::Index>(k)]);
    for (std::size_t i = 0; i < lay.svc_buses.size(); ++i)
        cap.svc[static_cast<Eigen::Index>(lay.svc_buses[i])] = std::max(0.0, x[lay.cap_svc + static_cast<Eigen::Index>(i)]);
    return cap;
}

}  // namespace facts
