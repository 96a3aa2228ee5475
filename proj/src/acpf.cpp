#include "facts/acpf.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <Eigen/SparseLU>

namespace facts {

namespace {

constexpr Complex kJ{0.0, 1.0};

struct Admittance {
    Complex ys;    // series admittance 1/(r + jx)
    Complex yff, yft, ytf, ytt;
    Complex dyff, dyft, dytf, dytt;  // d/dx
};

Admittance admittance(const Branch& br, double x) {
    if (br.r == 0.0 && x == 0.0) throw std::domain_error("degenerate branch: r = x = 0");
    Admittance a;
    a.ys = 1.0 / Complex(br.r, x);
    const Complex tap = std::polar(br.tau, br.theta_shift);
    const Complex shunt = kJ * (br.b / 2.0);
    const double tau2 = br.tau * br.tau;
    a.yff = (a.ys + shunt) / tau2;
    a.yft = -a.ys / std::conj(tap);
    a.ytf = -a.ys / tap;
    a.ytt = a.ys + shunt;
    const Complex dys = -kJ * a.ys * a.ys;
    a.dyff = dys / tau2;
    a.dyft = -dys / std::conj(tap);
    a.dytf = -dys / tap;
    a.dytt = dys;
    return a;
}

// Flows at both ends and their partials w.r.t. (v_f, theta_f, v_t, theta_t, x).
struct EndDerivs {
    Complex s;
    Complex d_vf, d_thf, d_vt, d_tht, d_x;
};

struct BranchEval {
    EndDerivs from, to;
};

BranchEval eval_branch(const Branch& br, double vf, double thf, double vt, double tht, double x) {
    const Admittance a = admittance(br, x);
    const Complex e_ft = std::polar(1.0, thf - tht);
    const Complex e_tf = std::conj(e_ft);
    const double vv = vf * vt;
    BranchEval out;

    EndDerivs& f = out.from;
    const Complex cross_f = std::conj(a.yft) * e_ft;
    f.s = vf * vf * std::conj(a.yff) + cross_f * vv;
    f.d_vf = 2.0 * vf * std::conj(a.yff) + cross_f * vt;
    f.d_vt = cross_f * vf;
    f.d_thf = kJ * cross_f * vv;
    f.d_tht = -f.d_thf;
    f.d_x = vf * vf * std::conj(a.dyff) + std::conj(a.dyft) * e_ft * vv;

    EndDerivs& t = out.to;
    const Complex cross_t = std::conj(a.ytf) * e_tf;
    t.s = vt * vt * std::conj(a.ytt) + cross_t * vv;
    t.d_vt = 2.0 * vt * std::conj(a.ytt) + cross_t * vf;
    t.d_vf = cross_t * vt;
    t.d_tht = kJ * cross_t * vv;
    t.d_thf = -t.d_tht;
    t.d_x = vt * vt * std::conj(a.dytt) + std::conj(a.dytf) * e_tf * vv;
    return out;
}

double effective_x(const Network& net, const SystemState& s, std::size_t k) {
    return net.branch(k).x0 + s.dx[k];
}

void check_sizes(const Network& net, const SystemState& s) {
    const auto nb = static_cast<Eigen::Index>(net.n_bus());
    const auto nl = static_cast<Eigen::Index>(net.n_branch());
    const auto ng = static_cast<Eigen::Index>(net.n_gen());
    if (s.v.size() != nb || s.theta.size() != nb || s.dq.size() != nb || s.dx.size() != nl ||
        s.p_gen.size() != ng || s.q_gen.size() != ng)
        throw std::invalid_argument("SystemState dimensions do not match the network");
}

// Splits `total` across the generators of a bus in proportion to their
// capability range; equal split when every range is zero.
void distribute(std::span<const std::size_t> gens, double total, Eigen::VectorXd& out,
                const std::vector<double>& lo, const std::vector<double>& hi) {
    double range = 0.0;
    double base = 0.0;
    for (auto g : gens) {
        range += std::max(0.0, hi[g] - lo[g]);
        base += lo[g];
    }
    if (range > 0.0 && std::isfinite(range)) {
        for (auto g : gens) out[g] = lo[g] + (total - base) * std::max(0.0, hi[g] - lo[g]) / range;
    } else {
        for (auto g : gens) out[g] = total / static_cast<double>(gens.size());
    }
}

}  // namespace

SystemState SystemState::from_case(const Network& net) {
    SystemState s = flat(net);
    for (std::size_t i = 0; i < net.n_bus(); ++i) {
        s.v[i] = net.bus(i).v_init;
        s.theta[i] = net.bus(i).theta_init;
    }
    for (std::size_t g = 0; g < net.n_gen(); ++g) {
        s.p_gen[g] = net.gen(g).p_init;
        s.q_gen[g] = net.gen(g).q_init;
    }
    for (std::size_t i = 0; i < net.n_bus(); ++i) {
        if (net.role(i) != BusKind::pq && !net.gens_at(i).empty()) s.v[i] = net.gen(net.gens_at(i).front()).v_setpoint;
    }
    return s;
}

SystemState SystemState::flat(const Network& net) {
    SystemState s;
    const auto nb = static_cast<Eigen::Index>(net.n_bus());
    s.v = Eigen::VectorXd::Ones(nb);
    s.theta = Eigen::VectorXd::Zero(nb);
    s.p_gen = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.n_gen()));
    s.q_gen = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.n_gen()));
    s.dx = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.n_branch()));
    s.dq = Eigen::VectorXd::Zero(nb);
    return s;
}

Loads Loads::from_network(const Network& net) {
    Loads l;
    l.p.resize(static_cast<Eigen::Index>(net.n_bus()));
    l.q.resize(static_cast<Eigen::Index>(net.n_bus()));
    for (std::size_t i = 0; i < net.n_bus(); ++i) {
        l.p[i] = net.bus(i).p_load;
        l.q[i] = net.bus(i).q_load;
    }
    return l;
}

Complex flow_from(const Branch& br, double v_f, double theta_f, double v_t, double theta_t, double x) {
    const Admittance a = admittance(br, x);
    const Complex vf = std::polar(v_f, theta_f);
    const Complex vt = std::polar(v_t, theta_t);
    return vf * std::conj(a.yff * vf + a.yft * vt);
}

Complex flow_to(const Branch& br, double v_f, double theta_f, double v_t, double theta_t, double x) {
    const Admittance a = admittance(br, x);
    const Complex vf = std::polar(v_f, theta_f);
    const Complex vt = std::polar(v_t, theta_t);
    return vt * std::conj(a.ytf * vf + a.ytt * vt);
}

BranchFlows branch_flows(const Network& net, const SystemState& s) {
    check_sizes(net, s);
    BranchFlows out;
    out.s_from.resize(net.n_branch());
    out.s_to.resize(net.n_branch());
    for (std::size_t k = 0; k < net.n_branch(); ++k) {
        const auto f = net.branch_from(k), t = net.branch_to(k);
        const double x = effective_x(net, s, k);
        out.s_from[k] = flow_from(net.branch(k), s.v[f], s.theta[f], s.v[t], s.theta[t], x);
        out.s_to[k] = flow_to(net.branch(k), s.v[f], s.theta[f], s.v[t], s.theta[t], x);
    }
    return out;
}

Injections injections(const Network& net, const SystemState& s) {
    const BranchFlows flows = branch_flows(net, s);
    Injections inj;
    inj.ap = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.n_bus()));
    inj.rp = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.n_bus()));
    for (std::size_t k = 0; k < net.n_branch(); ++k) {
        const auto f = net.branch_from(k), t = net.branch_to(k);
        inj.ap[f] += flows.s_from[k].real();
        inj.rp[f] += flows.s_from[k].imag();
        inj.ap[t] += flows.s_to[k].real();
        inj.rp[t] += flows.s_to[k].imag();
    }
    for (std::size_t i = 0; i < net.n_bus(); ++i) {
        const double v2 = s.v[i] * s.v[i];
        inj.ap[i] += net.bus(i).g_shunt * v2;
        inj.rp[i] -= net.bus(i).b_shunt * v2;
    }
    return inj;
}

Eigen::VectorXd balance_residual(const Network& net, const SystemState& s, const Loads& loads) {
    const Injections inj = injections(net, s);
    const auto nb = static_cast<Eigen::Index>(net.n_bus());
    Eigen::VectorXd r(2 * nb);
    r.head(nb) = -loads.p - inj.ap;
    r.tail(nb) = -loads.q - inj.rp - s.dq;
    for (std::size_t g = 0; g < net.n_gen(); ++g) {
        const auto i = static_cast<Eigen::Index>(net.gen_bus(g));
        r[i] += s.p_gen[g];
        r[nb + i] += s.q_gen[g];
    }
    return r;
}

Eigen::VectorXd apparent_sq(const Network& net, const SystemState& s) {
    const BranchFlows flows = branch_flows(net, s);
    const auto nl = net.n_branch();
    Eigen::VectorXd out(static_cast<Eigen::Index>(2 * nl));
    for (std::size_t k = 0; k < nl; ++k) {
        out[k] = std::norm(flows.s_from[k]);
        out[nl + k] = std::norm(flows.s_to[k]);
    }
    return out;
}

Eigen::VectorXd StateLayout::pack(const SystemState& s) const {
    Eigen::VectorXd z(static_cast<Eigen::Index>(size()));
    z.segment(v(0), nb) = s.v;
    z.segment(theta(0), nb) = s.theta;
    z.segment(dx(0), nl) = s.dx;
    z.segment(dq(0), nb) = s.dq;
    z.segment(p_gen(0), ng) = s.p_gen;
    z.segment(q_gen(0), ng) = s.q_gen;
    return z;
}

SystemState StateLayout::unpack(const Eigen::VectorXd& z) const {
    SystemState s;
    s.v = z.segment(v(0), nb);
    s.theta = z.segment(theta(0), nb);
    s.dx = z.segment(dx(0), nl);
    s.dq = z.segment(dq(0), nb);
    s.p_gen = z.segment(p_gen(0), ng);
    s.q_gen = z.segment(q_gen(0), ng);
    return s;
}

SparseMatrix jacobian(const Network& net, const SystemState& s) {
    check_sizes(net, s);
    const StateLayout L(net);
    const std::size_t nb = L.nb, nl = L.nl;
    using T = Eigen::Triplet<double>;
    std::vector<T> trip;
    trip.reserve(nl * 40 + nb * 6 + L.ng * 2);

    auto push = [&](std::size_t row, std::size_t col, double val) {
        trip.emplace_back(static_cast<int>(row), static_cast<int>(col), val);
    };

    for (std::size_t k = 0; k < nl; ++k) {
        const auto f = net.branch_from(k), t = net.branch_to(k);
        const BranchEval e = eval_branch(net.branch(k), s.v[f], s.theta[f], s.v[t], s.theta[t], effective_x(net, s, k));
        // Residual rows carry -AP, -RP.
        const std::pair<std::size_t, const EndDerivs*> ends[2] = {{f, &e.from}, {t, &e.to}};
        for (const auto& [bus, d] : ends) {
            const Complex partial[5] = {d->d_vf, d->d_thf, d->d_vt, d->d_tht, d->d_x};
            const std::size_t cols[5] = {L.v(f), L.theta(f), L.v(t), L.theta(t), L.dx(k)};
            for (int c = 0; c < 5; ++c) {
                push(bus, cols[c], -partial[c].real());
                push(nb + bus, cols[c], -partial[c].imag());
            }
        }
        // |S|^2 rows: d|S|^2 = 2 Re(conj(S) dS)
        const std::pair<std::size_t, const EndDerivs*> flow_rows[2] = {{2 * nb + k, &e.from},
                                                                        {2 * nb + nl + k, &e.to}};
        for (const auto& [row, d] : flow_rows) {
            const Complex sc = std::conj(d->s);
            const Complex partial[5] = {d->d_vf, d->d_thf, d->d_vt, d->d_tht, d->d_x};
            const std::size_t cols[5] = {L.v(f), L.theta(f), L.v(t), L.theta(t), L.dx(k)};
            for (int c = 0; c < 5; ++c) push(row, cols[c], 2.0 * (sc * partial[c]).real());
        }
    }
    for (std::size_t i = 0; i < nb; ++i) {
        push(i, L.v(i), -2.0 * net.bus(i).g_shunt * s.v[i]);
        push(nb + i, L.v(i), 2.0 * net.bus(i).b_shunt * s.v[i]);
        push(nb + i, L.dq(i), -1.0);
    }
    for (std::size_t g = 0; g < L.ng; ++g) {
        push(net.gen_bus(g), L.p_gen(g), 1.0);
        push(nb + net.gen_bus(g), L.q_gen(g), 1.0);
    }
    SparseMatrix J(static_cast<Eigen::Index>(2 * nb + 2 * nl), static_cast<Eigen::Index>(L.size()));
    J.setFromTriplets(trip.begin(), trip.end());
    return J;
}

PfRoles PfRoles::from_network(const Network& net) {
    PfRoles r;
    r.role.resize(net.n_bus());
    for (std::size_t i = 0; i < net.n_bus(); ++i) r.role[i] = net.role(i);
    return r;
}

namespace {

struct Reduced {
    std::vector<std::size_t> p_rows;  // buses with a P residual (non-slack)
    std::vector<std::size_t> q_rows;  // buses with a Q residual (PQ)
    std::vector<long> theta_col;      // bus -> unknown index or -1
    std::vector<long> v_col;

    Reduced(const Network& net, const PfRoles& roles) {
        const std::size_t nb = net.n_bus();
        theta_col.assign(nb, -1);
        v_col.assign(nb, -1);
        for (std::size_t i = 0; i < nb; ++i)
            if (roles.role[i] != BusKind::slack) {
                theta_col[i] = static_cast<long>(p_rows.size());
                p_rows.push_back(i);
            }
        for (std::size_t i = 0; i < nb; ++i)
            if (roles.role[i] == BusKind::pq) {
                v_col[i] = static_cast<long>(p_rows.size() + q_rows.size());
                q_rows.push_back(i);
            }
    }

    std::size_t size() const { return p_rows.size() + q_rows.size(); }
};

Eigen::VectorXd reduced_residual(const Network& net, const SystemState& s, const Loads& loads, const Reduced& red) {
    const Eigen::VectorXd full = balance_residual(net, s, loads);
    const auto nb = static_cast<Eigen::Index>(net.n_bus());
    Eigen::VectorXd r(static_cast<Eigen::Index>(red.size()));
    Eigen::Index n = 0;
    for (auto i : red.p_rows) r[n++] = full[static_cast<Eigen::Index>(i)];
    for (auto i : red.q_rows) r[n++] = full[nb + static_cast<Eigen::Index>(i)];
    return r;
}

SparseMatrix reduced_jacobian(const Network& net, const SystemState& s, const Reduced& red) {
    const std::size_t nb = net.n_bus();
    std::vector<long> row_of_p(nb, -1), row_of_q(nb, -1);
    for (std::size_t r = 0; r < red.p_rows.size(); ++r) row_of_p[red.p_rows[r]] = static_cast<long>(r);
    for (std::size_t r = 0; r < red.q_rows.size(); ++r)
        row_of_q[red.q_rows[r]] = static_cast<long>(red.p_rows.size() + r);

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(net.n_branch() * 16 + nb * 2);
    auto push = [&](long row, long col, double val) {
        if (row >= 0 && col >= 0) trip.emplace_back(static_cast<int>(row), static_cast<int>(col), val);
    };
    for (std::size_t k = 0; k < net.n_branch(); ++k) {
        const auto f = net.branch_from(k), t = net.branch_to(k);
        const BranchEval e = eval_branch(net.branch(k), s.v[f], s.theta[f], s.v[t], s.theta[t], effective_x(net, s, k));
        const std::pair<std::size_t, const EndDerivs*> ends[2] = {{f, &e.from}, {t, &e.to}};
        for (const auto& [bus, d] : ends) {
            const Complex partial[4] = {d->d_vf, d->d_thf, d->d_vt, d->d_tht};
            const long cols[4] = {red.v_col[f], red.theta_col[f], red.v_col[t], red.theta_col[t]};
            for (int c = 0; c < 4; ++c) {
                push(row_of_p[bus], cols[c], -partial[c].real());
                push(row_of_q[bus], cols[c], -partial[c].imag());
            }
        }
    }
    for (std::size_t i = 0; i < nb; ++i) {
        push(row_of_p[i], red.v_col[i], -2.0 * net.bus(i).g_shunt * s.v[i]);
        push(row_of_q[i], red.v_col[i], 2.0 * net.bus(i).b_shunt * s.v[i]);
    }
    const auto n = static_cast<Eigen::Index>(red.size());
    SparseMatrix J(n, n);
    J.setFromTriplets(trip.begin(), trip.end());
    return J;
}

struct NewtonOutcome {
    bool converged = false;
    int iterations = 0;
    double max_mismatch = 0.0;
    std::string diagnostic;
};

NewtonOutcome newton(const Network& net, SystemState& s, const Loads& loads, const PfRoles& roles,
                     const PfOptions& opts, int iter_offset) {
    const Reduced red(net, roles);
    NewtonOutcome out;
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    for (int it = 0;; ++it) {
        const Eigen::VectorXd r = reduced_residual(net, s, loads, red);
        out.max_mismatch = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
        if (opts.trace)
            *opts.trace << "{\"iteration\":" << iter_offset + it << ",\"max_mismatch\":" << out.max_mismatch << "}\n";
        if (!std::isfinite(out.max_mismatch)) {
            out.diagnostic = "non-finite mismatch";
            return out;
        }
        if (out.max_mismatch < opts.tol) {
            out.converged = true;
            return out;
        }
        if (it >= opts.max_iter) {
            out.diagnostic = "no convergence after " + std::to_string(opts.max_iter) + " iterations (max mismatch " +
                             std::to_string(out.max_mismatch) + ")";
            return out;
        }
        const SparseMatrix J = reduced_jacobian(net, s, red);
        lu.compute(J);
        if (lu.info() != Eigen::Success) {
            out.diagnostic = "singular Jacobian";
            return out;
        }
        // J is the derivative of the residual, so the Newton step solves J d = -r.
        const Eigen::VectorXd d = lu.solve(-r);
        if (lu.info() != Eigen::Success || !d.allFinite()) {
            out.diagnostic = "singular Jacobian";
            return out;
        }
        for (std::size_t i = 0; i < net.n_bus(); ++i) {
            if (red.theta_col[i] >= 0) s.theta[i] += d[red.theta_col[i]];
            if (red.v_col[i] >= 0) s.v[i] += d[red.v_col[i]];
        }
        ++out.iterations;
        if ((s.v.array() <= 0.0).any()) {
            out.diagnostic = "voltage collapse";
            return out;
        }
    }
}

// Recomputes slack P_G and slack/PV Q_G from solved injections.
void settle_generators(const Network& net, SystemState& s, const Loads& loads, const PfRoles& roles) {
    const Injections inj = injections(net, s);
    std::vector<double> pmin(net.n_gen()), pmax(net.n_gen()), qmin(net.n_gen()), qmax(net.n_gen());
    for (std::size_t g = 0; g < net.n_gen(); ++g) {
        pmin[g] = net.gen(g).p_min;
        pmax[g] = net.gen(g).p_max;
        qmin[g] = net.gen(g).q_min;
        qmax[g] = net.gen(g).q_max;
    }
    for (std::size_t i = 0; i < net.n_bus(); ++i) {
        const auto gens = net.gens_at(i);
        if (gens.empty()) continue;
        if (roles.role[i] == BusKind::slack) {
            distribute(gens, loads.p[i] + inj.ap[i], s.p_gen, pmin, pmax);
        }
        if (roles.role[i] == BusKind::slack || roles.role[i] == BusKind::pv) {
            distribute(gens, loads.q[i] + inj.rp[i] + s.dq[i], s.q_gen, qmin, qmax);
        }
    }
}

}  // namespace

Eigen::VectorXd mismatch(const Network& net, const SystemState& state, const Loads& loads, const PfRoles& roles) {
    return reduced_residual(net, state, loads, Reduced(net, roles));
}

PfResult solve_pf(const Network& net, const SystemState& state0, const Loads& loads, const PfRoles& roles0,
                  const PfOptions& opts) {
    check_sizes(net, state0);
    PfResult res;
    res.roles = roles0;
    for (std::size_t i = 0; i < net.n_bus(); ++i)
        if (res.roles.role[i] != BusKind::pq && net.gens_at(i).empty()) res.roles.role[i] = BusKind::pq;

    SystemState s = state0;
    NewtonOutcome nt = newton(net, s, loads, res.roles, opts, 0);
    int total_iter = nt.iterations;
    if (!nt.converged && opts.flat_start_fallback) {
        SystemState flat = state0;
        for (std::size_t i = 0; i < net.n_bus(); ++i) {
            if (res.roles.role[i] == BusKind::pq) flat.v[i] = 1.0;
            if (res.roles.role[i] != BusKind::slack) flat.theta[i] = state0.theta[net.slack()];
        }
        SystemState retry = flat;
        NewtonOutcome nt2 = newton(net, retry, loads, res.roles, opts, total_iter);
        total_iter += nt2.iterations;
        if (nt2.converged) {
            s = retry;
            nt = nt2;
        }
    }

    std::vector<char> switched(net.n_bus(), 0);
    while (nt.converged) {
        settle_generators(net, s, loads, res.roles);
        if (!opts.enforce_q_limits) break;
        bool changed = false;
        for (std::size_t i = 0; i < net.n_bus(); ++i) {
            if (res.roles.role[i] != BusKind::pv || switched[i]) continue;
            double qsum = 0.0, qlo = 0.0, qhi = 0.0;
            for (auto g : net.gens_at(i)) {
                qsum += s.q_gen[g];
                qlo += net.gen(g).q_min;
                qhi += net.gen(g).q_max;
            }
            const double slack_tol = 1e-9;
            if (qsum > qhi + slack_tol || qsum < qlo - slack_tol) {
                const bool upper = qsum > qhi;
                for (auto g : net.gens_at(i)) s.q_gen[g] = upper ? net.gen(g).q_max : net.gen(g).q_min;
                res.roles.role[i] = BusKind::pq;
                switched[i] = 1;
                changed = true;
            }
        }
        if (!changed) break;
        nt = newton(net, s, loads, res.roles, opts, total_iter);
        total_iter += nt.iterations;
    }

    res.state = std::move(s);
    res.converged = nt.converged;
    res.iterations = total_iter;
    res.max_mismatch = nt.max_mismatch;
    res.diagnostic = nt.diagnostic;
    return res;
}

}  // namespace facts
