#include "facts/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <Eigen/SparseCholesky>

#include "qp_internal.hpp"

namespace facts {

namespace {

using namespace qp_detail;

struct Polished {
    Vec x, z, y;
    bool ok = false;
};

// Solves the equality-constrained KKT system on the given active rows
// (regularized, with iterative refinement).
Polished solve_active(const Stacked& s, const std::vector<Eigen::Index>& rows, const std::vector<double>& rhs_b,
                      int refine_iter) {
    const Eigen::Index n = s.P.cols();
    const auto mr = static_cast<Eigen::Index>(rows.size());
    std::vector<Eigen::Index> red_of_row(static_cast<std::size_t>(s.A.rows()), -1);
    for (Eigen::Index r = 0; r < mr; ++r) red_of_row[static_cast<std::size_t>(rows[static_cast<std::size_t>(r)])] = r;

    const double delta = 1e-7;
    std::vector<Triplet> base, reg;
    for (int j = 0; j < s.P.outerSize(); ++j)
        for (SpMat::InnerIterator it(s.P, j); it; ++it)
            if (it.row() >= it.col()) base.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int j = 0; j < s.A.outerSize(); ++j)
        for (SpMat::InnerIterator it(s.A, j); it; ++it) {
            const Eigen::Index r = red_of_row[static_cast<std::size_t>(it.row())];
            if (r >= 0) base.emplace_back(static_cast<int>(n + r), static_cast<int>(it.col()), it.value());
        }
    reg = base;
    for (Eigen::Index j = 0; j < n; ++j) reg.emplace_back(static_cast<int>(j), static_cast<int>(j), delta);
    for (Eigen::Index r = 0; r < mr; ++r) reg.emplace_back(static_cast<int>(n + r), static_cast<int>(n + r), -delta);

    SpMat K0(n + mr, n + mr), Kd(n + mr, n + mr);
    K0.setFromTriplets(base.begin(), base.end());
    Kd.setFromTriplets(reg.begin(), reg.end());
    const SpMat K0full = K0.selfadjointView<Eigen::Lower>();

    Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt(Kd);
    Polished out;
    if (ldlt.info() != Eigen::Success) return out;
    Vec rhs(n + mr);
    rhs.head(n) = -s.q;
    for (Eigen::Index r = 0; r < mr; ++r) rhs[n + r] = rhs_b[static_cast<std::size_t>(r)];
    Vec sol = ldlt.solve(rhs);
    for (int k = 0; k < refine_iter; ++k) sol += ldlt.solve(rhs - K0full * sol);
    if (!sol.allFinite()) return out;

    out.x = sol.head(n);
    out.y = Vec::Zero(s.A.rows());
    for (Eigen::Index r = 0; r < mr; ++r) out.y[rows[static_cast<std::size_t>(r)]] = sol[n + r];
    out.z = project(s.A * out.x, s.l, s.u);
    out.ok = true;
    return out;
}

// Guesses the active set from the ADMM iterate. Degenerate active sets can
// split multipliers with the wrong sign; such rows are released and the
// reduced system solved again.
Polished polish(const Stacked& s, const Vec& z, const Vec& y, int refine_iter) {
    std::vector<Eigen::Index> rows;
    std::vector<double> rhs_b;
    for (Eigen::Index i = 0; i < s.A.rows(); ++i) {
        if (std::isfinite(s.l[i]) && z[i] - s.l[i] < -y[i]) {
            rows.push_back(i);
            rhs_b.push_back(s.l[i]);
        } else if (std::isfinite(s.u[i]) && s.u[i] - z[i] < y[i]) {
            rows.push_back(i);
            rhs_b.push_back(s.u[i]);
        }
    }
    for (int round = 0; round < 10; ++round) {
        Polished out = solve_active(s, rows, rhs_b, refine_iter);
        if (!out.ok) return out;
        const double ytol = 1e-7 * std::max(1.0, inf_norm(out.y));
        std::vector<Eigen::Index> keep_rows;
        std::vector<double> keep_b;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const Eigen::Index i = rows[r];
            const double yi = out.y[i];
            const bool at_lower = rhs_b[r] == s.l[i];
            const bool wrong = s.l[i] != s.u[i] && ((at_lower && yi > ytol) || (!at_lower && yi < -ytol));
            if (wrong) continue;
            keep_rows.push_back(i);
            keep_b.push_back(rhs_b[r]);
        }
        if (keep_rows.size() == rows.size()) return out;
        rows = std::move(keep_rows);
        rhs_b = std::move(keep_b);
    }
    return {};
}

}  // namespace

std::string to_string(QpStatus s) {
    switch (s) {
        case QpStatus::optimal: return "optimal";
        case QpStatus::max_iter: return "max_iter";
        case QpStatus::primal_infeasible: return "primal_infeasible";
        case QpStatus::dual_infeasible: return "dual_infeasible";
    }
    return "unknown";
}

double QpProblem::objective(const Eigen::VectorXd& x) const {
    return 0.5 * x.dot(hessian * x) + linear_cost.dot(x) + objective_constant;
}

double QpProblem::max_violation(const Eigen::VectorXd& x) const {
    double v = 0.0;
    if (eq_matrix.rows()) v = std::max(v, inf_norm(eq_matrix * x - eq_rhs));
    if (ineq_matrix.rows()) {
        const Vec ax = ineq_matrix * x;
        v = std::max(v, (ineq_lower - ax).cwiseMax(0.0).maxCoeff());
        v = std::max(v, (ax - ineq_upper).cwiseMax(0.0).maxCoeff());
    }
    if (x.size()) {
        v = std::max(v, (var_lower - x).cwiseMax(0.0).maxCoeff());
        v = std::max(v, (x - var_upper).cwiseMax(0.0).maxCoeff());
    }
    return v;
}

void QpProblem::validate() const {
    const Eigen::Index n = n_vars();
    auto fail = [](const char* what) { throw std::invalid_argument(std::string("QpProblem: ") + what); };
    if (hessian.rows() != n || hessian.cols() != n) fail("hessian must be n x n");
    if (eq_matrix.cols() != n || eq_matrix.rows() != eq_rhs.size()) fail("equality block has wrong shape");
    if (ineq_matrix.cols() != n || ineq_matrix.rows() != ineq_lower.size() || ineq_lower.size() != ineq_upper.size())
        fail("inequality block has wrong shape");
    if (var_lower.size() != n || var_upper.size() != n) fail("variable bounds have wrong length");
    if (!var_map.empty() && static_cast<Eigen::Index>(var_map.size()) != n) fail("var_map has wrong length");
    for (Eigen::Index i = 0; i < ineq_lower.size(); ++i)
        if (ineq_lower[i] > ineq_upper[i]) fail("inequality lower bound exceeds upper bound");
    for (Eigen::Index j = 0; j < n; ++j)
        if (var_lower[j] > var_upper[j]) fail("variable lower bound exceeds upper bound");
}

QpProblem QpProblem::unconstrained(Eigen::Index n) {
    QpProblem p;
    p.hessian.resize(n, n);
    p.linear_cost = Vec::Zero(n);
    p.eq_matrix.resize(0, n);
    p.eq_rhs.resize(0);
    p.ineq_matrix.resize(0, n);
    p.ineq_lower.resize(0);
    p.ineq_upper.resize(0);
    p.var_lower = Vec::Constant(n, -kInf);
    p.var_upper = Vec::Constant(n, kInf);
    return p;
}

std::string to_string(QpMethod m) { return m == QpMethod::admm ? "admm" : "interior_point"; }

QpSolution solve(const QpProblem& problem, const QpSettings& st) {
    problem.validate();
    if (st.method == QpMethod::interior_point) {
        QpSolution ip = qp_detail::solve_interior(problem, st);
        if (ip.status == QpStatus::optimal) return ip;
    }
    return qp_detail::solve_admm(problem, st);
}

namespace qp_detail {

QpSolution solve_admm(const QpProblem& problem, const QpSettings& st) {
    const Stacked orig = stack(problem);
    Stacked s = orig;
    const Scaling sc = ruiz(s, st.scaling_iter);
    const Eigen::Index n = s.P.cols(), m = s.A.rows();

    Vec rho = rho_vector(s.l, s.u, st.rho);
    double rho_scalar = st.rho;
    KktSystem kkt(s.P, s.A, st.sigma, rho, shared_columns(problem));

    Vec x = Vec::Zero(n), z = Vec::Zero(m), y = Vec::Zero(m);
    if (st.warm_start && st.warm_start->size() == n) {
        x = st.warm_start->cwiseQuotient(sc.D);
        z = project(s.A * x, s.l, s.u);
    }

    QpSolution sol;
    sol.status = QpStatus::max_iter;
    Vec rhs(n + m), x_prev, y_prev;
    auto unscale = [&](const Vec& xs, const Vec& zs, const Vec& ys, Vec& xo, Vec& zo, Vec& yo) {
        xo = sc.D.cwiseProduct(xs);
        zo = zs.cwiseQuotient(sc.E);
        yo = sc.E.cwiseProduct(ys) / sc.c;
    };

    Vec xu, zu, yu;
    Residuals res;
    int it = 0;
    int dual_inf_hits = 0;
    Polished early;
    for (it = 1; it <= st.max_iter; ++it) {
        x_prev = x;
        y_prev = y;
        rhs.head(n) = st.sigma * x - s.q;
        rhs.tail(m) = z - y.cwiseQuotient(rho);
        const Vec sol_kkt = kkt.solve(rhs);
        const Vec xt = sol_kkt.head(n);
        const Vec zt = z + (sol_kkt.tail(m) - y).cwiseQuotient(rho);
        x = st.alpha * xt + (1.0 - st.alpha) * x;
        const Vec zr = st.alpha * zt + (1.0 - st.alpha) * z;
        z = project(zr + y.cwiseQuotient(rho), s.l, s.u);
        y += rho.cwiseProduct(zr - z);

        if (it % st.check_every != 0 && it != st.max_iter) continue;

        unscale(x, z, y, xu, zu, yu);
        res = residuals(orig, xu, zu, yu);
        if (res.prim <= st.tol_primal && res.dual <= st.tol_dual) {
            sol.status = QpStatus::optimal;
            break;
        }
        // Periodic polish attempts end long ADMM tails early.
        if (st.polish && it % (8 * st.check_every) == 0) {
            const Polished p = polish(s, z, y, st.polish_refine_iter);
            if (p.ok) {
                Vec px, pz, py;
                unscale(p.x, p.z, p.y, px, pz, py);
                const Residuals pr = residuals(orig, px, pz, py);
                if (pr.prim <= st.tol_primal && pr.dual <= st.tol_dual) {
                    early = Polished{px, pz, py, true};
                    res = pr;
                    sol.status = QpStatus::optimal;
                    break;
                }
            }
        }
        const Vec dy = sc.E.cwiseProduct(y - y_prev);
        if (primal_infeasible(orig, dy, st.eps_infeasible)) {
            sol.status = QpStatus::primal_infeasible;
            sol.y = dy / inf_norm(dy);
            break;
        }
        // A primal certificate takes precedence; a dual one must persist.
        dual_inf_hits = dual_infeasible(s, x - x_prev, st.eps_infeasible) ? dual_inf_hits + 1 : 0;
        if (dual_inf_hits >= 5) {
            sol.status = QpStatus::dual_infeasible;
            break;
        }
        if (st.adaptive_rho) {
            const Vec Ax = s.A * x;
            const double prim_s = inf_norm(Ax - z) / std::max({1e-12, inf_norm(Ax), inf_norm(z)});
            const double dual_s = inf_norm(s.P * x + s.q + s.A.transpose() * y) /
                                  std::max({1e-12, inf_norm(s.P * x), inf_norm(s.A.transpose() * y), inf_norm(s.q)});
            const double ratio = std::sqrt(prim_s / std::max(dual_s, 1e-12));
            const double candidate = std::clamp(rho_scalar * ratio, kRhoMin, kRhoMax);
            if (candidate > 5.0 * rho_scalar || candidate < 0.2 * rho_scalar) {
                rho_scalar = candidate;
                rho = rho_vector(s.l, s.u, rho_scalar);
                kkt.update_rho(rho);
            }
        }
    }
    sol.iterations = std::min(it, st.max_iter);

    if (sol.status == QpStatus::primal_infeasible || sol.status == QpStatus::dual_infeasible) {
        sol.x = sc.D.cwiseProduct(x);
        if (sol.status == QpStatus::dual_infeasible) sol.y = Vec::Zero(m);
        sol.primal_res = res.prim;
        sol.dual_res = res.dual;
        return sol;
    }

    sol.primal_res = res.prim;
    sol.dual_res = res.dual;
    if (early.ok) {
        sol.x = early.x;
        sol.y = early.y;
        sol.polished = true;
        return sol;
    }
    sol.x = xu;
    sol.y = yu;

    // An unconverged run is still polished: its active-set guess is often right.
    if (st.polish) {
        const Polished p = polish(s, z, y, st.polish_refine_iter);
        if (p.ok) {
            Vec px, pz, py;
            unscale(p.x, p.z, p.y, px, pz, py);
            const Residuals pr = residuals(orig, px, pz, py);
            const double before = std::max(res.prim / st.tol_primal, res.dual / st.tol_dual);
            const double after = std::max(pr.prim / st.tol_primal, pr.dual / st.tol_dual);
            const bool accept = sol.status == QpStatus::optimal ? after <= std::max(before, 1e-3) : after <= 1.0;
            if (accept) {
                sol.status = QpStatus::optimal;
                sol.x = px;
                sol.y = py;
                sol.primal_res = pr.prim;
                sol.dual_res = pr.dual;
                sol.polished = true;
            }
        }
    }
    return sol;
}

}  // namespace qp_detail

void write_triplets(const QpProblem& p, std::ostream& os) {
    os.precision(17);
    os << "n " << p.n_vars() << "\n";
    for (int j = 0; j < p.hessian.outerSize(); ++j)
        for (Eigen::SparseMatrix<double>::InnerIterator it(p.hessian, j); it; ++it)
            os << "H " << it.row() << ' ' << it.col() << ' ' << it.value() << "\n";
    for (Eigen::Index j = 0; j < p.n_vars(); ++j)
        if (p.linear_cost[j] != 0.0) os << "c " << j << ' ' << p.linear_cost[j] << "\n";
    os << "c0 " << p.objective_constant << "\n";
    const Stacked s = stack(p);
    for (int j = 0; j < s.A.outerSize(); ++j)
        for (Eigen::SparseMatrix<double>::InnerIterator it(s.A, j); it; ++it)
            os << "A " << it.row() << ' ' << it.col() << ' ' << it.value() << "\n";
    for (Eigen::Index i = 0; i < s.l.size(); ++i) os << "b " << i << ' ' << s.l[i] << ' ' << s.u[i] << "\n";
}

}  // namespace facts
