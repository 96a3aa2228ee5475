#include <algorithm>
#include <cmath>

#include "qp_internal.hpp"

namespace facts::qp_detail {

namespace {

constexpr double kRegStart = 1e-9;
constexpr double kRegMax = 1e-4;
constexpr double kMinD = 1e-14;
constexpr double kFraction = 0.99;

// Interior-point state on the scaled stacked problem. Every row without
// l == u carries a slack s with l <= s <= u; fixed rows are equalities.
struct Point {
    Vec x, s, lam, zl, zu;
};

struct Direction {
    Vec dx, ds, dlam, dzl, dzu;
};

}  // namespace

QpSolution solve_interior(const QpProblem& problem, const QpSettings& st) {
    const Stacked orig = stack(problem);
    Stacked s = orig;
    const Scaling sc = ruiz(s, st.scaling_iter);
    const Eigen::Index n = s.P.cols(), m = s.A.rows();

    std::vector<char> fixed(static_cast<std::size_t>(m)), has_l(static_cast<std::size_t>(m)),
        has_u(static_cast<std::size_t>(m));
    Eigen::Index n_comp = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto k = static_cast<std::size_t>(i);
        fixed[k] = s.l[i] == s.u[i];
        has_l[k] = !fixed[k] && std::isfinite(s.l[i]);
        has_u[k] = !fixed[k] && std::isfinite(s.u[i]);
        n_comp += has_l[k] + has_u[k];
    }

    Point p;
    p.x = Vec::Zero(n);
    if (st.warm_start && st.warm_start->size() == n) p.x = st.warm_start->cwiseQuotient(sc.D);
    const Vec ax0 = s.A * p.x;
    p.s = ax0;
    p.zl = Vec::Zero(m);
    p.zu = Vec::Zero(m);
    p.lam = Vec::Zero(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (fixed[k]) {
            p.s[i] = s.l[i];
            continue;
        }
        if (has_l[k] && has_u[k]) {
            const double margin = std::min(1.0, 0.25 * (s.u[i] - s.l[i]));
            p.s[i] = std::clamp(ax0[i], s.l[i] + margin, s.u[i] - margin);
        } else if (has_l[k]) {
            p.s[i] = std::max(ax0[i], s.l[i] + 1.0);
        } else if (has_u[k]) {
            p.s[i] = std::min(ax0[i], s.u[i] - 1.0);
        }
        if (has_l[k]) p.zl[i] = 1.0;
        if (has_u[k]) p.zu[i] = 1.0;
        p.lam[i] = p.zl[i] - p.zu[i];
    }

    auto slack_lo = [&](const Point& q, Eigen::Index i) { return q.s[i] - s.l[i]; };
    auto slack_hi = [&](const Point& q, Eigen::Index i) { return s.u[i] - q.s[i]; };
    auto comp_mean = [&](const Point& q) {
        if (n_comp == 0) return 0.0;
        double sum = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto k = static_cast<std::size_t>(i);
            if (has_l[k]) sum += slack_lo(q, i) * q.zl[i];
            if (has_u[k]) sum += slack_hi(q, i) * q.zu[i];
        }
        return sum / static_cast<double>(n_comp);
    };

    Vec rho = Vec::Ones(m);
    double reg = kRegStart;
    KktSystem kkt(s.P, s.A, reg, rho, shared_columns(problem));

    QpSolution sol;
    sol.status = QpStatus::max_iter;
    sol.method = QpMethod::interior_point;
    Vec d(m), r_x, r_s(m), r_a(m), xu, zu_, yu;
    Residuals res;

    auto unscaled = [&](const Point& q) {
        xu = sc.D.cwiseProduct(q.x);
        zu_ = project(orig.A * xu, orig.l, orig.u);
        yu = -sc.E.cwiseProduct(q.lam) / sc.c;
    };

    // Solves the reduced Newton system for complementarity targets (cl, cu).
    auto newton = [&](const Point& q, const Vec& cl, const Vec& cu, Direction& dir) {
        Vec g = Vec::Zero(m);
        Vec rhs(n + m);
        rhs.head(n) = -r_x;
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto k = static_cast<std::size_t>(i);
            if (fixed[k]) {
                rhs[n + i] = -r_a[i];
                continue;
            }
            g[i] = -r_s[i];
            if (has_l[k]) g[i] += cl[i] / slack_lo(q, i);
            if (has_u[k]) g[i] -= cu[i] / slack_hi(q, i);
            rhs[n + i] = -r_a[i] + g[i] / d[i];
        }
        // Regularized solve refined against the exact reduced matrix.
        auto apply = [&](const Vec& v) {
            Vec out(n + m);
            out.head(n) = s.P * v.head(n) + s.A.transpose() * v.tail(m);
            out.tail(m) = s.A * v.head(n);
            for (Eigen::Index i = 0; i < m; ++i)
                if (!fixed[static_cast<std::size_t>(i)]) out[n + i] -= v[n + i] / d[i];
            return out;
        };
        Vec v = kkt.solve(rhs);
        const double target = 1e-12 * std::max(1.0, inf_norm(rhs));
        for (int k = 0; k < 5; ++k) {
            const Vec r = rhs - apply(v);
            if (inf_norm(r) <= target) break;
            v += kkt.solve(r);
        }
        dir.dx = v.head(n);
        dir.dlam = -v.tail(m);
        dir.ds = Vec::Zero(m);
        dir.dzl = Vec::Zero(m);
        dir.dzu = Vec::Zero(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto k = static_cast<std::size_t>(i);
            if (fixed[k]) continue;
            dir.ds[i] = (g[i] - dir.dlam[i]) / d[i];
            if (has_l[k]) dir.dzl[i] = (cl[i] - q.zl[i] * dir.ds[i]) / slack_lo(q, i);
            if (has_u[k]) dir.dzu[i] = (cu[i] + q.zu[i] * dir.ds[i]) / slack_hi(q, i);
        }
    };

    auto max_step = [&](const Point& q, const Direction& dir) {
        double a = 1.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto k = static_cast<std::size_t>(i);
            if (has_l[k]) {
                if (dir.ds[i] < 0.0) a = std::min(a, -slack_lo(q, i) / dir.ds[i]);
                if (dir.dzl[i] < 0.0) a = std::min(a, -q.zl[i] / dir.dzl[i]);
            }
            if (has_u[k]) {
                if (dir.ds[i] > 0.0) a = std::min(a, slack_hi(q, i) / dir.ds[i]);
                if (dir.dzu[i] < 0.0) a = std::min(a, -q.zu[i] / dir.dzu[i]);
            }
        }
        return a;
    };

    auto moved = [&](const Point& q, const Direction& dir, double a) {
        Point out = q;
        out.x += a * dir.dx;
        out.s += a * dir.ds;
        out.lam += a * dir.dlam;
        out.zl += a * dir.dzl;
        out.zu += a * dir.dzu;
        return out;
    };

    int it = 0;
    for (it = 1; it <= st.ipm_max_iter; ++it) {
        const Vec ax = s.A * p.x;
        r_x = s.P * p.x + s.q - s.A.transpose() * p.lam;
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto k = static_cast<std::size_t>(i);
            r_a[i] = fixed[k] ? ax[i] - s.l[i] : ax[i] - p.s[i];
            r_s[i] = fixed[k] ? 0.0 : p.lam[i] - p.zl[i] + p.zu[i];
        }
        const double mu = comp_mean(p);

        unscaled(p);
        res = residuals(orig, xu, zu_, yu);
        // Duality gap in original cost units, relative to the objective.
        const double obj = std::abs(0.5 * p.x.dot(s.P * p.x) + s.q.dot(p.x)) / sc.c;
        const double gap = mu * static_cast<double>(n_comp) / sc.c / std::max(1.0, obj);
        if (res.prim <= st.tol_primal && res.dual <= st.tol_dual && gap <= 0.1 * std::min(st.tol_primal, st.tol_dual)) {
            sol.status = QpStatus::optimal;
            break;
        }
        if (!std::isfinite(mu) || !r_x.allFinite()) break;

        for (Eigen::Index i = 0; i < m; ++i) {
            const auto k = static_cast<std::size_t>(i);
            if (fixed[k]) continue;
            double di = 0.0;
            if (has_l[k]) di += p.zl[i] / slack_lo(p, i);
            if (has_u[k]) di += p.zu[i] / slack_hi(p, i);
            d[i] = std::max(di, kMinD);
        }
        // Regularized factorization: |-1/rho| >= reg in the dual block and
        // +reg on the primal diagonal. Near the solution the spread of d can
        // exceed double precision; the regularization then grows.
        auto factor = [&] {
            for (Eigen::Index i = 0; i < m; ++i)
                rho[i] = fixed[static_cast<std::size_t>(i)] ? 1.0 / reg : std::min(d[i], 1.0 / reg);
            kkt.update(reg, rho);
            return kkt.ok();
        };
        bool factored = factor();
        while (!factored && reg < kRegMax) {
            reg *= 100.0;
            factored = factor();
        }
        if (!factored) break;

        Vec cl = Vec::Zero(m), cu = Vec::Zero(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto k = static_cast<std::size_t>(i);
            if (has_l[k]) cl[i] = -slack_lo(p, i) * p.zl[i];
            if (has_u[k]) cu[i] = -slack_hi(p, i) * p.zu[i];
        }
        Direction aff;
        newton(p, cl, cu, aff);
        const double a_aff = max_step(p, aff);
        const double mu_aff = comp_mean(moved(p, aff, a_aff));
        const double sigma = mu > 0.0 ? std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3) : 0.0;

        for (Eigen::Index i = 0; i < m; ++i) {
            const auto k = static_cast<std::size_t>(i);
            if (has_l[k]) cl[i] = sigma * mu - slack_lo(p, i) * p.zl[i] - aff.ds[i] * aff.dzl[i];
            if (has_u[k]) cu[i] = sigma * mu - slack_hi(p, i) * p.zu[i] + aff.ds[i] * aff.dzu[i];
        }
        Direction dir;
        newton(p, cl, cu, dir);
        const double a = std::min(1.0, kFraction * max_step(p, dir));
        if (!(a > 0.0)) break;
        p = moved(p, dir, a);
    }
    sol.iterations = std::min(it, st.ipm_max_iter);
    unscaled(p);
    res = residuals(orig, xu, zu_, yu);
    sol.x = xu;
    sol.y = yu;
    sol.primal_res = res.prim;
    sol.dual_res = res.dual;
    return sol;
}

}  // namespace facts::qp_detail
