#pragma once

// Internals shared by the ADMM and interior-point QP methods.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>

#include "facts/qp_solver.hpp"

namespace facts::qp_detail {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kRhoEqScale = 1e3;

inline double inf_norm(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Row-wise max |a_ij|.
inline Vec row_inf_norms(const SpMat& a) {
    Vec out = Vec::Zero(a.rows());
    for (int j = 0; j < a.outerSize(); ++j)
        for (SpMat::InnerIterator it(a, j); it; ++it) out[it.row()] = std::max(out[it.row()], std::abs(it.value()));
    return out;
}

inline Vec col_inf_norms(const SpMat& a) {
    Vec out = Vec::Zero(a.cols());
    for (int j = 0; j < a.outerSize(); ++j)
        for (SpMat::InnerIterator it(a, j); it; ++it) out[j] = std::max(out[j], std::abs(it.value()));
    return out;
}

inline double clip_norm(double v) {
    if (v < 1e-4) return 1.0;
    return std::min(v, 1e4);
}

inline Vec project(const Vec& v, const Vec& lo, const Vec& hi) { return v.cwiseMax(lo).cwiseMin(hi); }

// The stacked form l <= A x <= u used internally.
struct Stacked {
    SpMat P;
    Vec q;
    SpMat A;
    Vec l, u;
    std::vector<Eigen::Index> var_row;  // row of A holding x_j's bound, or -1
};

inline Stacked stack(const QpProblem& p) {
    const Eigen::Index n = p.n_vars();
    Stacked s;
    s.P = p.hessian;
    s.q = p.linear_cost;
    const Eigen::Index meq = p.eq_matrix.rows();
    const Eigen::Index min = p.ineq_matrix.rows();
    std::vector<Eigen::Index> bounded;
    for (Eigen::Index j = 0; j < n; ++j)
        if (std::isfinite(p.var_lower[j]) || std::isfinite(p.var_upper[j])) bounded.push_back(j);
    const Eigen::Index m = meq + min + static_cast<Eigen::Index>(bounded.size());

    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(p.eq_matrix.nonZeros() + p.ineq_matrix.nonZeros()) + bounded.size());
    for (int j = 0; j < p.eq_matrix.outerSize(); ++j)
        for (SpMat::InnerIterator it(p.eq_matrix, j); it; ++it)
            trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int j = 0; j < p.ineq_matrix.outerSize(); ++j)
        for (SpMat::InnerIterator it(p.ineq_matrix, j); it; ++it)
            trip.emplace_back(static_cast<int>(meq + it.row()), static_cast<int>(it.col()), it.value());
    s.var_row.assign(static_cast<std::size_t>(n), -1);
    for (std::size_t r = 0; r < bounded.size(); ++r) {
        const Eigen::Index row = meq + min + static_cast<Eigen::Index>(r);
        trip.emplace_back(static_cast<int>(row), static_cast<int>(bounded[r]), 1.0);
        s.var_row[static_cast<std::size_t>(bounded[r])] = row;
    }
    s.A.resize(m, n);
    s.A.setFromTriplets(trip.begin(), trip.end());
    s.A.makeCompressed();
    s.l.resize(m);
    s.u.resize(m);
    s.l.head(meq) = p.eq_rhs;
    s.u.head(meq) = p.eq_rhs;
    s.l.segment(meq, min) = p.ineq_lower;
    s.u.segment(meq, min) = p.ineq_upper;
    for (std::size_t r = 0; r < bounded.size(); ++r) {
        s.l[meq + min + static_cast<Eigen::Index>(r)] = p.var_lower[bounded[r]];
        s.u[meq + min + static_cast<Eigen::Index>(r)] = p.var_upper[bounded[r]];
    }
    return s;
}

struct Scaling {
    Vec D, E;
    double c = 1.0;
};

inline Scaling ruiz(Stacked& s, int iterations) {
    const Eigen::Index n = s.P.cols(), m = s.A.rows();
    Scaling sc;
    sc.D = Vec::Ones(n);
    sc.E = Vec::Ones(m);
    for (int it = 0; it < iterations; ++it) {
        Vec dcol = col_inf_norms(s.P).cwiseMax(col_inf_norms(s.A));
        Vec erow = row_inf_norms(s.A);
        for (Eigen::Index j = 0; j < n; ++j) dcol[j] = 1.0 / std::sqrt(clip_norm(dcol[j]));
        for (Eigen::Index i = 0; i < m; ++i) erow[i] = 1.0 / std::sqrt(clip_norm(erow[i]));
        s.P = dcol.asDiagonal() * s.P * dcol.asDiagonal();
        s.q = dcol.cwiseProduct(s.q);
        s.A = erow.asDiagonal() * s.A * dcol.asDiagonal();
        sc.D = sc.D.cwiseProduct(dcol);
        sc.E = sc.E.cwiseProduct(erow);

        const Vec pc = col_inf_norms(s.P);
        const double mean_p = n ? pc.mean() : 0.0;
        const double g = 1.0 / clip_norm(std::max(mean_p, inf_norm(s.q)));
        s.P *= g;
        s.q *= g;
        sc.c *= g;
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        if (std::isfinite(s.l[i])) s.l[i] *= sc.E[i];
        if (std::isfinite(s.u[i])) s.u[i] *= sc.E[i];
    }
    return sc;
}

// Columns of variables shared by all scenarios (VarKey::scenario == -1).
inline std::vector<char> shared_columns(const QpProblem& p) {
    std::vector<char> out;
    if (p.var_map.empty()) return out;
    out.resize(p.var_map.size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = p.var_map[j].scenario < 0;
    return out;
}

// KKT matrix [P + sigma I, A'; A, -diag(1/rho)] in lower storage, with the
// diagonal positions recorded for cheap sigma / rho updates. The ordering is
// AMD on everything except the `defer` columns, which are eliminated last:
// shared columns touch every scenario block and cause heavy fill when AMD
// picks them early.
class KktSystem {
public:
    KktSystem(const SpMat& P, const SpMat& A, double sigma, const Vec& rho, const std::vector<char>& defer = {})
        : n_(P.cols()), m_(A.rows()) {
        std::vector<Triplet> trip;
        trip.reserve(static_cast<std::size_t>(P.nonZeros() + A.nonZeros() + n_ + m_));
        for (int j = 0; j < P.outerSize(); ++j)
            for (SpMat::InnerIterator it(P, j); it; ++it)
                if (it.row() > it.col()) trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        p_diag_ = Vec::Zero(n_);
        for (int j = 0; j < P.outerSize(); ++j)
            for (SpMat::InnerIterator it(P, j); it; ++it)
                if (it.row() == it.col()) p_diag_[j] += it.value();
        for (Eigen::Index j = 0; j < n_; ++j) trip.emplace_back(static_cast<int>(j), static_cast<int>(j), p_diag_[j] + sigma);
        for (int j = 0; j < A.outerSize(); ++j)
            for (SpMat::InnerIterator it(A, j); it; ++it)
                trip.emplace_back(static_cast<int>(n_ + it.row()), static_cast<int>(it.col()), it.value());
        for (Eigen::Index i = 0; i < m_; ++i)
            trip.emplace_back(static_cast<int>(n_ + i), static_cast<int>(n_ + i), -1.0 / rho[i]);
        K_.resize(n_ + m_, n_ + m_);
        K_.setFromTriplets(trip.begin(), trip.end());
        K_.makeCompressed();
        diag_.resize(static_cast<std::size_t>(n_ + m_));
        for (Eigen::Index col = 0; col < n_ + m_; ++col)
            for (Eigen::Index p = K_.outerIndexPtr()[col]; p < K_.outerIndexPtr()[col + 1]; ++p)
                if (K_.innerIndexPtr()[p] == col) diag_[static_cast<std::size_t>(col)] = p;
        order(defer);
        permute();
        ldlt_.analyzePattern(Kp_);
        factor();
    }

    void update_rho(const Vec& rho) {
        for (Eigen::Index i = 0; i < m_; ++i) K_.valuePtr()[diag_[static_cast<std::size_t>(n_ + i)]] = -1.0 / rho[i];
        permute();
        factor();
    }

    void update(double sigma, const Vec& rho) {
        for (Eigen::Index j = 0; j < n_; ++j) K_.valuePtr()[diag_[static_cast<std::size_t>(j)]] = p_diag_[j] + sigma;
        update_rho(rho);
    }

    Vec solve(const Vec& rhs) const {
        const Vec b = perm_ * rhs;
        return perm_.transpose() * Vec(ldlt_.solve(b));
    }
    bool ok() const { return ok_; }

private:
    using Perm = Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int>;
    Eigen::Index n_, m_;
    SpMat K_, Kp_;
    Vec p_diag_;
    std::vector<Eigen::Index> diag_;
    Perm perm_;  // perm_.indices()[old] = new
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::NaturalOrdering<int>> ldlt_;
    bool ok_ = false;

    void order(const std::vector<char>& defer) {
        const Eigen::Index N = n_ + m_;
        std::vector<int> keep, late, sub(static_cast<std::size_t>(N), -1);
        for (Eigen::Index i = 0; i < N; ++i) {
            const bool d = i < n_ && !defer.empty() && defer[static_cast<std::size_t>(i)];
            if (d) {
                late.push_back(static_cast<int>(i));
            } else {
                sub[static_cast<std::size_t>(i)] = static_cast<int>(keep.size());
                keep.push_back(static_cast<int>(i));
            }
        }
        std::vector<Triplet> trip;
        trip.reserve(static_cast<std::size_t>(2 * K_.nonZeros()));
        for (int j = 0; j < K_.outerSize(); ++j)
            for (SpMat::InnerIterator it(K_, j); it; ++it) {
                const int r = sub[static_cast<std::size_t>(it.row())], c = sub[static_cast<std::size_t>(it.col())];
                if (r < 0 || c < 0) continue;
                trip.emplace_back(r, c, 1.0);
                if (r != c) trip.emplace_back(c, r, 1.0);
            }
        const auto nk = static_cast<Eigen::Index>(keep.size());
        SpMat S(nk, nk);
        S.setFromTriplets(trip.begin(), trip.end());
        Perm pinv;
        Eigen::AMDOrdering<int> amd;
        amd(S, pinv);
        perm_.resize(N);
        for (Eigen::Index t = 0; t < nk; ++t) perm_.indices()[keep[static_cast<std::size_t>(pinv.indices()[t])]] = static_cast<int>(t);
        for (std::size_t t = 0; t < late.size(); ++t)
            perm_.indices()[late[t]] = static_cast<int>(nk + static_cast<Eigen::Index>(t));
    }

    void permute() {
        Kp_.resize(n_ + m_, n_ + m_);
        Kp_.selfadjointView<Eigen::Lower>() = K_.selfadjointView<Eigen::Lower>().twistedBy(perm_);
    }

    void factor() {
        ldlt_.factorize(Kp_);
        ok_ = ldlt_.info() == Eigen::Success;
    }
};

inline Vec rho_vector(const Vec& l, const Vec& u, double rho) {
    Vec r(l.size());
    for (Eigen::Index i = 0; i < l.size(); ++i) {
        if (!std::isfinite(l[i]) && !std::isfinite(u[i])) r[i] = kRhoMin;
        else if (l[i] == u[i]) r[i] = kRhoEqScale * rho;
        else r[i] = rho;
    }
    return r;
}

struct Residuals {
    double prim = 0.0, dual = 0.0;
};

// Normalized residuals on the original (unscaled) data.
inline Residuals residuals(const Stacked& orig, const Vec& x, const Vec& z, const Vec& y) {
    const Vec Ax = orig.A * x;
    const Vec Px = orig.P * x;
    const Vec Aty = orig.A.transpose() * y;
    Residuals r;
    r.prim = inf_norm(Ax - z) / std::max({1.0, inf_norm(Ax), inf_norm(z)});
    r.dual = inf_norm(Px + orig.q + Aty) / std::max({1.0, inf_norm(Px), inf_norm(Aty), inf_norm(orig.q)});
    return r;
}

inline bool primal_infeasible(const Stacked& orig, const Vec& dy, double eps) {
    const double norm = inf_norm(dy);
    if (!(norm > 1e-12)) return false;
    if (inf_norm(orig.A.transpose() * dy) > eps * norm) return false;
    double support = 0.0;
    for (Eigen::Index i = 0; i < dy.size(); ++i) {
        const double d = dy[i];
        if (std::abs(d) <= eps * norm) continue;
        if (d > 0.0) {
            if (!std::isfinite(orig.u[i])) return false;
            support += orig.u[i] * d;
        } else {
            if (!std::isfinite(orig.l[i])) return false;
            support += orig.l[i] * d;
        }
    }
    return support < -eps * norm;
}

inline bool dual_infeasible(const Stacked& scaled, const Vec& dx, double eps) {
    const double norm = inf_norm(dx);
    if (!(norm > 1e-12)) return false;
    if (inf_norm(scaled.P * dx) > eps * norm) return false;
    if (scaled.q.dot(dx) > -eps * norm) return false;
    const Vec Adx = scaled.A * dx;
    for (Eigen::Index i = 0; i < Adx.size(); ++i) {
        const bool lo = std::isfinite(scaled.l[i]), hi = std::isfinite(scaled.u[i]);
        if (lo && hi && std::abs(Adx[i]) > eps * norm) return false;
        if (lo && !hi && Adx[i] < -eps * norm) return false;
        if (!lo && hi && Adx[i] > eps * norm) return false;
    }
    return true;
}

/// Primal-dual interior-point method (Mehrotra predictor-corrector) on the
/// stacked problem. Never certifies infeasibility; returns max_iter instead.
QpSolution solve_interior(const QpProblem& problem, const QpSettings& settings);
QpSolution solve_admm(const QpProblem& problem, const QpSettings& settings);

}  // namespace facts::qp_detail
