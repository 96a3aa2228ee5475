#include <doctest.h>

#include <random>
#include <sstream>

#include "facts/qp_solver.hpp"
#include "support/qp_oracle.hpp"
#include "support/qp_random.hpp"

using namespace facts;

namespace {

double rel_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("qp: single bounded variable") {
    QpProblem p = QpProblem::unconstrained(1);
    Eigen::MatrixXd h(1, 1);
    h(0, 0) = 1.0;
    p.hessian = h.sparseView();
    p.var_lower[0] = 1.0;
    const auto s = solve(p);
    REQUIRE(s.status == QpStatus::optimal);
    CHECK(s.x[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("qp: unconstrained minimizer is -q") {
    QpProblem p = QpProblem::unconstrained(3);
    p.hessian = Eigen::MatrixXd::Identity(3, 3).sparseView();
    p.linear_cost = Eigen::Vector3d(1.0, -2.0, 0.5);
    const auto s = solve(p);
    REQUIRE(s.status == QpStatus::optimal);
    CHECK((s.x + p.linear_cost).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("qp: random problems match the KKT enumeration oracle") {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 50; ++t) {
        const int n = 2 + t % 5;
        const int n_eq = t % 3 == 0 ? 1 : 0;
        const int n_in = 1 + t % 3;
        QpProblem p = testing::random_feasible_qp(rng, n, n_eq, n_in, 2);
        const auto ref = testing::kkt_oracle(p);
        REQUIRE(ref.has_value());
        const auto s = solve(p);
        INFO("instance " << t);
        REQUIRE(s.status == QpStatus::optimal);
        CHECK(rel_gap(p.objective(s.x), *ref) < 1e-6);
        CHECK(s.primal_res <= 1e-6);
        CHECK(s.dual_res <= 1e-6);
    }
}

TEST_CASE("qp: infeasible instances yield a certificate") {
    for (int k = 0; k < 10; ++k) {
        INFO("instance " << k);
        const auto s = solve(testing::infeasible_qp(k));
        CHECK(s.status == QpStatus::primal_infeasible);
    }
}

TEST_CASE("qp: unbounded linear program is dual infeasible") {
    QpProblem p = QpProblem::unconstrained(2);
    p.linear_cost = Eigen::Vector2d(-1.0, 0.0);
    p.var_lower[0] = 0.0;
    const auto s = solve(p);
    CHECK(s.status == QpStatus::dual_infeasible);
}

TEST_CASE("qp: row scaling leaves the solution unchanged") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 10; ++t) {
        QpProblem p = testing::random_feasible_qp(rng, 4, 1, 3, 2);
        QpProblem q = p;
        Eigen::VectorXd w(3);
        w << 1e3, 1e-2, 7.0;
        q.ineq_matrix = w.asDiagonal() * p.ineq_matrix;
        for (int i = 0; i < 3; ++i) {
            q.ineq_lower[i] *= w[i];
            q.ineq_upper[i] *= w[i];
        }
        q.eq_matrix *= 50.0;
        q.eq_rhs *= 50.0;
        const auto a = solve(p);
        const auto b = solve(q);
        REQUIRE(a.status == QpStatus::optimal);
        REQUIRE(b.status == QpStatus::optimal);
        CHECK(rel_gap(p.objective(b.x), p.objective(a.x)) < 1e-8);
    }
}

TEST_CASE("qp: tighter tolerance never increases violation") {
    std::mt19937_64 rng(13);
    for (int t = 0; t < 10; ++t) {
        QpProblem p = testing::random_feasible_qp(rng, 5, 1, 3, 3);
        QpSettings loose, tight;
        loose.polish = tight.polish = false;
        loose.tol_primal = loose.tol_dual = 1e-4;
        tight.tol_primal = tight.tol_dual = 1e-5;
        const auto a = solve(p, loose);
        const auto b = solve(p, tight);
        CHECK(p.max_violation(b.x) <= p.max_violation(a.x) + 1e-12);
    }
}

TEST_CASE("qp: solves are deterministic") {
    std::mt19937_64 rng(17);
    QpProblem p = testing::random_feasible_qp(rng, 6, 1, 3, 4);
    const auto a = solve(p);
    const auto b = solve(p);
    CHECK(a.iterations == b.iterations);
    CHECK((a.x - b.x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("qp: validate rejects inconsistent bounds") {
    QpProblem p = QpProblem::unconstrained(2);
    p.var_lower[1] = 1.0;
    p.var_upper[1] = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("qp: triplet dump lists every stacked row") {
    QpProblem p = QpProblem::unconstrained(2);
    p.var_lower[0] = 0.0;
    std::ostringstream os;
    write_triplets(p, os);
    CHECK(os.str().find("b 0 0 inf") != std::string::npos);
}

TEST_CASE("qp interior point: random problems match the KKT enumeration oracle") {
    std::mt19937_64 rng(7);
    QpSettings st;
    st.method = QpMethod::interior_point;
    for (int t = 0; t < 50; ++t) {
        const int n = 2 + t % 5;
        QpProblem p = testing::random_feasible_qp(rng, n, t % 3 == 0 ? 1 : 0, 1 + t % 3, 2);
        const auto ref = testing::kkt_oracle(p);
        REQUIRE(ref.has_value());
        const auto s = solve(p, st);
        INFO("instance " << t);
        REQUIRE(s.status == QpStatus::optimal);
        CHECK(s.method == QpMethod::interior_point);
        CHECK(rel_gap(p.objective(s.x), *ref) < 1e-6);
        CHECK(s.primal_res <= 1e-6);
        CHECK(s.dual_res <= 1e-6);
    }
}

TEST_CASE("qp interior point: multiplier signs follow the stacked convention") {
    // min 1/2 x^2 s.t. x >= 1: x + y = 0 at the solution, so y = -1.
    QpProblem p = QpProblem::unconstrained(1);
    Eigen::MatrixXd h(1, 1);
    h(0, 0) = 1.0;
    p.hessian = h.sparseView();
    p.var_lower[0] = 1.0;
    QpSettings st;
    st.method = QpMethod::interior_point;
    const auto s = solve(p, st);
    REQUIRE(s.status == QpStatus::optimal);
    CHECK(s.x[0] == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(s.y[0] == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("qp interior point: infeasible instances fall back to a certificate") {
    QpSettings st;
    st.method = QpMethod::interior_point;
    for (int k = 0; k < 10; ++k) {
        INFO("instance " << k);
        const auto s = solve(testing::infeasible_qp(k), st);
        CHECK(s.status == QpStatus::primal_infeasible);
        CHECK(s.method == QpMethod::admm);
    }
}

TEST_CASE("qp interior point: shared columns change only the ordering") {
    std::mt19937_64 rng(23);
    QpSettings st;
    st.method = QpMethod::interior_point;
    for (int t = 0; t < 5; ++t) {
        QpProblem p = testing::random_feasible_qp(rng, 6, 1, 3, 3);
        QpProblem q = p;
        q.var_map.assign(6, VarKey{});
        q.var_map[0].scenario = 0;
        q.var_map[4].scenario = 1;  // the rest stay shared
        const auto a = solve(p, st);
        const auto b = solve(q, st);
        REQUIRE(a.status == QpStatus::optimal);
        REQUIRE(b.status == QpStatus::optimal);
        CHECK((a.x - b.x).cwiseAbs().maxCoeff() < 1e-7);
    }
}
