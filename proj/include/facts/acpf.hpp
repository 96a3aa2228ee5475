#pragma once

#include <complex>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "facts/grid_model.hpp"

namespace facts {

using Complex = std::complex<double>;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Operating point of one scenario. Vectors are indexed by the Network's
/// dense sets: v, theta, dq per bus; p_gen, q_gen per generator; dx per
/// branch. The effective series reactance of branch k is x0 + dx[k].
struct SystemState {
    Eigen::VectorXd v;
    Eigen::VectorXd theta;
    Eigen::VectorXd p_gen;
    Eigen::VectorXd q_gen;
    Eigen::VectorXd dx;
    Eigen::VectorXd dq;

    /// Case-file operating point: generator setpoints at generator buses,
    /// stored voltages elsewhere, no compensation.
    static SystemState from_case(const Network& net);
    static SystemState flat(const Network& net);
};

/// Per-bus demand in per-unit.
struct Loads {
    Eigen::VectorXd p;
    Eigen::VectorXd q;

    static Loads from_network(const Network& net);
};

struct BranchFlows {
    std::vector<Complex> s_from;
    std::vector<Complex> s_to;
};

/// Complex power entering branch at its "from" end, computed from the
/// branch admittance matrix with series reactance `x` in place of x0.
/// Throws std::domain_error for r = x = 0.
Complex flow_from(const Branch& br, double v_f, double theta_f, double v_t, double theta_t, double x);
Complex flow_to(const Branch& br, double v_f, double theta_f, double v_t, double theta_t, double x);

BranchFlows branch_flows(const Network& net, const SystemState& state);

struct Injections {
    Eigen::VectorXd ap;
    Eigen::VectorXd rp;
};

/// Net power leaving each bus into the network, including bus shunts.
Injections injections(const Network& net, const SystemState& state);

/// Full nodal balance residual of length 2*N_b: rows [0, N_b) are
/// P_G - P_D - AP, rows [N_b, 2 N_b) are Q_G - Q_D - RP - dq.
Eigen::VectorXd balance_residual(const Network& net, const SystemState& state, const Loads& loads);

/// |S_f|^2 for every dense branch followed by |S_t|^2 for every dense branch.
Eigen::VectorXd apparent_sq(const Network& net, const SystemState& state);

/// Column layout of the Jacobian: [v | theta | dx | dq | p_gen | q_gen].
struct StateLayout {
    std::size_t nb = 0, nl = 0, ng = 0;

    explicit StateLayout(const Network& net) : nb(net.n_bus()), nl(net.n_branch()), ng(net.n_gen()) {}

    std::size_t v(std::size_t i) const { return i; }
    std::size_t theta(std::size_t i) const { return nb + i; }
    std::size_t dx(std::size_t k) const { return 2 * nb + k; }
    std::size_t dq(std::size_t i) const { return 2 * nb + nl + i; }
    std::size_t p_gen(std::size_t g) const { return 3 * nb + nl + g; }
    std::size_t q_gen(std::size_t g) const { return 3 * nb + nl + ng + g; }
    std::size_t size() const { return 3 * nb + nl + 2 * ng; }

    Eigen::VectorXd pack(const SystemState& s) const;
    SystemState unpack(const Eigen::VectorXd& z) const;
};

/// Exact derivatives of [balance_residual; apparent_sq] (2 N_b + 2 N_l
/// rows) with respect to the StateLayout columns.
SparseMatrix jacobian(const Network& net, const SystemState& state);

/// Per-bus roles for a power-flow solve.
struct PfRoles {
    std::vector<BusKind> role;

    static PfRoles from_network(const Network& net);
};

/// Power-flow residual with the usual Newton exclusions: P rows at every
/// non-slack bus, then Q rows at PQ buses, in bus order.
Eigen::VectorXd mismatch(const Network& net, const SystemState& state, const Loads& loads, const PfRoles& roles);

struct PfOptions {
    double tol = 1e-8;
    int max_iter = 30;
    bool enforce_q_limits = true;
    bool flat_start_fallback = true;
    std::ostream* trace = nullptr;  // JSON lines, one per Newton iteration
};

struct PfResult {
    SystemState state;
    PfRoles roles;
    bool converged = false;
    int iterations = 0;
    double max_mismatch = 0.0;
    std::string diagnostic;
};

/// Newton-Raphson AC power flow. Slack buses absorb P and Q, PV buses hold
/// their generators' p_gen and the voltage found in `state0`, PQ buses hold
/// loads and any generator q_gen; dx and dq are held. On return the slack
/// P_G and the PV/slack Q_G are recomputed from the solved injections.
PfResult solve_pf(const Network& net, const SystemState& state0, const Loads& loads, const PfRoles& roles,
                  const PfOptions& opts = {});

inline PfResult solve_pf(const Network& net, const SystemState& state0, const Loads& loads,
                         const PfOptions& opts = {}) {
    return solve_pf(net, state0, loads, PfRoles::from_network(net), opts);
}

}  // namespace facts
