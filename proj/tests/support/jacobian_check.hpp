#pragma once

// Random operating points and a central-difference check of the analytic
// Jacobian, shared by the acpf tests and the acceptance suite.

#include <algorithm>
#include <cmath>
#include <random>

#include "facts/acpf.hpp"

namespace facts::testing {

inline SystemState random_state(const Network& net, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    SystemState s = SystemState::flat(net);
    for (std::size_t i = 0; i < net.n_bus(); ++i) {
        s.v[i] = 1.0 + 0.1 * u(rng);
        s.theta[i] = 0.3 * u(rng);
        s.dq[i] = 0.2 * u(rng);
    }
    for (std::size_t k = 0; k < net.n_branch(); ++k) s.dx[k] = 0.3 * net.branch(k).x0 * u(rng);
    for (std::size_t g = 0; g < net.n_gen(); ++g) {
        s.p_gen[g] = 0.5 + 0.5 * u(rng);
        s.q_gen[g] = 0.3 * u(rng);
    }
    return s;
}

inline Eigen::VectorXd stacked(const Network& net, const SystemState& s, const Loads& loads) {
    const Eigen::VectorXd bal = balance_residual(net, s, loads);
    const Eigen::VectorXd app = apparent_sq(net, s);
    Eigen::VectorXd out(bal.size() + app.size());
    out << bal, app;
    return out;
}

// Largest |analytic - central difference| / max(1, |central difference|).
inline double jacobian_error(const Network& net, const SystemState& s, const Loads& loads) {
    const StateLayout lay(net);
    const Eigen::MatrixXd J = Eigen::MatrixXd(jacobian(net, s));
    const Eigen::VectorXd z = lay.pack(s);
    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t c = 0; c < lay.size(); ++c) {
        Eigen::VectorXd zp = z, zm = z;
        zp[c] += h;
        zm[c] -= h;
        const Eigen::VectorXd fd =
            (stacked(net, lay.unpack(zp), loads) - stacked(net, lay.unpack(zm), loads)) / (2.0 * h);
        for (Eigen::Index r = 0; r < fd.size(); ++r)
            worst = std::max(worst, std::abs(J(r, c) - fd[r]) / std::max(1.0, std::abs(fd[r])));
    }
    return worst;
}

}  // namespace facts::testing
