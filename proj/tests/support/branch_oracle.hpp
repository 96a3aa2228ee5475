#pragma once

// Independent branch-flow references used by the acpf tests and the
// acceptance suite.

#include <cmath>
#include <complex>

#include "facts/grid_model.hpp"

namespace facts::testing {

struct BranchDraw {
    Branch br;
    double vf, thf, vt, tht, x;
};

/// Terminal currents of the pi model with an ideal tap at the from end,
/// then S = V conj(I). No admittance matrix is formed.
inline std::complex<double> oracle_from(const BranchDraw& d) {
    using C = std::complex<double>;
    const C vf = std::polar(d.vf, d.thf), vt = std::polar(d.vt, d.tht);
    const C tap = std::polar(d.br.tau, d.br.theta_shift);
    const C z(d.br.r, d.x);
    // Voltage behind the tap on the line side, and the current drawn from it.
    const C v_line = vf / tap;
    const C i_series = (v_line - vt) / z;
    const C i_line_side = i_series + C(0.0, d.br.b / 2.0) * v_line;
    const C i_f = i_line_side / std::conj(tap);
    return vf * std::conj(i_f);
}

inline std::complex<double> oracle_to(const BranchDraw& d) {
    using C = std::complex<double>;
    const C vf = std::polar(d.vf, d.thf), vt = std::polar(d.vt, d.tht);
    const C tap = std::polar(d.br.tau, d.br.theta_shift);
    const C z(d.br.r, d.x);
    const C i_t = (vt - vf / tap) / z + C(0.0, d.br.b / 2.0) * vt;
    return vt * std::conj(i_t);
}

/// Real-arithmetic closed form of the same flows, with Delta = thf - tht - shift.
inline std::complex<double> closed_form_from(const BranchDraw& d) {
    const double r = d.br.r, x = d.x, b = d.br.b, tau = d.br.tau;
    const double l = r * r + x * x;
    const double dl = d.thf - d.tht - d.br.theta_shift;
    const double p = d.vf * d.vf * r / (tau * tau * l) - d.vf * d.vt * (r * std::cos(dl) - x * std::sin(dl)) / (tau * l);
    const double q = d.vf * d.vf * (x / l - b / 2.0) / (tau * tau) -
                     d.vf * d.vt * (x * std::cos(dl) + r * std::sin(dl)) / (tau * l);
    return {p, q};
}

/// A published variant of the from-end expression, reproduced with its sign error.
inline std::complex<double> printed_from(const BranchDraw& d) {
    const double r = d.br.r, x = d.x, b = d.br.b, tau = d.br.tau;
    const double l = r * r + x * x;
    const double dl = d.thf - d.tht - d.br.theta_shift;
    const double re = d.vf * (r * d.vf - tau * d.vt * (r * std::cos(dl) + x * std::sin(dl))) / (tau * tau * l);
    const double im = -d.vf / (2.0 * tau * tau * l) *
                      (d.vf * (-2.0 * x + b * l) + 2.0 * tau * d.vt * (x * std::cos(dl) + r * std::sin(dl)));
    return {re, im};
}

inline std::complex<double> printed_to(const BranchDraw& d) {
    const double r = d.br.r, x = d.x, b = d.br.b, tau = d.br.tau;
    const double l = r * r + x * x;
    const double dl = d.thf - d.tht - d.br.theta_shift;
    const double re = d.vt * (r * tau * d.vt - d.vf * (r * std::cos(dl) + x * std::sin(dl))) / (tau * tau * l);
    const double im =
        -d.vt / (2.0 * tau * l) * (tau * d.vt * (-2.0 * x + b * l) + 2.0 * d.vf * (x * std::cos(dl) - r * std::sin(dl)));
    return {re, im};
}

template <class Rng>
BranchDraw random_draw(Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    BranchDraw d;
    d.br.r = 0.1 * u(rng);
    d.br.x0 = 0.02 + 0.5 * u(rng);
    d.br.b = 0.5 * u(rng);
    d.br.tau = 0.9 + 0.2 * u(rng);
    d.br.theta_shift = -0.2 + 0.4 * u(rng);
    d.vf = 0.9 + 0.2 * u(rng);
    d.vt = 0.9 + 0.2 * u(rng);
    d.thf = -0.5 + u(rng);
    d.tht = -0.5 + u(rng);
    d.x = d.br.x0 * (0.5 + u(rng)) * (u(rng) < 0.1 ? -1.0 : 1.0);
    return d;
}

}  // namespace facts::testing
