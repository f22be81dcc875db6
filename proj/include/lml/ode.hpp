#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <span>
#include <string>

#include "lml/errors.hpp"

namespace lml {

/// Adaptive Dormand-Prince 5(4) integrator.  The trajectory is forced through
/// the given ascending node sequence (steps never overshoot the next node) and
/// `on_node(k, t, y)` fires at every node including the first.  Tolerances are
/// applied per component as atol + rtol*|y|.  Throws NumericalError on step
/// underflow or step-count exhaustion, reporting the last reached t.
template <int N, class Rhs, class NodeFn>
std::array<double, N> integrate_rk45(Rhs&& rhs, std::span<const double> nodes,
                                     std::array<double, N> y, double atol, double rtol,
                                     NodeFn&& on_node) {
    static_assert(N >= 1);
    if (nodes.size() < 2) throw std::invalid_argument("integrate_rk45: need >= 2 nodes");

    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                     a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                     a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                     b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    // b - b* (5th minus embedded 4th), for the error estimate.
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                     e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    using State = std::array<double, N>;
    auto axpy = [](State& out, const State& base, double h, std::initializer_list<std::pair<double, const State*>> terms) {
        for (int i = 0; i < N; ++i) {
            double acc = 0.0;
            for (const auto& [coef, k] : terms) acc += coef * (*k)[i];
            out[i] = base[i] + h * acc;
        }
    };

    double t = nodes[0];
    State k1;
    rhs(t, y, k1);
    on_node(static_cast<std::size_t>(0), t, y);

    const double span_total = nodes[nodes.size() - 1] - nodes[0];
    double h = span_total / 1024.0;
    std::size_t steps = 0;
    const std::size_t max_steps = 50'000'000;

    for (std::size_t node = 1; node < nodes.size(); ++node) {
        const double t_target = nodes[node];
        while (t < t_target) {
            if (++steps > max_steps)
                throw NumericalError("integrate_rk45: step budget exhausted at t = " +
                                     std::to_string(t));
            bool clipped = false;
            double hs = h;
            if (t + hs >= t_target) {
                hs = t_target - t;
                clipped = true;
            }
            State k2, k3, k4, k5, k6, k7, ytmp, ynew;
            axpy(ytmp, y, hs, {{a21, &k1}});
            rhs(t + c2 * hs, ytmp, k2);
            axpy(ytmp, y, hs, {{a31, &k1}, {a32, &k2}});
            rhs(t + c3 * hs, ytmp, k3);
            axpy(ytmp, y, hs, {{a41, &k1}, {a42, &k2}, {a43, &k3}});
            rhs(t + c4 * hs, ytmp, k4);
            axpy(ytmp, y, hs, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}});
            rhs(t + c5 * hs, ytmp, k5);
            axpy(ytmp, y, hs, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}});
            rhs(t + hs, ytmp, k6);
            axpy(ynew, y, hs, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
            rhs(t + hs, ynew, k7);

            double err = 0.0;
            for (int i = 0; i < N; ++i) {
                const double ei = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                                        e6 * k6[i] + e7 * k7[i]);
                const double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
                err += (ei / sc) * (ei / sc);
            }
            err = std::sqrt(err / N);

            if (err <= 1.0) {
                t = clipped ? t_target : t + hs;
                y = ynew;
                k1 = k7;  // FSAL
            }
            double fac = 0.9 * std::pow(std::max(err, 1e-12), -0.2);
            fac = std::min(5.0, std::max(0.2, fac));
            h = hs * fac;
            if (h < 1e-14 * std::max(1.0, std::abs(span_total)))
                throw NumericalError("integrate_rk45: step underflow at t = " +
                                     std::to_string(t));
        }
        on_node(node, t, y);
    }
    return y;
}

}  // namespace lml
