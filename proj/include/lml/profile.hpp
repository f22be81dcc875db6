#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "lml/envelope.hpp"
#include "lml/implicit.hpp"
#include "lml/interp.hpp"
#include "lml/ode.hpp"
#include "lml/regression.hpp"

namespace lml {

enum class ProfileKind { sub, super, radial };

inline const char* to_string(ProfileKind k) {
    switch (k) {
        case ProfileKind::sub: return "sub";
        case ProfileKind::super: return "super";
        default: return "radial";
    }
}

/// Integrated slope profile W on a geometric grid.  For barrier profiles the
/// abscissa is s with t = ln(1+s) and W -> 1; for radial profiles the
/// abscissa is r with t = ln r and W -> w_limit = tan(G_inf/n).  `phi` stores
/// W - w_limit exactly as integrated (never reconstructed from W, so tail
/// values ~1e-14 keep relative accuracy), and `integral` accumulates
/// int (W - w_limit) ds for barriers or int tau (W - w_limit) dtau radially.
struct Profile {
    ProfileKind kind = ProfileKind::sub;
    PhaseEnvelope env;
    Spectrum a;
    double w0 = 1.0;
    double w_limit = 1.0;

    std::vector<double> t;
    std::vector<double> s;  // abscissa: s for barriers, r for radial profiles
    std::vector<double> w;
    std::vector<double> phi;
    std::vector<double> integral;

    PchipInterpolant phi_of_t;
    PchipInterpolant integral_of_t;

    double t_of(double sq) const {
        return kind == ProfileKind::radial ? std::log(sq) : std::log1p(sq);
    }
    double eval_phi(double sq) const { return phi_of_t(t_of(sq)); }
    double eval_w(double sq) const { return w_limit + eval_phi(sq); }
    double eval_integral(double sq) const { return integral_of_t(t_of(sq)); }

    /// U''(s) through the defining ODE (more accurate than differentiating
    /// the interpolant): sub (h0 - a_1 W)/(2 a_n (1+s)), super H(s,W)/(1+s).
    double eval_upp(double sq) const {
        const double psi = eval_phi(sq);
        if (kind == ProfileKind::sub)
            return sub_rhs_t(env, a, sq, psi) / (1.0 + sq);
        if (kind == ProfileKind::super)
            return super_rhs_t(env, a, sq, psi) / (1.0 + sq);
        throw InternalError("eval_upp: radial profiles use RadialSolution");
    }

    double s_end() const { return s.back(); }
    double terminal_gap() const { return std::abs(phi.back()); }
};

namespace detail {

inline std::vector<double> profile_t_grid(double s_max, int intervals) {
    std::vector<double> t(intervals + 1);
    const double T = std::log1p(s_max);
    for (int k = 0; k <= intervals; ++k) t[k] = T * k / intervals;
    return t;
}

inline void finalize_profile(Profile& p) {
    p.w.resize(p.t.size());
    p.s.resize(p.t.size());
    for (std::size_t k = 0; k < p.t.size(); ++k) {
        p.s[k] = (p.kind == ProfileKind::radial) ? std::exp(p.t[k]) : std::expm1(p.t[k]);
        p.w[k] = p.w_limit + p.phi[k];
    }
    p.phi_of_t = PchipInterpolant(p.t, p.phi);
    p.integral_of_t = PchipInterpolant(p.t, p.integral);
}

}  // namespace detail

/// Subsolution profile: dW/ds = (h0(s,W) - a_1 W)/(2 a_n (s+1)), W(0) = w0,
/// integrated as phi = W - 1 in t = ln(1+s) (Dormand-Prince, tol 1e-10).
/// Requires w0 > w_under(0).  Postconditions checked: W nonincreasing,
/// W stays above w_under(s) (sampled), terminal |W - 1| < 1e-6.
inline Profile integrate_sub_profile(const PhaseEnvelope& env, const Spectrum& a, double w0,
                                     double s_max = 1e10, int intervals = 4000,
                                     double tol = 1e-10) {
    const double psi_under0 = detail::solve_w_psi(a, env.upper_dev(0.0), "solve_w_under").value;
    // Strict w0 > w_under(0), with a few-ulp exclusion band so w0 == w_under(0)
    // rejects regardless of how the caller rounded 1 + psi.  The flat envelope
    // admits the exact fixed point w0 = 1.
    const double gate_slack =
        4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(psi_under0));
    const bool flat_fixed_point = env.upper_dev(0.0) == 0.0 && w0 == 1.0;
    if (!(w0 - 1.0 > psi_under0 + gate_slack) && !flat_fixed_point)
        throw std::domain_error("integrate_sub_profile: need w0 > w_under(0) = " +
                                std::to_string(1.0 + psi_under0));

    Profile p;
    p.kind = ProfileKind::sub;
    p.env = env;
    p.a = a;
    p.w0 = w0;
    p.t = detail::profile_t_grid(s_max, intervals);
    p.phi.resize(p.t.size());
    p.integral.resize(p.t.size());

    auto rhs = [&](double t, const std::array<double, 2>& y, std::array<double, 2>& dy) {
        const double s = std::expm1(t);
        dy[0] = sub_rhs_t(env, a, s, y[0]);
        dy[1] = y[0] * std::exp(t);  // d/dt int_0^s (W-1) dr
    };
    integrate_rk45<2>(rhs, p.t, {w0 - 1.0, 0.0}, tol, tol,
                      [&](std::size_t k, double, const std::array<double, 2>& y) {
                          p.phi[k] = y[0];
                          p.integral[k] = y[1];
                      });

    for (std::size_t k = 1; k < p.phi.size(); ++k)
        if (p.phi[k] > p.phi[k - 1] + 1e-12 * std::max(1.0, std::abs(p.phi[k - 1])))
            throw NumericalError("integrate_sub_profile: W not monotone at s = " +
                                 std::to_string(std::expm1(p.t[k])));
    for (std::size_t k = 0; k < p.phi.size(); k += 32) {
        const double sk = std::expm1(p.t[k]);
        const double psi_under =
            detail::solve_w_psi(a, env.upper_dev(sk), "solve_w_under").value;
        if (p.phi[k] + 1e-13 + 1e-3 * std::abs(p.phi[k]) < psi_under)
            throw NumericalError("integrate_sub_profile: W crossed w_under at s = " +
                                 std::to_string(sk));
    }
    if (!(std::abs(p.phi.back()) < 1e-6))
        throw NumericalError("integrate_sub_profile: terminal |W-1| = " +
                             std::to_string(std::abs(p.phi.back())) + " >= 1e-6");
    detail::finalize_profile(p);
    return p;
}

/// Supersolution profile: dW/ds = H(s,W)/(s+1), W(0) = w0 in (0, w_over(0)).
/// Mirrors the subsolution postconditions (W nondecreasing, stays below
/// w_over, terminal |W - 1| < 1e-6).
inline Profile integrate_super_profile(const PhaseEnvelope& env, const Spectrum& a, double w0,
                                       double s_max = 1e10, int intervals = 4000,
                                       double tol = 1e-10) {
    const double psi_over0 = detail::solve_w_psi(a, env.lower_dev(0.0), "solve_w_over").value;
    const double gate_slack =
        4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(psi_over0));
    if (!(w0 > 0.0) || !(w0 - 1.0 < psi_over0 - gate_slack))
        throw std::domain_error("integrate_super_profile: need 0 < w0 < w_over(0) = " +
                                std::to_string(1.0 + psi_over0) + " (open interval)");

    Profile p;
    p.kind = ProfileKind::super;
    p.env = env;
    p.a = a;
    p.w0 = w0;
    p.t = detail::profile_t_grid(s_max, intervals);
    p.phi.resize(p.t.size());
    p.integral.resize(p.t.size());

    auto rhs = [&](double t, const std::array<double, 2>& y, std::array<double, 2>& dy) {
        const double s = std::expm1(t);
        dy[0] = super_rhs_t(env, a, s, y[0]);
        dy[1] = y[0] * std::exp(t);
    };
    integrate_rk45<2>(rhs, p.t, {w0 - 1.0, 0.0}, tol, tol,
                      [&](std::size_t k, double, const std::array<double, 2>& y) {
                          p.phi[k] = y[0];
                          p.integral[k] = y[1];
                      });

    for (std::size_t k = 1; k < p.phi.size(); ++k)
        if (p.phi[k] < p.phi[k - 1] - 1e-12 * std::max(1.0, std::abs(p.phi[k - 1])))
            throw NumericalError("integrate_super_profile: W not monotone at node " +
                                 std::to_string(k));
    for (std::size_t k = 0; k < p.phi.size(); k += 32) {
        const double sk = std::expm1(p.t[k]);
        const double psi_over =
            detail::solve_w_psi(a, env.lower_dev(sk), "solve_w_over").value;
        if (p.phi[k] - 1e-13 - 1e-3 * std::abs(p.phi[k]) > psi_over)
            throw NumericalError("integrate_super_profile: W crossed w_over at s = " +
                                 std::to_string(sk));
    }
    if (!(std::abs(p.phi.back()) < 1e-6))
        throw NumericalError("integrate_super_profile: terminal |W-1| = " +
                             std::to_string(std::abs(p.phi.back())) + " >= 1e-6");
    detail::finalize_profile(p);
    return p;
}

/// Decay-rate fit of |W - w_limit| over the pinned window s in [1e3, 1e9]
/// (radial: r in the same window).  The ln-corrected model competes only when
/// |M(A) - beta/2| < 0.05, per the resonance of the linearized profile ODE.
/// Refuses to fit when the terminal gap exceeds 1e-4.
inline RateFit fit_decay_rate(const Profile& p, double beta, double m_a,
                              double window_lo = 1e3, double window_hi = 1e9) {
    if (!(p.terminal_gap() < 1e-4))
        throw NumericalError("fit_decay_rate: profile has not converged (terminal gap " +
                             std::to_string(p.terminal_gap()) + ")");
    std::vector<double> ts, ys;
    for (std::size_t k = 0; k < p.t.size(); ++k) {
        const double x = p.s[k];
        if (x < window_lo || x > window_hi) continue;
        const double m = std::abs(p.phi[k]);
        if (m < 1e-300) continue;
        ts.push_back(p.t[k]);
        ys.push_back(std::log(m));
    }
    const bool try_log = std::abs(m_a - beta / 2.0) < 0.05;
    return fit_rate_loglog(ts, ys, try_log, window_lo, window_hi);
}

}  // namespace lml
