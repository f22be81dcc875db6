#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "lml/envelope.hpp"
#include "lml/errors.hpp"
#include "lml/phase.hpp"

namespace lml {

/// Result of a 1-D implicit solve: root, defining-equation residual at the
/// root, iteration count (bisection + polish), and the final bracket.
struct ImplicitSolveReport {
    double value = 0.0;
    double residual = 0.0;
    int iterations = 0;
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
};

namespace detail {

/// arctan(x + d) - arctan(x) without cancellation, for 1 + x(x+d) > 0.
inline double atan_diff(double x, double d) {
    return std::atan(d / (1.0 + x * (x + d)));
}

/// f(a(1+psi)) - f(a) = sum_i [arctan(a_i(1+psi)) - arctan(a_i)], stable for
/// |psi| down to the underflow range.
inline double phase_dev_of_scaling(const Spectrum& a, double psi) {
    double s = 0.0;
    for (int i = 0; i < a.n; ++i) s += atan_diff(a.values[i], a.values[i] * psi);
    return s;
}

/// d/dpsi of phase_dev_of_scaling.
inline double phase_dev_of_scaling_deriv(const Spectrum& a, double psi) {
    double s = 0.0;
    for (int i = 0; i < a.n; ++i) {
        const double ai = a.values[i];
        const double w = ai * (1.0 + psi);
        s += ai / (1.0 + w * w);
    }
    return s;
}

// Bracketed bisection to width 1e-6 followed by Newton polishing of the
// residual.  `f` must be increasing across [lo,hi] with f(lo) <= 0 <= f(hi).
template <class F, class DF>
ImplicitSolveReport bisect_newton(F&& f, DF&& df, double lo, double hi, const char* who) {
    ImplicitSolveReport rep;
    rep.bracket_lo = lo;
    rep.bracket_hi = hi;
    double flo = f(lo);
    double fhi = f(hi);
    if (flo > 0.0 || fhi < 0.0)
        throw InternalError(std::string(who) + ": root not bracketed");
    int it = 0;
    while (hi - lo > 1e-6 && it < 200) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        ++it;
        if (fm <= 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    double x = 0.5 * (lo + hi);
    double fx = f(x);
    for (int k = 0; k < 60; ++k) {
        ++it;
        const double d = df(x);
        if (!(std::abs(d) > 0.0)) break;
        double step = fx / d;
        double xn = x - step;
        if (xn < lo || xn > hi) xn = 0.5 * (lo + hi);  // fall back into the bracket
        const double fn = f(xn);
        if (fn <= 0.0)
            lo = xn;
        else
            hi = xn;
        x = xn;
        fx = fn;
        if (std::abs(fx) <= 1e-13 && std::abs(step) <= 1e-12 * std::max(1.0, std::abs(x))) break;
    }
    rep.value = x;
    rep.residual = fx;
    rep.iterations = it;
    if (std::abs(fx) > 1e-12)
        throw NumericalError(std::string(who) + ": residual " + std::to_string(fx) +
                             " above 1e-12 after polish");
    return rep;
}

}  // namespace detail

namespace detail {

// Deviation-form solves: psi = w - 1 satisfies f(a(1+psi)) - f(a) = target.
inline ImplicitSolveReport solve_w_psi(const Spectrum& a, double target, const char* who) {
    if (target == 0.0) return ImplicitSolveReport{};  // exact root of the flat envelope
    double lo = 0.0, hi = 0.0;
    int grow = 0;
    if (target >= 0.0) {
        hi = 1.0;
        while (phase_dev_of_scaling(a, hi) < target) {
            hi *= 2.0;
            if (++grow > 60)
                throw NumericalError(std::string(who) +
                                     ": bracket growth exhausted (envelope too close to band)");
        }
    } else {
        lo = -0.5;
        while (phase_dev_of_scaling(a, lo) > target) {
            lo = 0.5 * (lo - 1.0);
            if (++grow > 200)
                throw NumericalError(std::string(who) +
                                     ": bracket growth exhausted (envelope too close to band)");
        }
    }
    auto f = [&](double psi) { return phase_dev_of_scaling(a, psi) - target; };
    auto df = [&](double psi) { return phase_dev_of_scaling_deriv(a, psi); };
    return bisect_newton(f, df, lo, hi, who);
}

}  // namespace detail

/// w_under(s) solves f(a w) = upper(s); the deviation psi = w - 1 solves
/// f(a(1+psi)) - f(a) = upper_dev(s), which is what is actually iterated so
/// the tail w -> 1 keeps full precision.
inline ImplicitSolveReport solve_w_under_report(const PhaseEnvelope& env, const Spectrum& a,
                                                double s) {
    ImplicitSolveReport rep = detail::solve_w_psi(a, env.upper_dev(s), "solve_w_under");
    rep.value += 1.0;
    rep.bracket_lo += 1.0;
    rep.bracket_hi += 1.0;
    return rep;
}

inline double solve_w_under(const PhaseEnvelope& env, const Spectrum& a, double s) {
    return solve_w_under_report(env, a, s).value;
}

/// Deviation form: w_under(s) - 1 without the round trip through 1 + psi.
inline double solve_w_under_dev(const PhaseEnvelope& env, const Spectrum& a, double s) {
    return detail::solve_w_psi(a, env.upper_dev(s), "solve_w_under").value;
}

/// w_over(s) solves f(a w) = lower(s); w <= 1.
inline ImplicitSolveReport solve_w_over_report(const PhaseEnvelope& env, const Spectrum& a,
                                               double s) {
    ImplicitSolveReport rep = detail::solve_w_psi(a, env.lower_dev(s), "solve_w_over");
    rep.value += 1.0;
    rep.bracket_lo += 1.0;
    rep.bracket_hi += 1.0;
    return rep;
}

inline double solve_w_over(const PhaseEnvelope& env, const Spectrum& a, double s) {
    return solve_w_over_report(env, a, s).value;
}

inline double solve_w_over_dev(const PhaseEnvelope& env, const Spectrum& a, double s) {
    return detail::solve_w_psi(a, env.lower_dev(s), "solve_w_over").value;
}

namespace detail {

/// Phase deficit D(s,w) = upper(s) - f(a w) evaluated through deviations.
inline double sub_deficit(const PhaseEnvelope& env, const Spectrum& a, double s, double psi) {
    return env.upper_dev(s) - phase_dev_of_scaling(a, psi);
}

}  // namespace detail

/// Closed-form h(s,w) = tan(upper(s) - sum_{i>=2} arctan(a_i w)); stable
/// difference path used by the profile ODE.  No domain restriction beyond the
/// tangent argument staying inside (-pi/2, pi/2).
inline double solve_h_closed(const PhaseEnvelope& env, const Spectrum& a, double s, double w) {
    const double theta1 = std::atan(a.values[0] * w);
    const double D = detail::sub_deficit(env, a, s, w - 1.0);
    const double theta = theta1 + D;
    if (std::abs(theta) >= std::numbers::pi / 2.0 - 1e-12)
        throw NumericalError("solve_h_closed: tangent argument at the branch boundary");
    return std::tan(theta);
}

/// h0(s,w) - a_1 w without cancellation, h0 = max(0,h): for h >= 0 this is
/// tan(theta) - tan(theta1) = sin(D)/(cos theta cos theta1); the clamped
/// branch reduces to -a_1 w.
inline double sub_h0_minus_a1w(const PhaseEnvelope& env, const Spectrum& a, double s,
                               double psi) {
    const double w = 1.0 + psi;
    const double theta1 = std::atan(a.values[0] * w);
    const double D = detail::sub_deficit(env, a, s, psi);
    const double theta = theta1 + D;
    if (std::abs(theta) >= std::numbers::pi / 2.0 - 1e-12)
        throw NumericalError("sub_h_minus_a1w: tangent argument at the branch boundary");
    if (theta < 0.0) {
        // h < 0 is clamped to zero by h0, so the combination becomes -a_1 w.
        return -a.values[0] * w;
    }
    return std::sin(D) / (std::cos(theta) * std::cos(theta1));
}

/// max(0, h): the subsolution construction never needs negative h.
inline double h_zero_clamp(double h) { return std::max(0.0, h); }

/// Root-finding form of the first-slot implicit function: solves
/// arctan(h) + sum_{i>=2} arctan(a_i w) = upper(s) by bracketed bisection plus
/// Newton.  Domain: w >= w_under(s) up to a 2e-4 probe slack (derivative
/// checks step slightly below the curve); further below throws domain_error.
inline ImplicitSolveReport solve_h_report(const PhaseEnvelope& env, const Spectrum& a,
                                          double s, double w) {
    const double w_under = solve_w_under(env, a, s);
    if (w < w_under - 2e-4 * std::max(1.0, std::abs(w_under)))
        throw std::domain_error("solve_h: w = " + std::to_string(w) + " below w_under(s) = " +
                                std::to_string(w_under));
    const double gbar = env.upper(s);
    double tail = 0.0;
    for (int i = 1; i < a.n; ++i) tail += std::atan(a.values[i] * w);
    auto f = [&](double h) { return std::atan(h) + tail - gbar; };
    auto df = [&](double h) { return 1.0 / (1.0 + h * h); };
    const double lo = std::tan(gbar - (a.n - 1) * std::numbers::pi / 2.0);
    double hi = std::max(a.values[0] * w, lo + 1.0);
    int grow = 0;
    while (f(hi) < 0.0) {
        // Only reachable inside the probe slack below w_under.
        hi = lo + 2.0 * (hi - lo) + 1.0;
        if (++grow > 60) throw InternalError("solve_h: bracket growth exhausted");
    }
    return detail::bisect_newton(f, df, lo, hi, "solve_h");
}

inline double solve_h(const PhaseEnvelope& env, const Spectrum& a, double s, double w) {
    return solve_h_report(env, a, s, w).value;
}

/// h at the flat limit envelope == g_inf (no domain restriction near w = 1).
inline double solve_h_limit(const Spectrum& a, double g_inf, double w) {
    double tail = 0.0;
    for (int i = 1; i < a.n; ++i) tail += std::atan(a.values[i] * w);
    const double theta = g_inf - tail;
    if (std::abs(theta) >= std::numbers::pi / 2.0 - 1e-12)
        throw NumericalError("solve_h_limit: tangent argument at the branch boundary");
    return std::tan(theta);
}

/// Analytic limit slope dh/dw at (s,w) = (inf,1):
/// -(1+a_1^2) sum_{i>=2} a_i/(1+a_i^2).  Internally re-checked against the
/// dispersion identity (dh/dw - a_1)/(2 a_n) = -M(A).
inline double dh_dw_limit(const Spectrum& spec) {
    const Spectrum a = detail::abs_normalized_spectrum(spec, "dh_dw_limit");
    double tail = 0.0;
    for (int i = 1; i < a.n; ++i) tail += a.values[i] / (1.0 + a.values[i] * a.values[i]);
    const double slope = -(1.0 + a.values[0] * a.values[0]) * tail;
    const double m = m_of_a(a);
    const double lhs = (slope - a.values[0]) / (2.0 * a.values[a.n - 1]);
    if (std::abs(lhs + m) > 1e-10 * std::max(1.0, m))
        throw InternalError("dh_dw_limit: dispersion identity violated");
    return slope;
}

/// Dispersion factor J(w,H) of the supersolution construction:
/// (sqrt(1+(a_1 w)^2) + 4 a_1 H)^2 (a_1 w + (a_1 w)^3 + 4 a_n H)
/// / ((1+(a_1 w)^2)^2 a_1 w) - 1.  J(w,0) = 0 and J increases in H.
inline double j_factor(const Spectrum& spec, double w, double H) {
    const Spectrum a = detail::abs_normalized_spectrum(spec, "j_factor");
    if (!(w > 0.0)) throw std::domain_error("j_factor: w must be positive");
    if (!(H >= 0.0)) throw std::domain_error("j_factor: H must be nonnegative");
    const double a1 = a.values[0];
    const double an = a.values[a.n - 1];
    const double x = a1 * w;
    const double p = std::sqrt(1.0 + x * x) + 4.0 * a1 * H;
    const double q = x + x * x * x + 4.0 * an * H;
    const double den = (1.0 + x * x) * (1.0 + x * x) * x;
    return p * p * q / den - 1.0;
}

namespace detail {

inline double j_factor_dH(const Spectrum& a, double w, double H) {
    const double a1 = a.values[0];
    const double an = a.values[a.n - 1];
    const double x = a1 * w;
    const double p = std::sqrt(1.0 + x * x) + 4.0 * a1 * H;
    const double q = x + x * x * x + 4.0 * an * H;
    const double den = (1.0 + x * x) * (1.0 + x * x) * x;
    return (8.0 * a1 * p * q + 4.0 * an * p * p) / den;
}

}  // namespace detail

/// H(s,w) >= 0 solves
///   arctan(a_1 w + 2 a_n (1+J) H) + sum_{i>=2} arctan(a_i w + 2 a_n J H) = lower(s),
/// J = J(w,H).  The residual is assembled from arctan differences so roots of
/// size ~1e-14 near the fixed point (inf, 1) keep full relative accuracy;
/// Newton iterates inside a sign-change bracket.  w above w_over(s) (strictly,
/// beyond roundoff) has no nonnegative root and throws domain_error.
inline ImplicitSolveReport solve_H_report(const PhaseEnvelope& env, const Spectrum& a,
                                          double s, double w) {
    if (!(w > 0.0)) throw std::domain_error("solve_H: w must be positive");
    const double an = a.values[a.n - 1];
    const double psi = w - 1.0;
    const double base_dev = detail::phase_dev_of_scaling(a, psi) - env.lower_dev(s);

    auto lambda_shifts = [&](double H, double& d1, double& di, double& d1p, double& dip) {
        const double J = j_factor(a, w, H);
        const double JH = detail::j_factor_dH(a, w, H);
        d1 = 2.0 * an * (1.0 + J) * H;
        di = 2.0 * an * J * H;
        d1p = 2.0 * an * (1.0 + J + H * JH);
        dip = 2.0 * an * (J + H * JH);
    };
    auto resid = [&](double H) {
        double d1, di, d1p, dip;
        lambda_shifts(H, d1, di, d1p, dip);
        double r = base_dev + detail::atan_diff(a.values[0] * w, d1);
        for (int i = 1; i < a.n; ++i) r += detail::atan_diff(a.values[i] * w, di);
        return r;
    };
    auto dresid = [&](double H) {
        double d1, di, d1p, dip;
        lambda_shifts(H, d1, di, d1p, dip);
        const double l1 = a.values[0] * w + d1;
        double r = d1p / (1.0 + l1 * l1);
        for (int i = 1; i < a.n; ++i) {
            const double li = a.values[i] * w + di;
            r += dip / (1.0 + li * li);
        }
        return r;
    };

    ImplicitSolveReport rep;
    const double r0 = resid(0.0);
    if (r0 > 1e-10)
        throw std::domain_error("solve_H: w = " + std::to_string(w) +
                                " above w_over(s), no nonnegative root");
    if (r0 >= 0.0) {
        rep.value = 0.0;
        rep.residual = r0;
        return rep;
    }

    double lo = 0.0;            // resid(lo) < 0
    double hi = -r0 / dresid(0.0);  // Newton seed from the H=0 slope
    int it = 0;
    while (resid(hi) < 0.0) {
        lo = hi;
        hi *= 2.0;
        ++it;
        if (hi > 1e6) throw InternalError("solve_H: bracket grew past 1e6");
    }
    double H = std::min(hi, std::max(lo, -r0 / dresid(0.0)));
    double r = resid(H);
    for (int k = 0; k < 100; ++k) {
        ++it;
        if (r < 0.0)
            lo = H;
        else
            hi = H;
        const double d = dresid(H);
        double Hn = H - r / d;
        if (!(Hn > lo) || !(Hn < hi)) Hn = 0.5 * (lo + hi);
        const double step = std::abs(Hn - H);
        H = Hn;
        r = resid(H);
        if (step <= 4e-16 * H || r == 0.0) break;
    }
    rep.value = H;
    rep.residual = r;
    rep.iterations = it;
    rep.bracket_lo = lo;
    rep.bracket_hi = hi;
    if (std::abs(r) > 1e-12)
        throw NumericalError("solve_H: residual " + std::to_string(r) + " above 1e-12");
    return rep;
}

inline double solve_H(const PhaseEnvelope& env, const Spectrum& a, double s, double w) {
    return solve_H_report(env, a, s, w).value;
}

/// Right-hand side of the subsolution profile ODE in t = ln(1+s):
/// dW/dt = (h0(s,W) - a_1 W) / (2 a_n), evaluated at W = 1 + psi.
inline double sub_rhs_t(const PhaseEnvelope& env, const Spectrum& a, double s, double psi) {
    return sub_h0_minus_a1w(env, a, s, psi) / (2.0 * a.values[a.n - 1]);
}

/// Right-hand side of the supersolution profile ODE in t = ln(1+s):
/// dW/dt = H(s,W), evaluated at W = 1 + psi.
inline double super_rhs_t(const PhaseEnvelope& env, const Spectrum& a, double s, double psi) {
    return solve_H(env, a, s, 1.0 + psi);
}

}  // namespace lml
