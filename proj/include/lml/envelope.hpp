#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <string>

#include "lml/errors.hpp"
#include "lml/phase.hpp"

namespace lml {

enum class EnvelopeSign { above, below, two_sided };

inline const char* to_string(EnvelopeSign s) {
    switch (s) {
        case EnvelopeSign::above: return "above";
        case EnvelopeSign::below: return "below";
        default: return "two_sided";
    }
}

/// Monotone phase bounds g_inf - K(1+s)^{-beta/2} <= g <= g_inf + K(1+s)^{-beta/2}
/// in the ellipsoidal coordinate s = x^T A x / 2.  The deviations from g_inf
/// are stored as callables so custom envelopes can be audited through the same
/// interface; the canonical family keeps closed forms and full tail accuracy.
struct PhaseEnvelope {
    double g_inf = 0.0;
    double beta = 0.0;
    double K = 0.0;          // envelope amplitude at s = 0
    double c = 0.0;          // test-family amplitude (c <= K)
    double normalizer = 1.0; // N = tr(A)/n; family argument is 1 + 2s/N
    EnvelopeSign sign = EnvelopeSign::two_sided;
    bool canonical = true;

    // Deviations from g_inf; for the canonical family these are exactly
    // +/- K (1+s)^{-beta/2} and stay fully accurate down to ~1e-300.
    std::function<double(double)> upper_dev_fn;
    std::function<double(double)> lower_dev_fn;

    double upper_dev(double s) const { return upper_dev_fn(s); }
    double lower_dev(double s) const { return lower_dev_fn(s); }
    double upper(double s) const { return g_inf + upper_dev(s); }
    double lower(double s) const { return g_inf + lower_dev(s); }

    /// Representative member of the bounded family: g_inf + sgn*c*(1+2s/N)^{-beta/2}
    /// (sgn = -1 for `below`, else +1).  Satisfies lower <= family_g <= upper.
    double family_dev(double s) const {
        const double sgn = (sign == EnvelopeSign::below) ? -1.0 : 1.0;
        return sgn * c * std::pow(1.0 + 2.0 * s / normalizer, -beta / 2.0);
    }
    double family_g(double s) const { return g_inf + family_dev(s); }
};

/// Canonical envelope pair for amplitude c >= 0.  K = c * max(1, tr(A)/(2n))^{beta/2}
/// is minimal such that the family is sandwiched for every s.  Throws
/// ConfigError when either bound escapes the supercritical band
/// ((n-2) pi/2, n pi/2); the worst s is 0 by monotonicity.
inline PhaseEnvelope build_envelopes(const PhaseParams& params, double c,
                                     EnvelopeSign sign = EnvelopeSign::two_sided) {
    if (!(c >= 0.0)) throw std::invalid_argument("build_envelopes: c must be >= 0");
    PhaseEnvelope e;
    e.g_inf = params.g_inf;
    e.beta = params.beta;
    e.c = c;
    e.sign = sign;
    e.normalizer = params.A.trace() / params.n;
    e.K = c * std::pow(std::max(1.0, params.A.trace() / (2.0 * params.n)), params.beta / 2.0);
    const double K = e.K, beta = e.beta;
    e.upper_dev_fn = [K, beta](double s) { return K * std::pow(1.0 + s, -beta / 2.0); };
    e.lower_dev_fn = [K, beta](double s) { return -K * std::pow(1.0 + s, -beta / 2.0); };
    e.canonical = true;

    const double lo_band = (params.n - 2) * std::numbers::pi / 2.0;
    const double hi_band = params.n * std::numbers::pi / 2.0;
    if (e.upper(0.0) >= hi_band)
        throw ConfigError("build_envelopes: upper bound leaves the band at s = 0 (" +
                          std::to_string(e.upper(0.0)) + " >= " + std::to_string(hi_band) + ")");
    if (e.lower(0.0) <= lo_band)
        throw ConfigError("build_envelopes: lower bound leaves the band at s = 0 (" +
                          std::to_string(e.lower(0.0)) + " <= " + std::to_string(lo_band) + ")");
    return e;
}

/// Wraps user-supplied bounds (absolute values, not deviations) for audit and
/// downstream use.  Tail accuracy is limited by cancellation in g - g_inf.
inline PhaseEnvelope custom_envelope(const PhaseParams& params,
                                     std::function<double(double)> lower,
                                     std::function<double(double)> upper) {
    PhaseEnvelope e;
    e.g_inf = params.g_inf;
    e.beta = params.beta;
    e.c = 0.0;
    e.K = upper(0.0) - params.g_inf;
    e.normalizer = params.A.trace() / params.n;
    e.canonical = false;
    const double gi = params.g_inf;
    e.upper_dev_fn = [upper, gi](double s) { return upper(s) - gi; };
    e.lower_dev_fn = [lower, gi](double s) { return lower(s) - gi; };
    return e;
}

/// Invariant audit on a geometric s-grid: ordering, band containment,
/// monotone approach to g_inf, and the K(1+s)^{-beta/2} decay cap.
/// Returns the offending s; NaN when all checks pass.
inline double audit_envelope(const PhaseEnvelope& env, const PhaseParams& params,
                             int points = 512) {
    const double lo_band = (params.n - 2) * std::numbers::pi / 2.0;
    const double hi_band = params.n * std::numbers::pi / 2.0;
    double prev_up = 0.0, prev_lo = 0.0;
    for (int k = 0; k <= points; ++k) {
        const double s = std::expm1(k * std::log(1e10 + 1.0) / points);
        const double up = env.upper_dev(s);
        const double lo = env.lower_dev(s);
        const double cap = env.K * std::pow(1.0 + s, -env.beta / 2.0) + 1e-14;
        const bool ok = up >= lo && up >= -1e-14 && lo <= 1e-14 &&
                        env.upper(s) < hi_band && env.lower(s) > lo_band &&
                        up <= cap && -lo <= cap &&
                        (k == 0 || (up <= prev_up + 1e-14 && lo >= prev_lo - 1e-14));
        if (!ok) return s;
        prev_up = up;
        prev_lo = lo;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace lml
