#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lml/phase.hpp"
#include "lml/profile.hpp"
#include "lml/rng.hpp"

namespace lml {

/// Barrier u(x) = U(s(x)), U(s) = int_0^s W + C, with C fixed so that
/// u - x^T A x/2 -> 0 at infinity.  Subsolutions have C < 0, supersolutions
/// C > 0 (strictly, for a nonflat envelope).
struct BarrierFunction {
    Profile profile;
    PhaseParams params;
    double C = 0.0;
    std::optional<RateFit> rate;  // absent for the flat W == 1 profile

    ProfileKind kind() const { return profile.kind; }

    double U(double s) const { return s + profile.eval_integral(s) + C; }
    double W(double s) const { return profile.eval_w(s); }
    double Upp(double s) const { return profile.eval_upp(s); }

    /// u(x) - x^T A x / 2 = -int_s^inf (W - 1); decays like a power of s.
    double deviation(double s) const { return profile.eval_integral(s) + C; }

    double value(std::span<const double> x) const { return U(params.quadratic_s(x)); }

    /// |Du(x)| = W(s) |A x|; vanishes with x, so the barrier is C^1 at 0.
    double gradient_norm(std::span<const double> x) const {
        std::vector<double> ax(params.n);
        params.A.multiply(x, ax);
        double n2 = 0.0;
        for (double v : ax) n2 += v * v;
        return std::abs(W(params.quadratic_s(x))) * std::sqrt(n2);
    }
};

/// Closes a converged profile into a barrier.  C is the limit of
/// int_0^s (1-W) dr, evaluated as -(I(s_K) + tail) with the tail extrapolated
/// from the fitted decay model; a fitted exponent <= 1 makes the tail
/// nonintegrable and is rejected.  Preconditions: M(A) > 1, beta > 2,
/// terminal |W-1| < 1e-6.
inline BarrierFunction make_barrier(const Profile& profile, const PhaseParams& params) {
    if (profile.kind == ProfileKind::radial)
        throw std::invalid_argument("make_barrier: radial profiles are not barriers");
    if (!(params.m_a > 1.0))
        throw std::invalid_argument("make_barrier: requires M(A) > 1, got " +
                                    std::to_string(params.m_a));
    if (!(params.beta > 2.0))
        throw std::invalid_argument("make_barrier: requires beta > 2, got " +
                                    std::to_string(params.beta));
    if (!(profile.terminal_gap() < 1e-6))
        throw std::invalid_argument("make_barrier: profile terminal gap " +
                                    std::to_string(profile.terminal_gap()) + " >= 1e-6");

    BarrierFunction b;
    b.profile = profile;
    b.params = params;

    double max_phi = 0.0;
    for (double v : profile.phi) max_phi = std::max(max_phi, std::abs(v));
    if (max_phi <= 1e-13) {
        // Flat profile (constant envelope, w0 = 1): u is the exact quadratic.
        b.C = -profile.integral.back();
        return b;
    }

    const RateFit fit = fit_decay_rate(profile, params.beta, params.m_a);
    if (!(fit.exponent > 1.0 + 1e-9))
        throw NumericalError("make_barrier: fitted exponent " + std::to_string(fit.exponent) +
                             " gives a nonintegrable tail");
    const double T = profile.t.back();
    const double p = fit.exponent;
    const double lnC = fit.intercept;
    // tail = int_{s_K}^inf |phi| ds under the fitted model, in t = ln(1+s).
    double tail;
    if (fit.log_corrected)
        tail = std::exp(lnC + (1.0 - p) * T) * (T / (p - 1.0) + 1.0 / ((p - 1.0) * (p - 1.0)));
    else
        tail = std::exp(lnC + (1.0 - p) * T) / (p - 1.0);
    const double sign = (profile.kind == ProfileKind::sub) ? 1.0 : -1.0;
    b.C = -(profile.integral.back() + sign * tail);
    b.rate = fit;

    if (profile.kind == ProfileKind::sub && !(b.C < 0.0))
        throw NumericalError("make_barrier: subsolution constant C = " + std::to_string(b.C) +
                             " not negative");
    if (profile.kind == ProfileKind::super && !(b.C > 0.0))
        throw NumericalError("make_barrier: supersolution constant C = " + std::to_string(b.C) +
                             " not positive");
    return b;
}

/// Outcome of a pointwise barrier inequality audit.  Margins are signed so
/// that nonnegative means the inequality holds; `passed` allows -1e-8 slack.
struct VerificationReport {
    bool passed = false;
    int checked = 0;
    double worst_phase_margin = 0.0;   // sub: F - upper(s); super: lower(s) - F
    double worst_weyl_margin = 0.0;    // eigenvalue sandwich slack
    double worst_lemma_margin = 0.0;   // super only: f(a_J) - F
    std::vector<double> worst_point;
    double worst_s = 0.0;
};

/// Deterministic verification cloud: radii log-uniform in [1e-3, 1e3],
/// directions uniform on the sphere, plus axis-aligned rays of the same
/// radius range (8 per axis).
inline std::vector<std::vector<double>> sample_points(int n, int count, std::uint64_t seed) {
    Sampler rng(seed);
    std::vector<std::vector<double>> pts;
    pts.reserve(static_cast<std::size_t>(count));
    const int axis_pts = std::min(count / 4, 8 * n);
    int made = 0;
    for (int d = 0; d < n && made < axis_pts; ++d) {
        for (int k = 0; k < 8 && made < axis_pts; ++k, ++made) {
            std::vector<double> x(n, 0.0);
            const double r = std::pow(10.0, -3.0 + 6.0 * (k + 0.5) / 8.0);
            x[d] = (k % 2 == 0) ? r : -r;
            pts.push_back(std::move(x));
        }
    }
    while (made < count) {
        const double r = rng.log_uniform(1e-3, 1e3);
        std::vector<double> x = rng.sphere(n);
        for (double& v : x) v *= r;
        pts.push_back(std::move(x));
        ++made;
    }
    return pts;
}

namespace detail {

inline SymmetricMatrix barrier_hessian(const BarrierFunction& b, std::span<const double> x,
                                       double s, double& ax_norm2) {
    const int n = b.params.n;
    std::vector<double> ax(n);
    b.params.A.multiply(x, ax);
    ax_norm2 = 0.0;
    for (double v : ax) ax_norm2 += v * v;
    const double w = b.W(s);
    const double upp = b.Upp(s);
    SymmetricMatrix hess(n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
            hess.set(i, j, w * b.params.A(i, j) + upp * ax[i] * ax[j]);
    return hess;
}

}  // namespace detail

/// Checks F(D^2 u) >= upper(s) at each sample plus the Weyl eigenvalue
/// sandwich a_i W + |Ax|^2 U'' <= lambda_i <= a_i W (U'' <= 0 on the
/// subsolution branch).  Slack -1e-8.
inline VerificationReport verify_subsolution(const BarrierFunction& b,
                                             std::span<const std::vector<double>> points) {
    if (b.kind() != ProfileKind::sub)
        throw std::invalid_argument("verify_subsolution: barrier kind is not sub");
    VerificationReport rep;
    rep.worst_phase_margin = std::numeric_limits<double>::infinity();
    rep.worst_weyl_margin = std::numeric_limits<double>::infinity();
    rep.worst_lemma_margin = std::numeric_limits<double>::infinity();
    const Spectrum& a = b.params.a;
    for (const auto& x : points) {
        const double s = b.params.quadratic_s(x);
        if (!(s > 0.0)) continue;
        double ax2 = 0.0;
        const SymmetricMatrix hess = detail::barrier_hessian(b, x, s, ax2);
        const Spectrum lam = eigen_sym(hess);
        const double F = phase_of_spectrum(lam);
        const double margin = F - b.profile.env.upper(s);
        if (margin < rep.worst_phase_margin) {
            rep.worst_phase_margin = margin;
            rep.worst_point.assign(x.begin(), x.end());
            rep.worst_s = s;
        }
        const double w = b.W(s);
        const double upp = b.Upp(s);
        for (int i = 0; i < lam.n; ++i) {
            const double lo = a.values[i] * w + ax2 * upp;
            const double hi = a.values[i] * w;
            const double weyl = std::min(lam.values[i] - lo, hi - lam.values[i]);
            rep.worst_weyl_margin = std::min(rep.worst_weyl_margin, weyl);
        }
        ++rep.checked;
    }
    rep.worst_lemma_margin = 0.0;  // not applicable on the sub branch
    rep.passed = rep.checked > 0 && rep.worst_phase_margin >= -1e-8 &&
                 rep.worst_weyl_margin >= -1e-8;
    return rep;
}

/// Checks F(D^2 u) <= lower(s), the mirrored Weyl sandwich
/// a_i W <= lambda_i <= a_i W + |Ax|^2 U'' (U'' >= 0), and the dispersion
/// bound F(D^2 u) <= f(a_J) with a_J built from J = J(W, (s+1) U'').
inline VerificationReport verify_supersolution(const BarrierFunction& b,
                                               std::span<const std::vector<double>> points) {
    if (b.kind() != ProfileKind::super)
        throw std::invalid_argument("verify_supersolution: barrier kind is not super");
    VerificationReport rep;
    rep.worst_phase_margin = std::numeric_limits<double>::infinity();
    rep.worst_weyl_margin = std::numeric_limits<double>::infinity();
    rep.worst_lemma_margin = std::numeric_limits<double>::infinity();
    const Spectrum& a = b.params.a;
    const double an = a.values[a.n - 1];
    for (const auto& x : points) {
        const double s = b.params.quadratic_s(x);
        if (!(s > 0.0)) continue;
        double ax2 = 0.0;
        const SymmetricMatrix hess = detail::barrier_hessian(b, x, s, ax2);
        const Spectrum lam = eigen_sym(hess);
        const double F = phase_of_spectrum(lam);
        const double margin = b.profile.env.lower(s) - F;
        if (margin < rep.worst_phase_margin) {
            rep.worst_phase_margin = margin;
            rep.worst_point.assign(x.begin(), x.end());
            rep.worst_s = s;
        }
        const double w = b.W(s);
        const double upp = b.Upp(s);
        for (int i = 0; i < lam.n; ++i) {
            const double lo = a.values[i] * w;
            const double hi = a.values[i] * w + ax2 * upp;
            const double weyl = std::min(lam.values[i] - lo, hi - lam.values[i]);
            rep.worst_weyl_margin = std::min(rep.worst_weyl_margin, weyl);
        }
        // Dispersion bound of the supersolution lemma.
        const double J = j_factor(a, w, (1.0 + s) * upp);
        Spectrum aj = a;
        aj.values[0] = a.values[0] * w + (1.0 + J) * 2.0 * an * s * upp;
        for (int i = 1; i < a.n; ++i) aj.values[i] = a.values[i] * w + J * 2.0 * an * s * upp;
        rep.worst_lemma_margin = std::min(rep.worst_lemma_margin, phase_of_spectrum(aj) - F);
        ++rep.checked;
    }
    rep.passed = rep.checked > 0 && rep.worst_phase_margin >= -1e-8 &&
                 rep.worst_weyl_margin >= -1e-8 && rep.worst_lemma_margin >= -1e-8;
    return rep;
}

}  // namespace lml
