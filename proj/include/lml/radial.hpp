#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "lml/errors.hpp"
#include "lml/implicit.hpp"
#include "lml/ode.hpp"
#include "lml/phase.hpp"
#include "lml/profile.hpp"
#include "lml/regression.hpp"

namespace lml {

/// Slow-decay radial phase: G = G0 on [0,1], a quintic Hermite transition on
/// [1, r_switch], and the pure tail G_inf + r^{-beta} beyond.  Smooth (C^2 at
/// both seams by construction) and monotone decreasing past r = 1.
struct RadialPhase {
    int n = 0;
    double G0 = 0.0;
    double G_inf = 0.0;
    double beta = 0.0;
    double r_switch = 0.0;
    std::array<double, 6> blend{};  // monomial coefficients in x = (r-1)/(r_switch-1)

    double operator()(double r) const { return G_inf + dev(r); }

    /// G(r) - G_inf without cancellation on the tail branch.
    double dev(double r) const {
        if (r <= 1.0) return G0 - G_inf;
        if (r >= r_switch) return std::pow(r, -beta);
        const double x = (r - 1.0) / (r_switch - 1.0);
        double p = blend[5];
        for (int k = 4; k >= 0; --k) p = p * x + blend[k];
        return p - G_inf;
    }

    double w_origin() const { return std::tan(G0 / n); }
    double w_limit() const { return std::tan(G_inf / n); }
};

namespace detail {

// Quintic matching value and first two derivatives at both ends of [0,1].
inline std::array<double, 6> quintic_hermite(double y0, double d0, double c0, double y1,
                                             double d1, double c1) {
    std::array<double, 6> b;
    b[0] = y0;
    b[1] = d0;
    b[2] = 0.5 * c0;
    b[3] = -10.0 * y0 - 6.0 * d0 - 1.5 * c0 + 10.0 * y1 - 4.0 * d1 + 0.5 * c1;
    b[4] = 15.0 * y0 + 8.0 * d0 + 1.5 * c0 - 15.0 * y1 + 7.0 * d1 - c1;
    b[5] = -6.0 * y0 - 3.0 * d0 - 0.5 * c0 + 6.0 * y1 - 3.0 * d1 + 0.5 * c1;
    return b;
}

inline bool blend_monotone_decreasing(const std::array<double, 6>& b) {
    for (int i = 0; i <= 1000; ++i) {
        const double x = i / 1000.0;
        double dp = 5.0 * b[5];
        dp = dp * x + 4.0 * b[4];
        dp = dp * x + 3.0 * b[3];
        dp = dp * x + 2.0 * b[2];
        dp = dp * x + b[1];
        if (dp > 1e-12) return false;
    }
    return true;
}

}  // namespace detail

inline RadialPhase build_radial_phase(int n, double G0, double G_inf, double beta) {
    if (n < 3) throw ConfigError("build_radial_phase: n must be at least 3");
    const double lo = (n - 2) * M_PI / 2.0, hi = n * M_PI / 2.0;
    if (!(lo < G_inf) || !(G_inf < G0) || !(G0 < hi))
        throw ConfigError("build_radial_phase: need (n-2) pi/2 < G_inf < G0 < n pi/2, got G_inf = " +
                          std::to_string(G_inf) + ", G0 = " + std::to_string(G0));
    if (!(beta > 0.0)) throw ConfigError("build_radial_phase: beta must be positive");

    RadialPhase p;
    p.n = n;
    p.G0 = G0;
    p.G_inf = G_inf;
    p.beta = beta;
    p.r_switch = 2.0 * std::max(1.0, std::pow(G0 - G_inf, -1.0 / beta));
    for (int attempt = 0;; ++attempt) {
        const double L = p.r_switch - 1.0;
        const double tail = std::pow(p.r_switch, -beta);
        p.blend = detail::quintic_hermite(G0, 0.0, 0.0, G_inf + tail,
                                          -beta * tail / p.r_switch * L,
                                          beta * (beta + 1.0) * tail /
                                              (p.r_switch * p.r_switch) * L * L);
        if (detail::blend_monotone_decreasing(p.blend)) break;
        if (attempt == 3)
            throw InternalError("build_radial_phase: transition stays non-monotone after widening");
        p.r_switch *= 2.0;
    }
    return p;
}

/// Implicit radial slope equation arctan(w + h) + (n-1) arctan(w) = G(r),
/// solved in closed form.  The admissible range keeps the first arctan
/// argument finite: w above tan((G(r) - pi/2)/(n-1)).
inline double solve_radial_h(const RadialPhase& phase, double r, double w) {
    const double G = phase(r);
    const double barrier = std::tan((G - M_PI / 2.0) / (phase.n - 1));
    if (!(w > barrier))
        throw std::domain_error("solve_radial_h: w = " + std::to_string(w) +
                                " at or below the tangent barrier " + std::to_string(barrier));
    return std::tan(G - (phase.n - 1) * std::atan(w)) - w;
}

namespace detail {

// Same h, evaluated through the deviation phi = w - tan(G_inf/n) so the tail
// never subtracts near-equal numbers: with eps = (G - G_inf) -
// (n-1)(arctan w - arctan w_lim), h = (1+w_lim^2) tan(eps)/(1 - w_lim tan(eps)) - phi.
inline double radial_h_stable(const RadialPhase& phase, double r, double phi) {
    const double wl = phase.w_limit();
    const double eps = phase.dev(r) - (phase.n - 1) * atan_diff(wl, phi);
    const double te = std::tan(eps);
    const double den = 1.0 - wl * te;
    if (!(den > 0.0))
        throw NumericalError("radial profile: slope left the principal branch at r = " +
                             std::to_string(r));
    return (1.0 + wl * wl) * te / den - phi;
}

}  // namespace detail

/// Radial entire-solution candidate for the slow-decay phase: the slope
/// profile W with W = tan(G0/n) on [0,1], plus the quadrature
/// u0(r) = int_0^r tau W(tau) dtau and its deviation from the limiting
/// quadratic, d(r) = u0(r) - tan(G_inf/n) r^2 / 2.
struct RadialSolution {
    RadialPhase phase;
    Profile profile;  // kind radial, abscissa r on [1, 1e8]
    double w_c = 0.0;
    double w_lim = 0.0;
    std::optional<RateFit> growth;

    double u0(double r) const {
        if (r <= 1.0) return 0.5 * w_c * r * r;
        return 0.5 * w_c + 0.5 * w_lim * (r * r - 1.0) + profile.eval_integral(r);
    }
    double growth_dev(double r) const {
        if (r <= 1.0) return 0.5 * (w_c - w_lim) * r * r;
        return 0.5 * (w_c - w_lim) + profile.eval_integral(r);
    }
    /// u0'' = (r W)' = W + h(r, W), through the ODE rather than the
    /// interpolant (second-differencing the quadrature loses the seam).
    double u0pp(double r) const {
        if (r < 1.0) return w_c;
        const double W = profile.eval_w(r);
        return W + solve_radial_h(phase, r, W);
    }
};

inline RadialSolution integrate_radial_profile(const RadialPhase& phase, double r_max = 1e8,
                                               int per_decade = 120) {
    RadialSolution sol;
    sol.phase = phase;
    sol.w_c = phase.w_origin();
    sol.w_lim = phase.w_limit();

    Profile& p = sol.profile;
    p.kind = ProfileKind::radial;
    p.w0 = sol.w_c;
    p.w_limit = sol.w_lim;

    const double T = std::log(r_max);
    const int m = static_cast<int>(std::ceil(per_decade * T / std::log(10.0)));
    p.t.resize(m + 1);
    for (int k = 0; k <= m; ++k) p.t[k] = T * k / m;

    p.phi.resize(p.t.size());
    p.integral.resize(p.t.size());
    p.phi[0] = sol.w_c - sol.w_lim;
    p.integral[0] = 0.0;

    auto rhs = [&](double t, const std::array<double, 2>& y, std::array<double, 2>& dy) {
        dy[0] = detail::radial_h_stable(phase, std::exp(t), y[0]);
        dy[1] = std::exp(2.0 * t) * y[0];
    };
    integrate_rk45<2>(rhs, p.t, {p.phi[0], 0.0}, 1e-14, 1e-10,
                      [&](std::size_t k, double, const std::array<double, 2>& y) {
                          p.phi[k] = y[0];
                          p.integral[k] = y[1];
                      });
    detail::finalize_profile(p);

    for (std::size_t k = 0; k < p.t.size(); ++k) {
        const double r = p.s[k];
        const double lower = std::tan(phase(r) / phase.n) - sol.w_lim;
        if (p.phi[k] < lower - 1e-8 || p.phi[k] > (sol.w_c - sol.w_lim) + 1e-8)
            throw NumericalError("integrate_radial_profile: slope bound violated at r = " +
                                 std::to_string(r));
        if (k > 0 && p.phi[k] > p.phi[k - 1] + 1e-12)
            throw NumericalError("integrate_radial_profile: slope not monotone at r = " +
                                 std::to_string(r));
    }
    return sol;
}

/// Growth classification of d(r) = u0 - tan(G_inf/n) r^2 / 2 on [1e2, 1e7]
/// against the slow-decay dichotomy: r^{2-beta} for beta < 2, ln r at
/// beta = 2, bounded beyond.
struct GrowthReport {
    RateFit fit;          // growth convention: d ~ C r^{exponent} (ln r if flagged)
    double c3 = 0.0;      // min of d / k over the window, k the nominal shape
    double c4 = 0.0;      // max of d / k
    double d_mid = 0.0;   // d at 1e4
    double d_hi = 0.0;    // d at 1e7
    bool conclusive = false;
    std::string model;    // "power", "log", or "convergent"
};

inline GrowthReport classify_growth(RadialSolution& sol) {
    const Profile& p = sol.profile;
    GrowthReport rep;
    rep.d_mid = sol.growth_dev(1e4);
    rep.d_hi = sol.growth_dev(1e7);
    rep.fit.window_lo = 1e2;
    rep.fit.window_hi = 1e7;

    std::vector<double> lr, d;
    for (std::size_t k = 0; k < p.t.size(); ++k) {
        if (p.s[k] < 1e2 || p.s[k] > 1e7) continue;
        lr.push_back(p.t[k]);
        d.push_back(0.5 * (sol.w_c - sol.w_lim) + p.integral[k]);
    }
    rep.fit.npoints = static_cast<int>(lr.size());

    if (rep.d_hi - rep.d_mid < 1e-3 * std::fabs(rep.d_hi)) {
        rep.model = "convergent";
        rep.conclusive = true;
        rep.fit.r2 = 1.0;
        rep.c3 = rep.c4 = d.front();
        for (double v : d) {
            rep.c3 = std::min(rep.c3, v);
            rep.c4 = std::max(rep.c4, v);
        }
        sol.growth = rep.fit;
        return rep;
    }

    std::vector<double> ld(d.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        ld[i] = std::log(std::max(d[i], 1e-300));
    const LinearFit power = linear_fit(lr, ld);  // ln d = ln C + m ln r
    const LinearFit logm = linear_fit(lr, d);    // d = a + C ln r

    if (power.r2 >= logm.r2) {
        rep.model = "power";
        rep.fit.exponent = power.slope;
        rep.fit.intercept = power.intercept;
        rep.fit.r2 = power.r2;
        rep.fit.log_corrected = false;
    } else {
        rep.model = "log";
        rep.fit.exponent = 0.0;
        rep.fit.intercept = std::log(std::max(logm.slope, 1e-300));
        rep.fit.r2 = logm.r2;
        rep.fit.log_corrected = true;
    }
    rep.conclusive = rep.fit.r2 >= 0.999;

    const double shape_pow = 2.0 - sol.phase.beta;
    rep.c3 = std::numeric_limits<double>::infinity();
    rep.c4 = -rep.c3;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double k = rep.model == "log" ? lr[i] : std::exp(shape_pow * lr[i]);
        rep.c3 = std::min(rep.c3, d[i] / k);
        rep.c4 = std::max(rep.c4, d[i] / k);
    }
    sol.growth = rep.fit;
    return rep;
}

/// Backward-shooting check that the origin forces W(0) = tan(G0/n): a
/// perturbed slope at r = 1, integrated toward the origin, must blow up or
/// cross the tangent barrier (the regular solution is the unstable manifold).
inline bool origin_uniqueness_forced(const RadialPhase& phase, double eps) {
    const double wc = phase.w_origin();
    for (double sign : {-1.0, 1.0}) {
        bool escaped = false;
        // tau = -ln r, from r = 1 down to r = 1e-3
        std::vector<double> tau(301);
        for (int k = 0; k <= 300; ++k) tau[k] = std::log(1e3) * k / 300.0;
        struct escape_marker {};
        try {
            integrate_rk45<1>(
                [&](double tt, const std::array<double, 1>& y, std::array<double, 1>& dy) {
                    dy[0] = -solve_radial_h(phase, std::exp(-tt), y[0]);
                },
                tau, {wc * (1.0 + sign * eps)}, 1e-14, 1e-10,
                [&](std::size_t, double, const std::array<double, 1>& y) {
                    if (std::fabs(y[0] - wc) > 0.5) throw escape_marker{};
                });
        } catch (const escape_marker&) {
            escaped = true;
        } catch (const std::domain_error&) {
            escaped = true;  // crossed the tangent barrier
        } catch (const NumericalError&) {
            escaped = true;  // step collapse under blow-up
        }
        if (!escaped) return false;
    }
    return true;
}

/// Composition of the section-5 chain into one machine-checkable record.  The
/// rotation-invariance and comparison steps are cited, not computed; the
/// numerics certify the forced origin slope and the divergence of d(r).
struct NonexistenceReport {
    RadialPhase phase;
    GrowthReport growth;
    std::vector<double> eps_tried{1e-3, 1e-2};
    bool premise_unique = false;     // backward shooting escaped for every eps
    bool premise_divergent = false;  // conclusive non-convergent growth
    bool in_scope = false;           // 0 < beta <= 2
    bool certified = false;
    std::string verdict;
    std::vector<std::string> cited_assumptions{
        "entire solutions with the quadratic match are rotation invariant",
        "radial solutions with u(0) = 0 are unique up to an additive constant",
    };
};

inline NonexistenceReport nonexistence_report(const RadialPhase& phase) {
    NonexistenceReport rep;
    rep.phase = phase;
    RadialSolution sol = integrate_radial_profile(phase);
    rep.growth = classify_growth(sol);
    rep.in_scope = phase.beta <= 2.0;

    rep.premise_unique = true;
    for (double eps : rep.eps_tried)
        rep.premise_unique = rep.premise_unique && origin_uniqueness_forced(phase, eps);
    rep.premise_divergent = rep.growth.conclusive && rep.growth.model != "convergent";

    if (!rep.growth.conclusive) {
        rep.verdict = "inconclusive";
    } else if (!rep.in_scope) {
        rep.verdict = rep.growth.model == "convergent"
                          ? "outside theorem scope; convergent"
                          : "outside theorem scope; divergent";
    } else if (rep.premise_unique && rep.premise_divergent) {
        rep.certified = true;
        rep.verdict = "nonexistence certified numerically (" + rep.growth.model + " divergence)";
    } else {
        rep.verdict = "inconclusive";
    }
    return rep;
}

}  // namespace lml
