#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lml/errors.hpp"
#include "lml/linalg.hpp"

namespace lml {

/// Sum of arctangents of a spectrum: f(a) = sum_i arctan(a_i).
inline double phase_of_spectrum(const Spectrum& a) {
    double s = 0.0;
    for (int i = 0; i < a.n; ++i) s += std::atan(a.values[i]);
    return s;
}

/// Phase of a symmetric matrix: sum_i arctan(lambda_i(M)), in (-n pi/2, n pi/2).
inline double phase_value(const SymmetricMatrix& m) {
    return phase_of_spectrum(eigen_sym(m));
}

/// Derivative of phase_value: dF/dM = (I + M^2)^{-1}, computed spectrally so
/// the result is exactly symmetric.  The inversion is certified by the
/// residual ||Phi (I + M^2) - I||_max <= 1e-8.
inline SymmetricMatrix phase_gradient(const SymmetricMatrix& m) {
    const EigenDecomposition d = eigen_sym_vectors(m);
    const int n = m.order();
    SymmetricMatrix phi(n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) {
                const double lk = d.spectrum.values[k];
                s += d.vec(i, k) * d.vec(j, k) / (1.0 + lk * lk);
            }
            phi.set(i, j, s);
        }

    const SymmetricMatrix ipm2 = SymmetricMatrix::identity(n) + m.squared();
    double resid = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) s += phi(i, k) * ipm2(k, j);
            resid = std::max(resid, std::abs(s - (i == j ? 1.0 : 0.0)));
        }
    if (resid > 1e-8)
        throw InternalError("phase_gradient: inversion residual " + std::to_string(resid));
    return phi;
}

/// |g| - (n-2) pi/2.  Positive means supercritical.
inline double supercritical_margin(int n, double g) {
    return std::abs(g) - (n - 2) * std::numbers::pi / 2.0;
}

namespace detail {

inline Spectrum abs_normalized_spectrum(const Spectrum& a, const char* who) {
    if (a.n < 1) throw std::invalid_argument(std::string(who) + ": empty spectrum");
    bool all_pos = true, all_neg = true;
    for (int i = 0; i < a.n; ++i) {
        if (!(a.values[i] > 0.0)) all_pos = false;
        if (!(a.values[i] < 0.0)) all_neg = false;
    }
    if (!all_pos && !all_neg)
        throw std::domain_error(std::string(who) +
                                ": spectrum must be definite (one strict sign)");
    Spectrum b = a;
    if (all_neg) {
        for (int i = 0; i < b.n; ++i) b.values[i] = -b.values[i];
        for (int i = 0, j = b.n - 1; i < j; ++i, --j) std::swap(b.values[i], b.values[j]);
    }
    return b;
}

}  // namespace detail

/// Dispersion ratio M(A) = min_{j,k} (1+a_j^2)/(2 a_k) * sum_i a_i/(1+a_i^2)
/// for a definite spectrum (negative-definite input is negated first).
/// For ascending a the minimum is (1+a_1^2)/(2 a_n) * sum; both forms are
/// computed and must agree to 1e-10.
inline double m_of_a(const Spectrum& spec) {
    const Spectrum a = detail::abs_normalized_spectrum(spec, "m_of_a");
    double sum = 0.0;
    for (int i = 0; i < a.n; ++i) sum += a.values[i] / (1.0 + a.values[i] * a.values[i]);

    double full_min = std::numeric_limits<double>::infinity();
    for (int j = 0; j < a.n; ++j)
        for (int k = 0; k < a.n; ++k) {
            const double c = (1.0 + a.values[j] * a.values[j]) / (2.0 * a.values[k]) * sum;
            full_min = std::min(full_min, c);
        }
    const double closed = (1.0 + a.values[0] * a.values[0]) / (2.0 * a.values[a.n - 1]) * sum;
    if (std::abs(full_min - closed) > 1e-10 * std::max(1.0, std::abs(closed)))
        throw InternalError("m_of_a: min form and sorted closed form disagree");
    return closed;
}

/// Problem data for one phase equation: the quadratic's matrix A (normalized
/// positive-definite), its spectrum, the asymptotic phase g_inf = f(a), the
/// envelope decay order beta, and the cached dispersion ratio M(A).
struct PhaseParams {
    int n = 0;
    SymmetricMatrix A;
    Spectrum a;            // ascending, positive
    double g_inf = 0.0;
    double beta = 0.0;
    double m_a = 0.0;
    bool negated = false;  // input was negative-definite and has been flipped

    double quadratic_s(std::span<const double> x) const {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) s += x[i] * A(i, j) * x[j];
        return 0.5 * s;
    }

    /// Builds and validates.  If g_inf is not supplied it is set to f(a).
    /// Rejects: indefinite A, |f(a) - g_inf| > 1e-10, non-supercritical or
    /// out-of-band g_inf, beta <= 0, n outside [2, 8].
    static PhaseParams make(const SymmetricMatrix& A_in, double beta,
                            std::optional<double> g_inf_in = std::nullopt) {
        PhaseParams p;
        p.n = A_in.order();
        if (p.n < 2 || p.n > max_dim)
            throw std::invalid_argument("PhaseParams: dimension must be in [2,8]");
        if (!(beta > 0.0)) throw std::invalid_argument("PhaseParams: beta must be positive");
        Spectrum raw = eigen_sym(A_in);
        bool all_pos = true, all_neg = true;
        for (int i = 0; i < p.n; ++i) {
            if (!(raw.values[i] > 0.0)) all_pos = false;
            if (!(raw.values[i] < 0.0)) all_neg = false;
        }
        if (!all_pos && !all_neg)
            throw std::invalid_argument("PhaseParams: A must be definite");
        p.negated = all_neg;
        p.A = A_in;
        double g = g_inf_in.value_or(0.0);
        if (p.negated) {
            p.A *= -1.0;
            g = -g;
        }
        p.a = eigen_sym(p.A);
        p.beta = beta;
        const double fa = phase_of_spectrum(p.a);
        p.g_inf = g_inf_in ? g : fa;
        if (std::abs(p.g_inf - fa) > 1e-10)
            throw std::invalid_argument(
                "PhaseParams: g_inf inconsistent with spectrum, f(a) = " + std::to_string(fa) +
                " vs g_inf = " + std::to_string(p.g_inf));
        const double band_hi = p.n * std::numbers::pi / 2.0;
        if (supercritical_margin(p.n, p.g_inf) <= 0.0 || std::abs(p.g_inf) >= band_hi)
            throw std::invalid_argument("PhaseParams: g_inf outside the supercritical band");
        p.m_a = m_of_a(p.a);
        return p;
    }

    static PhaseParams from_spectrum(std::span<const double> diag, double beta,
                                     std::optional<double> g_inf_in = std::nullopt) {
        return make(SymmetricMatrix::diagonal(diag), beta, g_inf_in);
    }
};

inline double supercritical_margin(const PhaseParams& p, double g) {
    return supercritical_margin(p.n, g);
}

}  // namespace lml
