#pragma once

// Test-only oracles, kept deliberately independent of the library's
// algorithms: eigenvalues by Gershgorin bracketing plus inertia bisection
// (LDL^T pivot signs), derivatives by central differences.

#include <array>
#include <cmath>
#include <vector>

#include "lml/linalg.hpp"

namespace oracle {

// Number of eigenvalues of m strictly below x, via the inertia of m - x I
// computed from symmetric Gaussian elimination without pivoting; x is nudged
// when a pivot degenerates.
inline int count_below(const lml::SymmetricMatrix& m, double x) {
    const int n = m.order();
    for (int attempt = 0; attempt < 8; ++attempt) {
        std::array<double, lml::max_dim * lml::max_dim> a{};
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) a[i * n + j] = m(i, j) - (i == j ? x : 0.0);
        bool degenerate = false;
        int negatives = 0;
        for (int k = 0; k < n && !degenerate; ++k) {
            const double piv = a[k * n + k];
            if (std::abs(piv) < 1e-13 * std::max(1.0, m.norm_max())) {
                degenerate = true;
                break;
            }
            if (piv < 0.0) ++negatives;
            for (int i = k + 1; i < n; ++i) {
                const double f = a[i * n + k] / piv;
                for (int j = k; j < n; ++j) a[i * n + j] -= f * a[k * n + j];
            }
        }
        if (!degenerate) return negatives;
        x += 3e-11 * std::max(1.0, m.norm_max());
    }
    return -1;  // caller treats as failure
}

// All eigenvalues by bisection on the inertia count, to absolute width tol.
inline std::vector<double> eigenvalues_bisect(const lml::SymmetricMatrix& m,
                                              double tol = 1e-11) {
    const int n = m.order();
    double radius = 0.0;
    for (int i = 0; i < n; ++i) {
        double row = 0.0;
        for (int j = 0; j < n; ++j) row += std::abs(m(i, j));
        radius = std::max(radius, row);
    }
    radius += 1.0;
    std::vector<double> out(n);
    for (int k = 0; k < n; ++k) {
        double lo = -radius, hi = radius;
        while (hi - lo > tol) {
            const double mid = 0.5 * (lo + hi);
            const int c = count_below(m, mid);
            if (c < 0) {  // degenerate pivot chain; widen marginally and retry
                lo -= tol;
                continue;
            }
            if (c <= k)
                lo = mid;
            else
                hi = mid;
        }
        out[k] = 0.5 * (lo + hi);
    }
    return out;
}

// Central difference d/dt f(t) with step h.
template <class F>
double central_diff(F&& f, double t, double h) {
    return (f(t + h) - f(t - h)) / (2.0 * h);
}

}  // namespace oracle
