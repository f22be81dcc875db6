#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>

#include "lml/errors.hpp"

namespace lml {

inline constexpr int max_dim = 8;

/// Dense symmetric matrix of order n <= 8, stored row-major without packing.
/// Writes through `set` keep the two mirrored entries identical.
class SymmetricMatrix {
  public:
    SymmetricMatrix() : n_(0) { v_.fill(0.0); }

    explicit SymmetricMatrix(int n) : n_(n) {
        check_order(n);
        v_.fill(0.0);
    }

    static SymmetricMatrix identity(int n) {
        SymmetricMatrix m(n);
        for (int i = 0; i < n; ++i) m.v_[i * n + i] = 1.0;
        return m;
    }

    static SymmetricMatrix diagonal(std::span<const double> d) {
        SymmetricMatrix m(static_cast<int>(d.size()));
        for (int i = 0; i < m.n_; ++i) m.v_[i * m.n_ + i] = d[i];
        return m;
    }

    static SymmetricMatrix diagonal(std::initializer_list<double> d) {
        return diagonal(std::span<const double>(d.begin(), d.size()));
    }

    int order() const { return n_; }

    double operator()(int i, int j) const { return v_[i * n_ + j]; }

    void set(int i, int j, double x) {
        v_[i * n_ + j] = x;
        v_[j * n_ + i] = x;
    }

    void add(int i, int j, double x) {
        v_[i * n_ + j] += x;
        if (i != j) v_[j * n_ + i] += x;
    }

    double trace() const {
        double t = 0.0;
        for (int i = 0; i < n_; ++i) t += v_[i * n_ + i];
        return t;
    }

    /// Largest absolute entry.
    double norm_max() const {
        double m = 0.0;
        for (int i = 0; i < n_ * n_; ++i) m = std::max(m, std::abs(v_[i]));
        return m;
    }

    bool all_finite() const {
        for (int i = 0; i < n_ * n_; ++i)
            if (!std::isfinite(v_[i])) return false;
        return true;
    }

    SymmetricMatrix& operator+=(const SymmetricMatrix& o) {
        for (int i = 0; i < n_ * n_; ++i) v_[i] += o.v_[i];
        return *this;
    }

    SymmetricMatrix& operator*=(double c) {
        for (int i = 0; i < n_ * n_; ++i) v_[i] *= c;
        return *this;
    }

    friend SymmetricMatrix operator+(SymmetricMatrix a, const SymmetricMatrix& b) {
        a += b;
        return a;
    }

    friend SymmetricMatrix operator*(double c, SymmetricMatrix a) {
        a *= c;
        return a;
    }

    /// M*M (symmetric since M is).
    SymmetricMatrix squared() const {
        SymmetricMatrix r(n_);
        for (int i = 0; i < n_; ++i)
            for (int j = i; j < n_; ++j) {
                double s = 0.0;
                for (int k = 0; k < n_; ++k) s += (*this)(i, k) * (*this)(k, j);
                r.set(i, j, s);
            }
        return r;
    }

    /// y = M x.
    void multiply(std::span<const double> x, std::span<double> y) const {
        for (int i = 0; i < n_; ++i) {
            double s = 0.0;
            for (int j = 0; j < n_; ++j) s += v_[i * n_ + j] * x[j];
            y[i] = s;
        }
    }

  private:
    static void check_order(int n) {
        if (n < 1 || n > max_dim)
            throw std::invalid_argument("SymmetricMatrix: order must be in [1," +
                                        std::to_string(max_dim) + "], got " +
                                        std::to_string(n));
    }

    int n_;
    std::array<double, max_dim * max_dim> v_;
};

/// Eigenvalues sorted ascending.
struct Spectrum {
    int n = 0;
    std::array<double, max_dim> values{};

    double min() const { return values[0]; }
    double max() const { return values[n - 1]; }

    double& operator[](int i) { return values[i]; }
    double operator[](int i) const { return values[i]; }
};

/// Spectrum plus orthonormal eigenvectors (columns of `vectors`, same order).
struct EigenDecomposition {
    Spectrum spectrum;
    std::array<double, max_dim * max_dim> vectors{};  // row-major, column k = eigenvector k

    double vec(int row, int col) const { return vectors[row * spectrum.n + col]; }
};

namespace detail {

// Cyclic Jacobi with fixed sweep order.  Off-diagonal elements are annihilated
// until the largest one drops below 1e-13 * max|M_ij| of the input; at most 50
// sweeps.  Deterministic: no pivot searching, order (0,1),(0,2),...,(n-2,n-1).
inline EigenDecomposition jacobi_cyclic(const SymmetricMatrix& m, bool want_vectors) {
    const int n = m.order();
    std::array<double, max_dim * max_dim> a{};
    std::array<double, max_dim * max_dim> q{};
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a[i * n + j] = m(i, j);
    for (int i = 0; i < n; ++i) q[i * n + i] = 1.0;

    const double threshold = 1e-13 * m.norm_max();

    auto max_offdiag = [&]() {
        double mx = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) mx = std::max(mx, std::abs(a[i * n + j]));
        return mx;
    };

    int sweep = 0;
    for (; sweep < 50; ++sweep) {
        if (max_offdiag() <= threshold) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int r = p + 1; r < n; ++r) {
                const double apr = a[p * n + r];
                if (std::abs(apr) <= threshold * 1e-2) continue;
                const double app = a[p * n + p];
                const double arr = a[r * n + r];
                const double tau = (arr - app) / (2.0 * apr);
                // Smaller-magnitude root of t^2 + 2 tau t - 1 = 0.
                double t;
                if (tau >= 0.0)
                    t = 1.0 / (tau + std::sqrt(1.0 + tau * tau));
                else
                    t = -1.0 / (-tau + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                for (int k = 0; k < n; ++k) {
                    const double akp = a[k * n + p];
                    const double akr = a[k * n + r];
                    a[k * n + p] = c * akp - s * akr;
                    a[k * n + r] = s * akp + c * akr;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a[p * n + k];
                    const double ark = a[r * n + k];
                    a[p * n + k] = c * apk - s * ark;
                    a[r * n + k] = s * apk + c * ark;
                }
                if (want_vectors) {
                    for (int k = 0; k < n; ++k) {
                        const double qkp = q[k * n + p];
                        const double qkr = q[k * n + r];
                        q[k * n + p] = c * qkp - s * qkr;
                        q[k * n + r] = s * qkp + c * qkr;
                    }
                }
            }
        }
    }
    if (sweep == 50 && max_offdiag() > threshold)
        throw NumericalError("jacobi_cyclic: no convergence within 50 sweeps");

    EigenDecomposition d;
    d.spectrum.n = n;
    std::array<int, max_dim> perm{};
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (a[perm[j] * n + perm[j]] < a[perm[i] * n + perm[i]])
                std::swap(perm[i], perm[j]);
    for (int i = 0; i < n; ++i) d.spectrum.values[i] = a[perm[i] * n + perm[i]];
    if (want_vectors)
        for (int row = 0; row < n; ++row)
            for (int col = 0; col < n; ++col)
                d.vectors[row * n + col] = q[row * n + perm[col]];
    return d;
}

}  // namespace detail

/// Eigenvalues of a symmetric matrix, ascending.  Throws on non-finite input
/// (std::invalid_argument) or on Jacobi non-convergence (NumericalError).
inline Spectrum eigen_sym(const SymmetricMatrix& m) {
    if (m.order() < 1) throw std::invalid_argument("eigen_sym: empty matrix");
    if (!m.all_finite()) throw std::invalid_argument("eigen_sym: non-finite entry");
    Spectrum s = detail::jacobi_cyclic(m, false).spectrum;
    // Trace consistency guards against a silently broken rotation.
    double sum = 0.0;
    for (int i = 0; i < s.n; ++i) sum += s.values[i];
    const double tr = m.trace();
    if (std::abs(sum - tr) > 1e-9 * std::max(1.0, std::abs(tr)))
        throw InternalError("eigen_sym: eigenvalue sum disagrees with trace");
    return s;
}

/// Full decomposition with eigenvectors.
inline EigenDecomposition eigen_sym_vectors(const SymmetricMatrix& m) {
    if (m.order() < 1) throw std::invalid_argument("eigen_sym_vectors: empty matrix");
    if (!m.all_finite()) throw std::invalid_argument("eigen_sym_vectors: non-finite entry");
    return detail::jacobi_cyclic(m, true);
}

}  // namespace lml
