#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "lml/errors.hpp"
#include "lml/linalg.hpp"
#include "lml/phase.hpp"

namespace lml {

namespace detail {

// 18 stencil arms per node: 6 axis steps, then the 12 in-plane diagonal steps
// grouped as 6 lines with two sides each (arm 6+2l is the minus side of line
// l, arm 6+2l+1 the plus side).  Offsets are in grid steps.
inline constexpr std::array<std::array<int, 3>, 18> arm_offsets = {{
    {-1, 0, 0},
    {1, 0, 0},
    {0, -1, 0},
    {0, 1, 0},
    {0, 0, -1},
    {0, 0, 1},
    {-1, -1, 0},
    {1, 1, 0},
    {-1, 1, 0},
    {1, -1, 0},
    {-1, 0, -1},
    {1, 0, 1},
    {-1, 0, 1},
    {1, 0, -1},
    {0, -1, -1},
    {0, 1, 1},
    {0, -1, 1},
    {0, 1, -1},
}};

// Dimension pair coupled by diagonal line l, and the sign of the second
// dimension in its direction vector.
inline constexpr std::array<std::array<int, 2>, 6> line_dims = {{
    {0, 1},
    {0, 1},
    {0, 2},
    {0, 2},
    {1, 2},
    {1, 2},
}};
inline constexpr std::array<int, 6> line_sign = {1, -1, 1, -1, 1, -1};

}  // namespace detail

/// Finite-difference discretization of the ellipsoid D_s = {x : half x^T A x
/// <= s_level}, n = 3 only.  Interior nodes are the unknowns; the Dirichlet
/// datum is the constant s_level imposed at the exact quadric intersection of
/// every stencil arm that leaves the domain (Shortley-Weller).
class EllipsoidGrid {
  public:
    SymmetricMatrix A;
    double s_level = 0.0;
    double h = 0.0;
    std::array<int, 3> ext{};  // box half-extent per axis, in steps

    std::vector<std::array<std::int32_t, 3>> coords;  // interior node steps
    std::vector<double> s_node;                       // s(x) at each node
    // Arm codes: >= 0 is the interior neighbor id; < 0 encodes a clipped arm
    // whose fraction of the full step is thetas[-code-1].
    std::vector<std::array<std::int32_t, 18>> arms;
    std::vector<double> thetas;

    std::size_t size() const { return coords.size(); }

    std::array<double, 3> position(std::size_t p) const {
        return {coords[p][0] * h, coords[p][1] * h, coords[p][2] * h};
    }

    std::int32_t node_at(int i, int j, int k) const {
        if (std::abs(i) > ext[0] || std::abs(j) > ext[1] || std::abs(k) > ext[2]) return -1;
        const std::size_t bi =
            static_cast<std::size_t>(i + ext[0]) * (2 * ext[1] + 1) * (2 * ext[2] + 1) +
            static_cast<std::size_t>(j + ext[1]) * (2 * ext[2] + 1) +
            static_cast<std::size_t>(k + ext[2]);
        return box_[bi];
    }

    double arm_theta(std::int32_t code) const {
        return code >= 0 ? 1.0 : thetas[static_cast<std::size_t>(-code) - 1];
    }

    double boundary_value() const { return s_level; }

    double quadratic_s(const std::array<double, 3>& x) const {
        double s = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) s += x[i] * A(i, j) * x[j];
        return 0.5 * s;
    }

    friend EllipsoidGrid build_grid(const PhaseParams& params, double s_level, double h);

  private:
    std::vector<std::int32_t> box_;  // dense (i,j,k) -> node id map, -1 outside
};

namespace detail {

// Positive root of s(x + theta v) = s_level along the outgoing arm, i.e. of
// (v'Av/2) theta^2 + (x'Av) theta + (s(x) - s_level) = 0 with s(x) < s_level.
// Picks the algebraic branch that avoids cancellation.
inline double quadric_exit(const SymmetricMatrix& A, const std::array<double, 3>& x,
                           const std::array<double, 3>& v, double s_at_x, double s_level) {
    double qa = 0.0, qb = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            qa += v[i] * A(i, j) * v[j];
            qb += x[i] * A(i, j) * v[j];
        }
    qa *= 0.5;
    const double qc = s_at_x - s_level;
    const double disc = std::sqrt(qb * qb - 4.0 * qa * qc);
    return qb > 0.0 ? -2.0 * qc / (qb + disc) : (disc - qb) / (2.0 * qa);
}

}  // namespace detail

/// Classifies the nodes of the uniform grid of spacing h inside the level set
/// s(x) < s_level and precomputes every Shortley-Weller arm.  Nodes closer
/// than 1e-6 of a step to the quadric along any arm are absorbed into the
/// boundary so no stencil weight degenerates.
inline EllipsoidGrid build_grid(const PhaseParams& params, double s_level, double h) {
    if (params.n != 3) throw ConfigError("build_grid: the grid solver is built for n = 3");
    if (!(s_level > 0.0) || !(h > 0.0))
        throw ConfigError("build_grid: s_level and h must be positive");

    EllipsoidGrid g;
    g.A = params.A;
    g.s_level = s_level;
    g.h = h;

    const double r_in = std::sqrt(2.0 * s_level / params.a.max());
    if (std::floor(r_in / h) < 2.0)
        throw ConfigError("build_grid: h too coarse, inscribed ball holds fewer than 5 nodes "
                          "per axis (radius " +
                          std::to_string(r_in) + ", h " + std::to_string(h) + ")");

    // Bounding box from the diagonal of A^{-1}: |x_d| <= sqrt(2 s (A^{-1})_dd).
    const double det = g.A(0, 0) * (g.A(1, 1) * g.A(2, 2) - g.A(1, 2) * g.A(2, 1)) -
                       g.A(0, 1) * (g.A(1, 0) * g.A(2, 2) - g.A(1, 2) * g.A(2, 0)) +
                       g.A(0, 2) * (g.A(1, 0) * g.A(2, 1) - g.A(1, 1) * g.A(2, 0));
    for (int d = 0; d < 3; ++d) {
        const int i = (d + 1) % 3, j = (d + 2) % 3;
        const double cof = g.A(i, i) * g.A(j, j) - g.A(i, j) * g.A(j, i);
        g.ext[d] = static_cast<int>(std::floor(std::sqrt(2.0 * s_level * cof / det) / h)) + 1;
    }

    const std::size_t box_size = static_cast<std::size_t>(2 * g.ext[0] + 1) *
                                 (2 * g.ext[1] + 1) * (2 * g.ext[2] + 1);
    g.box_.assign(box_size, -1);

    auto box_index = [&](int i, int j, int k) {
        return static_cast<std::size_t>(i + g.ext[0]) * (2 * g.ext[1] + 1) * (2 * g.ext[2] + 1) +
               static_cast<std::size_t>(j + g.ext[1]) * (2 * g.ext[2] + 1) +
               static_cast<std::size_t>(k + g.ext[2]);
    };

    // Pass 1: tentative interior set.
    std::vector<std::array<std::int32_t, 3>> tentative;
    for (int i = -g.ext[0]; i <= g.ext[0]; ++i)
        for (int j = -g.ext[1]; j <= g.ext[1]; ++j)
            for (int k = -g.ext[2]; k <= g.ext[2]; ++k) {
                const std::array<double, 3> x{i * h, j * h, k * h};
                if (g.quadratic_s(x) < s_level)
                    tentative.push_back({static_cast<std::int32_t>(i),
                                         static_cast<std::int32_t>(j),
                                         static_cast<std::int32_t>(k)});
            }

    // Pass 2: demote nodes with a degenerate clip fraction on any arm.
    constexpr double theta_min = 1e-6;
    std::vector<char> keep(tentative.size(), 1);
    for (std::size_t p = 0; p < tentative.size(); ++p) {
        const std::array<double, 3> x{tentative[p][0] * h, tentative[p][1] * h,
                                      tentative[p][2] * h};
        const double sx = g.quadratic_s(x);
        for (const auto& off : detail::arm_offsets) {
            const std::array<double, 3> v{off[0] * h, off[1] * h, off[2] * h};
            if (detail::quadric_exit(g.A, x, v, sx, s_level) < theta_min) {
                keep[p] = 0;
                break;
            }
        }
    }

    // Pass 3: final ids, arms, clip fractions.
    for (std::size_t p = 0; p < tentative.size(); ++p) {
        if (!keep[p]) continue;
        g.box_[box_index(tentative[p][0], tentative[p][1], tentative[p][2])] =
            static_cast<std::int32_t>(g.coords.size());
        g.coords.push_back(tentative[p]);
    }
    g.s_node.resize(g.coords.size());
    g.arms.resize(g.coords.size());
    for (std::size_t p = 0; p < g.coords.size(); ++p) {
        const auto x = g.position(p);
        g.s_node[p] = g.quadratic_s(x);
        for (int a = 0; a < 18; ++a) {
            const auto& off = detail::arm_offsets[a];
            const std::int32_t nb =
                g.node_at(g.coords[p][0] + off[0], g.coords[p][1] + off[1],
                          g.coords[p][2] + off[2]);
            if (nb >= 0) {
                g.arms[p][a] = nb;
            } else {
                const std::array<double, 3> v{off[0] * h, off[1] * h, off[2] * h};
                const double theta = detail::quadric_exit(g.A, x, v, g.s_node[p], s_level);
                g.thetas.push_back(theta);
                g.arms[p][a] = -static_cast<std::int32_t>(g.thetas.size());
            }
        }
    }
    return g;
}

/// Visits the linear functional of every Hessian entry at node p: fn(i, j,
/// code, w) with i <= j, where code >= 0 contributes w * u[code] and code < 0
/// contributes w * s_level (clipped arm).  Pure second derivatives come from
/// the axis arms, mixed ones from half the difference of the two diagonal
/// directional second derivatives; both reduce to the classical central and
/// 4-point cross stencils on unclipped nodes and stay exact on quadratics on
/// clipped ones.
template <typename Fn>
inline void hessian_weights(const EllipsoidGrid& g, std::size_t p, Fn&& fn) {
    const double inv_h2 = 1.0 / (g.h * g.h);
    const std::int32_t self = static_cast<std::int32_t>(p);
    const auto& arm = g.arms[p];
    for (int d = 0; d < 3; ++d) {
        const std::int32_t cm = arm[2 * d], cp = arm[2 * d + 1];
        const double tm = g.arm_theta(cm), tp = g.arm_theta(cp);
        const double denom = inv_h2 * 2.0 / (tp + tm);
        fn(d, d, cp, denom / tp);
        fn(d, d, cm, denom / tm);
        fn(d, d, self, -2.0 * inv_h2 / (tp * tm));
    }
    for (int l = 0; l < 6; ++l) {
        const std::int32_t cm = arm[6 + 2 * l], cp = arm[6 + 2 * l + 1];
        const double tm = g.arm_theta(cm), tp = g.arm_theta(cp);
        // factor: (+-1/2) of the directional second derivative, whose step
        // length squared is 2 h^2.
        const double f = detail::line_sign[l] * 0.5 * inv_h2 * 0.5;
        const int i = detail::line_dims[l][0], j = detail::line_dims[l][1];
        const double denom = f * 2.0 / (tp + tm);
        fn(i, j, cp, denom / tp);
        fn(i, j, cm, denom / tm);
        fn(i, j, self, -2.0 * f / (tp * tm));
    }
}

/// Discrete Hessian at interior node p; second order on full stencils, first
/// order on clipped ones, exact on quadratics everywhere.
inline SymmetricMatrix discrete_hessian(std::span<const double> u, const EllipsoidGrid& g,
                                        std::size_t p) {
    SymmetricMatrix m(3);
    hessian_weights(g, p, [&](int i, int j, std::int32_t code, double w) {
        m.add(i, j, w * (code >= 0 ? u[static_cast<std::size_t>(code)] : g.boundary_value()));
    });
    return m;
}

/// Trilinear interpolation of nodal values at an arbitrary point whose cell
/// lies fully inside the grid.
inline double trilinear(const EllipsoidGrid& g, std::span<const double> u,
                        const std::array<double, 3>& x) {
    std::array<int, 3> base;
    std::array<double, 3> frac;
    for (int d = 0; d < 3; ++d) {
        const double c = x[d] / g.h;
        base[d] = static_cast<int>(std::floor(c));
        frac[d] = c - base[d];
    }
    double val = 0.0;
    for (int di = 0; di < 2; ++di)
        for (int dj = 0; dj < 2; ++dj)
            for (int dk = 0; dk < 2; ++dk) {
                const std::int32_t id =
                    g.node_at(base[0] + di, base[1] + dj, base[2] + dk);
                if (id < 0)
                    throw std::domain_error("trilinear: interpolation cell touches the boundary");
                const double w = (di ? frac[0] : 1.0 - frac[0]) * (dj ? frac[1] : 1.0 - frac[1]) *
                                 (dk ? frac[2] : 1.0 - frac[2]);
                val += w * u[static_cast<std::size_t>(id)];
            }
    return val;
}

}  // namespace lml
