#pragma once

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lml/barrier.hpp"
#include "lml/envelope.hpp"
#include "lml/errors.hpp"
#include "lml/grid3d.hpp"
#include "lml/implicit.hpp"
#include "lml/interp.hpp"
#include "lml/ode.hpp"
#include "lml/phase.hpp"
#include "lml/regression.hpp"

namespace lml {

struct NewtonOptions {
    double tol = 1e-8;
    int max_iters = 50;
    int max_halvings = 30;
    double linear_tol = 1e-10;
    // Fallback iterate tried once if a damped step cannot decrease the
    // residual (e.g. the barrier midpoint); empty disables the restart.
    std::vector<double> restart_iterate;
};

struct GridSolution {
    EllipsoidGrid grid;
    std::vector<double> u;
    int newton_iters = 0;
    double final_residual = 0.0;
    std::vector<double> residual_history;
};

namespace detail {

template <typename GFn>
inline std::vector<double> phase_data_on_grid(const EllipsoidGrid& g, GFn&& gfun) {
    const double cap = g.A.order() * M_PI / 2.0;
    std::vector<double> out(g.size());
    for (std::size_t p = 0; p < g.size(); ++p) {
        const auto x = g.position(p);
        const double gp = gfun(x);
        if (!(supercritical_margin(3, gp) > 0.0) || !(std::fabs(gp) < cap))
            throw ConfigError("newton_solve: phase not supercritical at node (" +
                              std::to_string(x[0]) + ", " + std::to_string(x[1]) + ", " +
                              std::to_string(x[2]) + "): g = " + std::to_string(gp));
        out[p] = gp;
    }
    return out;
}

inline double grid_residual(const EllipsoidGrid& g, std::span<const double> u,
                            std::span<const double> g_node, std::vector<double>& r) {
    r.resize(g.size());
    double rn = 0.0;
    for (std::size_t p = 0; p < g.size(); ++p) {
        r[p] = phase_value(discrete_hessian(u, g, p)) - g_node[p];
        rn = std::max(rn, std::fabs(r[p]));
    }
    return rn;
}

// Krylov solve with escalating preconditioning; direct factorization is the
// last resort for small systems.  `level` remembers the cheapest backend that
// worked so later Newton steps skip the failed ones.
inline void solve_linear(const Eigen::SparseMatrix<double, Eigen::RowMajor>& J,
                         const Eigen::VectorXd& rhs, Eigen::VectorXd& delta, double tol,
                         int& level) {
    const auto N = J.rows();
    if (level <= 0) {
        Eigen::BiCGSTAB<Eigen::SparseMatrix<double, Eigen::RowMajor>> solver;
        solver.setTolerance(tol);
        solver.setMaxIterations(4000);
        solver.compute(J);
        delta = solver.solve(rhs);
        if (solver.info() == Eigen::Success && delta.allFinite()) return;
        level = 1;
    }
    if (level <= 1) {
        Eigen::BiCGSTAB<Eigen::SparseMatrix<double, Eigen::RowMajor>,
                        Eigen::IncompleteLUT<double>>
            solver;
        solver.preconditioner().setDroptol(1e-6);
        solver.preconditioner().setFillfactor(30);
        solver.setTolerance(tol);
        solver.setMaxIterations(2000);
        solver.compute(J);
        delta = solver.solve(rhs);
        if (solver.info() == Eigen::Success && delta.allFinite()) return;
        level = 2;
    }
    if (N <= 30000) {
        Eigen::SparseMatrix<double> Jc = J;  // SparseLU wants column-major
        Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
        solver.compute(Jc);
        if (solver.info() == Eigen::Success) {
            delta = solver.solve(rhs);
            if (delta.allFinite()) return;
        }
    }
    throw NumericalError("newton_solve: linear solver failed to reach relative residual " +
                         std::to_string(tol) + " (N = " + std::to_string(N) + ")");
}

inline std::string history_string(const std::vector<double>& hist) {
    std::string s;
    for (double v : hist) {
        if (!s.empty()) s += ", ";
        s += std::to_string(v);
    }
    return s;
}

}  // namespace detail

/// Damped Newton for the discrete Dirichlet problem F(D^2 u) = g on the
/// ellipsoid grid, boundary datum s_level at the clipped quadric.  The
/// Jacobian row at node p contracts the arctan-sum gradient at the current
/// discrete Hessian with the stencil weights.  Accepts only iterates that
/// strictly decrease the max-norm residual; one restart iterate may be tried
/// before giving up.
template <typename GFn>
inline GridSolution newton_solve(EllipsoidGrid grid, GFn&& gfun, NewtonOptions opts = {},
                                 std::span<const double> u_init = {}) {
    const std::size_t N = grid.size();
    const std::vector<double> g_node = detail::phase_data_on_grid(grid, gfun);

    GridSolution sol;
    sol.u = u_init.empty() ? grid.s_node : std::vector<double>(u_init.begin(), u_init.end());
    if (sol.u.size() != N)
        throw ConfigError("newton_solve: initial iterate has " + std::to_string(sol.u.size()) +
                          " values for " + std::to_string(N) + " nodes");

    std::vector<double> r, r_trial, u_trial(N);
    double rn = detail::grid_residual(grid, sol.u, g_node, r);
    sol.residual_history.push_back(rn);

    Eigen::SparseMatrix<double, Eigen::RowMajor> J(static_cast<Eigen::Index>(N),
                                                   static_cast<Eigen::Index>(N));
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(N)), delta;
    int level = 0;
    bool restarted = opts.restart_iterate.empty();

    int it = 0;
    for (; it < opts.max_iters && rn > opts.tol; ++it) {
        J.setZero();
        J.reserve(Eigen::VectorXi::Constant(static_cast<Eigen::Index>(N), 19));
        for (std::size_t p = 0; p < N; ++p) {
            const SymmetricMatrix G = phase_gradient(discrete_hessian(sol.u, grid, p));
            // accumulate per-column coefficients; a row touches <= 19 nodes
            std::array<std::int32_t, 19> cols;
            std::array<double, 19> coef;
            int ncols = 0;
            hessian_weights(grid, p, [&](int i, int j, std::int32_t code, double w) {
                if (code < 0) return;  // clipped arm: constant datum, no unknown
                const double cval = (i == j ? G(i, i) : 2.0 * G(i, j)) * w;
                for (int q = 0; q < ncols; ++q)
                    if (cols[q] == code) {
                        coef[q] += cval;
                        return;
                    }
                cols[ncols] = code;
                coef[ncols] = cval;
                ++ncols;
            });
            for (int q = 0; q < ncols; ++q)
                J.insert(static_cast<Eigen::Index>(p), cols[q]) = coef[q];
            rhs[static_cast<Eigen::Index>(p)] = -r[p];
        }
        J.makeCompressed();
        detail::solve_linear(J, rhs, delta, opts.linear_tol, level);

        double alpha = 1.0;
        bool accepted = false;
        for (int halve = 0; halve <= opts.max_halvings; ++halve) {
            for (std::size_t p = 0; p < N; ++p)
                u_trial[p] = sol.u[p] + alpha * delta[static_cast<Eigen::Index>(p)];
            const double rn_trial = detail::grid_residual(grid, u_trial, g_node, r_trial);
            if (rn_trial < rn) {
                sol.u.swap(u_trial);
                r.swap(r_trial);
                rn = rn_trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            if (!restarted) {
                restarted = true;
                if (opts.restart_iterate.size() != N)
                    throw ConfigError("newton_solve: restart iterate size mismatch");
                sol.u = opts.restart_iterate;
                rn = detail::grid_residual(grid, sol.u, g_node, r);
                sol.residual_history.push_back(rn);
                continue;
            }
            throw NumericalError(
                "newton_solve: stalled, no damped step decreases the residual; history: " +
                detail::history_string(sol.residual_history));
        }
        sol.residual_history.push_back(rn);
    }

    if (rn > opts.tol)
        throw NumericalError("newton_solve: no convergence in " + std::to_string(opts.max_iters) +
                             " iterations; history: " +
                             detail::history_string(sol.residual_history));

    sol.final_residual = detail::grid_residual(grid, sol.u, g_node, r);
    sol.newton_iters = it;
    sol.grid = std::move(grid);
    return sol;
}

namespace detail {

// Scalar t with A = t I, or a ConfigError.
inline double iso_scale(const SymmetricMatrix& A, const char* who) {
    const double t = A(0, 0);
    const double tol = 1e-12 * std::max(1.0, std::fabs(t));
    for (int i = 0; i < A.order(); ++i)
        for (int j = 0; j < A.order(); ++j)
            if (std::fabs(A(i, j) - (i == j ? t : 0.0)) > tol)
                throw ConfigError(std::string(who) + ": A must be a positive multiple of the "
                                                     "identity for the radial reduction");
    return t;
}

}  // namespace detail

/// Radial solution on the ball s <= s_level for A = t I: W(r) = U'(r)/r obeys
/// arctan(W + r W') + (n-1) arctan(W) = G(r), regular at the origin with
/// W(0) = tan(G(0)/n).  Integrates the deviation phi = W - t and its moment
/// D(r) = int_0^r tau phi dtau jointly, so u(r) = t r^2/2 + D(r) - D(R)
/// carries no large-term cancellation.
struct RadialReduction {
    double t = 0.0;
    double s_level = 0.0;
    double R = 0.0;
    std::vector<double> r;     // nodes, r[0] = 0
    std::vector<double> w;     // W at nodes
    std::vector<double> dev;   // W - t
    std::vector<double> D;     // deviation moment at nodes
    double D_R = 0.0;
    PchipInterpolant D_interp;

    double deviation_integral(double rr) const { return D_interp(rr); }
    double eval(double rr) const { return 0.5 * t * rr * rr + D_interp(rr) - D_R; }
};

template <typename GFn>
inline RadialReduction radial_reduction_solve(const PhaseParams& params, GFn&& G,
                                             double s_level) {
    const int n = params.n;
    const double t = detail::iso_scale(params.A, "radial_reduction_solve");
    if (!(s_level > 0.0)) throw ConfigError("radial_reduction_solve: s_level must be positive");

    RadialReduction sol;
    sol.t = t;
    sol.s_level = s_level;
    sol.R = std::sqrt(2.0 * s_level / t);

    const double G0 = G(0.0);
    const double cap = n * M_PI / 2.0;
    if (!(supercritical_margin(n, G0) > 0.0) || !(std::fabs(G0) < cap))
        throw ConfigError("radial_reduction_solve: phase not supercritical at the origin: G(0) = " +
                          std::to_string(G0));

    const double w_c = std::tan(G0 / n);
    const double fd = 1e-3 * std::min(1.0, sol.R);
    const double gpp0 = 2.0 * (G(fd) - G0) / (fd * fd);  // radial symmetry: G'(0) = 0
    const double w2 = gpp0 * (1.0 + w_c * w_c) / (2.0 * (n + 2));
    const double eps = std::min(1e-6, 1e-6 * sol.R);

    std::vector<double> nodes;
    if (sol.R <= 1e3) {
        const int m = 2000;
        nodes.resize(m);
        for (int i = 0; i < m; ++i) nodes[i] = eps + (sol.R - eps) * i / (m - 1);
    } else {
        for (int i = 0; i < 400; ++i) nodes.push_back(eps + (2.0 - eps) * i / 399);
        const double decades = std::log10(sol.R / 2.0);
        const int m = static_cast<int>(std::ceil(120.0 * decades));
        for (int i = 1; i <= m; ++i) nodes.push_back(2.0 * std::pow(10.0, decades * i / m));
        nodes.back() = sol.R;
    }
    for (double rr : nodes)
        if (!(supercritical_margin(n, G(rr)) > 0.0) || !(std::fabs(G(rr)) < cap))
            throw ConfigError("radial_reduction_solve: phase not supercritical at r = " +
                              std::to_string(rr));

    auto rhs = [&](double rr, const std::array<double, 2>& y, std::array<double, 2>& dy) {
        const double phi = y[0];
        const double eps_t = (G(rr) - params.g_inf) - (n - 1) * detail::atan_diff(t, phi);
        const double te = std::tan(eps_t);
        const double den = 1.0 - t * te;
        if (!(den > 0.0))
            throw NumericalError("radial_reduction_solve: phase angle left the principal "
                                 "branch at r = " + std::to_string(rr));
        const double N = (1.0 + t * t) * te / den - phi;
        dy[0] = N / rr;
        dy[1] = rr * phi;
    };

    const std::array<double, 2> y0{w_c - t + w2 * eps * eps,
                                   0.5 * (w_c - t) * eps * eps + 0.25 * w2 * eps * eps * eps * eps};

    sol.r.reserve(nodes.size() + 1);
    sol.dev.reserve(nodes.size() + 1);
    sol.D.reserve(nodes.size() + 1);
    sol.r.push_back(0.0);
    sol.dev.push_back(w_c - t);
    sol.D.push_back(0.0);
    integrate_rk45<2>(rhs, nodes, y0, 1e-14, 1e-10,
                      [&](std::size_t, double rr, const std::array<double, 2>& y) {
                          sol.r.push_back(rr);
                          sol.dev.push_back(y[0]);
                          sol.D.push_back(y[1]);
                      });
    sol.w.resize(sol.r.size());
    for (std::size_t i = 0; i < sol.r.size(); ++i) sol.w[i] = t + sol.dev[i];
    sol.D_R = sol.D.back();
    sol.D_interp = PchipInterpolant(sol.r, sol.D);
    return sol;
}

/// Nodewise verification of the uniform barrier sandwich: with the unshifted
/// profiles I(s) = int_0^s (W - 1), beta_minus = inf(-I_sub) and beta_plus =
/// sup(-I_sup) over the tabulated range, the solution must satisfy
/// q + I_sub + beta_minus <= u <= q + I_sup + beta_plus and |u - q| <= C1,
/// all up to tol = 10 h^2 + 1e-6.
struct SandwichReport {
    double beta_minus = 0.0;
    double beta_plus = 0.0;
    double c1 = 0.0;
    double tol = 0.0;
    double h = 0.0;
    double worst_lower = 0.0;  // min margin of the lower bound; >= -tol for ok
    double worst_upper = 0.0;  // min margin of the upper bound
    double worst_abs = 0.0;    // max |u - q|
    std::size_t worst_node = 0;
    bool ok = false;
};

inline SandwichReport sandwich_check(const GridSolution& sol, const BarrierFunction& sub,
                                     const BarrierFunction& sup) {
    SandwichReport rep;
    rep.h = sol.grid.h;
    rep.tol = 10.0 * rep.h * rep.h + 1e-6;

    rep.beta_minus = 0.0;
    rep.beta_plus = 0.0;
    for (int i = 0; i <= 600; ++i) {
        const double s = i == 0 ? 0.0 : std::pow(10.0, -3.0 + 12.0 * (i - 1) / 599.0);
        rep.beta_minus = std::min(rep.beta_minus, -sub.profile.eval_integral(s));
        rep.beta_plus = std::max(rep.beta_plus, -sup.profile.eval_integral(s));
    }
    rep.c1 = std::max(std::fabs(rep.beta_minus), std::fabs(rep.beta_plus)) + rep.tol;

    rep.worst_lower = rep.worst_upper = std::numeric_limits<double>::infinity();
    rep.worst_abs = 0.0;
    for (std::size_t p = 0; p < sol.grid.size(); ++p) {
        const double q = sol.grid.s_node[p];
        const double du = sol.u[p] - q;
        const double ml = du - sub.profile.eval_integral(q) - rep.beta_minus;
        const double mu = sup.profile.eval_integral(q) + rep.beta_plus - du;
        if (ml < rep.worst_lower || mu < rep.worst_upper) rep.worst_node = p;
        rep.worst_lower = std::min(rep.worst_lower, ml);
        rep.worst_upper = std::min(rep.worst_upper, mu);
        rep.worst_abs = std::max(rep.worst_abs, std::fabs(du));
    }
    rep.ok = rep.worst_lower >= -rep.tol && rep.worst_upper >= -rep.tol &&
             rep.worst_abs <= rep.c1;
    return rep;
}

/// Convergence study of the Dirichlet family toward the entire solution:
/// solves on each level, measures Cauchy differences at fixed probe points,
/// and (for A = t I) fits the far-field decay of the deviation from the
/// quadratic on the radial reduction, where radii up to 1e3 are reachable.
struct LimitStudyOptions {
    double h_fine = 1.0 / 16;
    double h_coarse = 1.0 / 8;
    double h_switch_level = 4.0;  // levels above this use h_coarse
    NewtonOptions newton;
    double far_radius = 1e8;
    double ref_radius = 1e6;
    double fit_lo = 10.0;
    double fit_hi = 1e3;
};

struct LimitStudyReport {
    std::vector<double> s_levels;
    std::vector<double> h_used;
    std::vector<double> cauchy;  // max probe difference between consecutive levels
    bool cauchy_monotone = true;
    double c_inf = 0.0;
    bool far_field_fitted = false;
    RateFit far_fit;
    double far_target = 0.0;  // expected decay exponent min(beta, n) - 2
};

inline const std::array<std::array<double, 3>, 14>& probe_directions() {
    static const std::array<std::array<double, 3>, 14> dirs = [] {
        std::array<std::array<double, 3>, 14> d{};
        for (int i = 0; i < 3; ++i) {
            d[2 * i][i] = 1.0;
            d[2 * i + 1][i] = -1.0;
        }
        const double c = 1.0 / std::sqrt(3.0);
        int k = 6;
        for (int sx : {-1, 1})
            for (int sy : {-1, 1})
                for (int sz : {-1, 1}) d[k++] = {sx * c, sy * c, sz * c};
        return d;
    }();
    return dirs;
}

inline LimitStudyReport entire_limit_study(const PhaseParams& params,
                                           const PhaseEnvelope& envelope,
                                           std::span<const double> s_levels,
                                           std::span<const double> probe_radii,
                                           const LimitStudyOptions& opts = {}) {
    if (s_levels.size() < 2)
        throw ConfigError("entire_limit_study: need at least two s_levels");
    for (std::size_t i = 1; i < s_levels.size(); ++i)
        if (!(s_levels[i] > s_levels[i - 1]))
            throw ConfigError("entire_limit_study: s_levels must be increasing");

    std::vector<std::array<double, 3>> probes;
    for (double rr : probe_radii)
        for (const auto& d : probe_directions())
            probes.push_back({rr * d[0], rr * d[1], rr * d[2]});
    for (const auto& x : probes)
        if (!(params.quadratic_s(x) <= 0.8 * s_levels[0]))
            throw ConfigError("entire_limit_study: probe not well inside the smallest domain");

    LimitStudyReport rep;
    rep.s_levels.assign(s_levels.begin(), s_levels.end());

    auto gfun = [&](const std::array<double, 3>& x) {
        return envelope.family_g(params.quadratic_s(x));
    };

    std::vector<std::vector<double>> probe_vals;
    for (double s : s_levels) {
        const double h = s <= opts.h_switch_level ? opts.h_fine : opts.h_coarse;
        rep.h_used.push_back(h);
        GridSolution sol = newton_solve(build_grid(params, s, h), gfun, opts.newton);
        std::vector<double> vals(probes.size());
        for (std::size_t i = 0; i < probes.size(); ++i)
            vals[i] = trilinear(sol.grid, sol.u, probes[i]);
        probe_vals.push_back(std::move(vals));
    }
    for (std::size_t i = 1; i < probe_vals.size(); ++i) {
        double d = 0.0;
        for (std::size_t k = 0; k < probes.size(); ++k)
            d = std::max(d, std::fabs(probe_vals[i][k] - probe_vals[i - 1][k]));
        rep.cauchy.push_back(d);
    }
    for (std::size_t i = 1; i < rep.cauchy.size(); ++i)
        if (rep.cauchy[i] > rep.cauchy[i - 1]) rep.cauchy_monotone = false;

    // Far field on the radial reduction; the 3-D grid cannot reach radius 1e3.
    bool radial_ok = true;
    double t = 0.0;
    try {
        t = detail::iso_scale(params.A, "entire_limit_study");
    } catch (const ConfigError&) {
        radial_ok = false;
    }
    if (radial_ok) {
        auto G = [&](double rr) { return envelope.family_g(0.5 * t * rr * rr); };
        const RadialReduction far =
            radial_reduction_solve(params, G, 0.5 * t * opts.far_radius * opts.far_radius);
        const double D_ref = far.deviation_integral(opts.ref_radius);
        rep.c_inf = D_ref - far.D_R;

        std::vector<double> lt, ly;
        double peak = 0.0;
        for (std::size_t i = 0; i < far.r.size(); ++i) {
            if (far.r[i] < opts.fit_lo || far.r[i] > opts.fit_hi) continue;
            const double signal = std::fabs(far.D[i] - D_ref);
            peak = std::max(peak, signal);
            if (signal > 0.0) {
                lt.push_back(std::log(far.r[i]));
                ly.push_back(std::log(signal));
            }
        }
        rep.far_target = std::min(params.beta, static_cast<double>(params.n)) - 2.0;
        if (peak > 1e-12) {
            const bool try_log = std::fabs(params.beta - params.n) < 0.05;
            rep.far_fit = fit_rate_loglog(lt, ly, try_log, opts.fit_lo, opts.fit_hi);
            rep.far_field_fitted = true;
        }
    }
    return rep;
}

}  // namespace lml
