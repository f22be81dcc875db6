#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "lml/grid3d.hpp"
#include "lml/newton_fd.hpp"

using namespace lml;
using std::numbers::pi;

namespace {

PhaseParams iso3(double beta) {
    const std::vector<double> d{1.0, 1.0, 1.0};
    return PhaseParams::from_spectrum(d, beta);
}

PhaseParams diag123(double beta) {
    return PhaseParams::make(SymmetricMatrix::diagonal({1.0, 2.0, 3.0}), beta, pi);
}

double norm4(const std::array<double, 3>& x) {
    const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    return r2 * r2;
}

// max |u - v| over nodes the coarse grid shares with the h/2 refinement
double refine_diff(const GridSolution& coarse, const GridSolution& fine) {
    double d = 0.0;
    std::size_t common = 0;
    for (std::size_t p = 0; p < coarse.grid.size(); ++p) {
        const auto& c = coarse.grid.coords[p];
        const std::int32_t q = fine.grid.node_at(2 * c[0], 2 * c[1], 2 * c[2]);
        if (q < 0) continue;
        ++common;
        d = std::max(d, std::fabs(coarse.u[p] - fine.u[static_cast<std::size_t>(q)]));
    }
    REQUIRE(common > coarse.grid.size() / 2);
    return d;
}

}  // namespace

TEST_CASE("grid node count matches the ball volume") {
    const auto params = iso3(4.0);
    const auto g = build_grid(params, 0.5, 1.0 / 8);
    const double vol = g.size() * std::pow(g.h, 3);
    CHECK(std::fabs(vol - 4.0 * pi / 3.0) < 0.1 * 4.0 * pi / 3.0);
    for (double s : g.s_node) CHECK(s < 0.5);
}

TEST_CASE("grid rejects a spacing too coarse for the inscribed ball") {
    const auto params = iso3(4.0);
    CHECK_THROWS_AS(build_grid(params, 0.5, 0.6), ConfigError);
    CHECK_THROWS_AS(build_grid(params, 0.5, -0.1), ConfigError);
}

TEST_CASE("clipped arms terminate on the quadric") {
    const auto params = diag123(4.0);
    const auto g = build_grid(params, 1.0, 1.0 / 8);
    double worst = 0.0;
    std::size_t nclip = 0;
    for (std::size_t p = 0; p < g.size(); ++p) {
        const auto x = g.position(p);
        for (int a = 0; a < 18; ++a) {
            const auto code = g.arms[p][a];
            if (code >= 0) continue;
            ++nclip;
            const double th = g.arm_theta(code);
            CHECK(th >= 1e-6);
            std::array<double, 3> y;
            for (int d = 0; d < 3; ++d) y[d] = x[d] + th * detail::arm_offsets[a][d] * g.h;
            worst = std::max(worst, std::fabs(g.quadratic_s(y) - g.s_level));
        }
    }
    CHECK(nclip > 0);
    CHECK(worst < 1e-12);
}

TEST_CASE("discrete Hessian is exact on the domain quadratic") {
    const auto params = diag123(4.0);
    const auto g = build_grid(params, 1.0, 1.0 / 8);
    // u = s(x) has boundary value exactly s_level at every clip point, so the
    // clipped stencils are exercised too.
    double worst = 0.0;
    for (std::size_t p = 0; p < g.size(); ++p) {
        const auto m = discrete_hessian(g.s_node, g, p);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) worst = std::max(worst, std::fabs(m(i, j) - g.A(i, j)));
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("discrete Hessian isolates a mixed second derivative") {
    const auto params = iso3(4.0);
    const auto g = build_grid(params, 0.5, 1.0 / 8);
    std::vector<double> u(g.size());
    for (std::size_t p = 0; p < g.size(); ++p) {
        const auto x = g.position(p);
        u[p] = x[0] * x[1];
    }
    std::size_t tested = 0;
    for (std::size_t p = 0; p < g.size(); ++p) {
        bool full = true;
        for (int a = 0; a < 18; ++a) full = full && g.arms[p][a] >= 0;
        if (!full) continue;
        ++tested;
        const auto m = discrete_hessian(u, g, p);
        CHECK(std::fabs(m(0, 1) - 1.0) < 1e-10);
        CHECK(std::fabs(m(0, 0)) < 1e-10);
        CHECK(std::fabs(m(1, 2)) < 1e-10);
        CHECK(std::fabs(m(2, 2)) < 1e-10);
    }
    REQUIRE(tested > 100);
}

TEST_CASE("discrete Hessian is second order on a quartic") {
    const auto params = iso3(4.0);
    const SymmetricMatrix exact = [] {
        // D^2 |x|^4 = 4 |x|^2 I + 8 x x^T at x = (0.3, 0, 0)
        SymmetricMatrix m(3);
        m.set(0, 0, 4 * 0.09 + 8 * 0.09);
        m.set(1, 1, 4 * 0.09);
        m.set(2, 2, 4 * 0.09);
        return m;
    }();
    auto frob_err = [&](double h, int steps) {
        const auto g = build_grid(params, 0.06, h);
        std::vector<double> u(g.size());
        for (std::size_t p = 0; p < g.size(); ++p) u[p] = norm4(g.position(p));
        const std::int32_t id = g.node_at(steps, 0, 0);
        REQUIRE(id >= 0);
        const auto m = discrete_hessian(u, g, static_cast<std::size_t>(id));
        double e = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) e = std::max(e, std::fabs(m(i, j) - exact(i, j)));
        return e;
    };
    const double e1 = frob_err(0.02, 15);
    const double e2 = frob_err(0.01, 30);
    CHECK(e2 < 1e-3);
    CHECK(e1 / e2 > 3.0);  // order two in h
}

TEST_CASE("constant phase converges immediately to the quadratic") {
    const auto params = diag123(4.0);
    const auto sol = newton_solve(build_grid(params, 1.0, 1.0 / 8),
                                  [](const std::array<double, 3>&) { return pi; });
    CHECK(sol.newton_iters <= 2);
    CHECK(sol.final_residual <= 1e-8);
    double worst = 0.0;
    for (std::size_t p = 0; p < sol.grid.size(); ++p)
        worst = std::max(worst, std::fabs(sol.u[p] - sol.grid.s_node[p]));
    CHECK(worst < 1e-10);
}

TEST_CASE("phase outside the supercritical band is a configuration error") {
    const auto params = diag123(4.0);
    auto grid = [&] { return build_grid(params, 1.0, 1.0 / 8); };
    CHECK_THROWS_AS(newton_solve(grid(), [](const std::array<double, 3>&) { return 1.4; }),
                    ConfigError);
    CHECK_THROWS_AS(newton_solve(grid(), [](const std::array<double, 3>&) { return -1.5; }),
                    ConfigError);
    CHECK_THROWS_AS(newton_solve(grid(), [](const std::array<double, 3>&) { return 4.8; }),
                    ConfigError);
}

TEST_CASE("slow-decay family matches the radial oracle") {
    const auto params = iso3(4.0);
    const auto env = build_envelopes(params, 0.1);
    const double h = 1.0 / 8;
    const auto sol = newton_solve(build_grid(params, 1.0, h), [&](const std::array<double, 3>& x) {
        return env.family_g(params.quadratic_s(x));
    });
    CHECK(sol.final_residual <= 1e-8);
    for (std::size_t i = 1; i < sol.residual_history.size(); ++i)
        CHECK(sol.residual_history[i] < sol.residual_history[i - 1]);

    const auto oracle = radial_reduction_solve(
        params, [&](double r) { return env.family_g(0.5 * r * r); }, 1.0);
    double worst = 0.0;
    for (std::size_t p = 0; p < sol.grid.size(); ++p) {
        const auto x = sol.grid.position(p);
        const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
        worst = std::max(worst, std::fabs(sol.u[p] - oracle.eval(r)));
    }
    CHECK(worst <= 20.0 * h * h);
}

TEST_CASE("refinement contracts the solution difference") {
    const auto params = iso3(4.0);
    const auto env = build_envelopes(params, 0.1);
    auto solve = [&](double h) {
        return newton_solve(build_grid(params, 2.0, h), [&](const std::array<double, 3>& x) {
            return env.family_g(params.quadratic_s(x));
        });
    };
    const auto s4 = solve(1.0 / 4);
    const auto s8 = solve(1.0 / 8);
    const auto s16 = solve(1.0 / 16);
    const double d1 = refine_diff(s4, s8);
    const double d2 = refine_diff(s8, s16);
    CHECK(d2 > 0.0);
    CHECK(d1 / d2 >= 3.0);
}

TEST_CASE("discrete comparison between envelope phases") {
    const auto params = iso3(4.0);
    const auto env = build_envelopes(params, 0.1);
    const double h = 1.0 / 8;
    auto solve = [&](auto gf) { return newton_solve(build_grid(params, 1.0, h), gf); };
    const auto hi = solve(
        [&](const std::array<double, 3>& x) { return env.upper(params.quadratic_s(x)); });
    const auto lo = solve(
        [&](const std::array<double, 3>& x) { return env.lower(params.quadratic_s(x)); });
    double worst = -1e300;
    for (std::size_t p = 0; p < hi.grid.size(); ++p)
        worst = std::max(worst, hi.u[p] - lo.u[p]);
    CHECK(worst <= 10.0 * h * h);
}

TEST_CASE("distinct initial iterates reach the same solution") {
    const auto params = iso3(4.0);
    const auto env = build_envelopes(params, 0.1);
    auto gf = [&](const std::array<double, 3>& x) {
        return env.family_g(params.quadratic_s(x));
    };
    const auto a = newton_solve(build_grid(params, 1.0, 1.0 / 8), gf);
    auto grid = build_grid(params, 1.0, 1.0 / 8);
    std::vector<double> init(grid.size());
    for (std::size_t p = 0; p < grid.size(); ++p)
        init[p] = grid.s_node[p] + 0.02 * (grid.s_level - grid.s_node[p]);
    const auto b = newton_solve(std::move(grid), gf, {}, init);
    double worst = 0.0;
    for (std::size_t p = 0; p < a.grid.size(); ++p)
        worst = std::max(worst, std::fabs(a.u[p] - b.u[p]));
    CHECK(worst < 1e-6);
}

TEST_CASE("radial reduction reproduces the constant-phase quadratic") {
    const auto params = iso3(4.0);
    const auto sol =
        radial_reduction_solve(params, [](double) { return 3.0 * pi / 4.0; }, 2.0);
    CHECK(std::fabs(sol.R - 2.0) < 1e-14);
    for (double r : {0.0, 0.37, 1.0, 1.6, 2.0})
        CHECK(std::fabs(sol.eval(r) - 0.5 * r * r) < 1e-12);
}

TEST_CASE("radial reduction rejects bad inputs") {
    CHECK_THROWS_AS(radial_reduction_solve(diag123(4.0), [](double) { return pi; }, 1.0),
                    ConfigError);
    const auto params = iso3(4.0);
    CHECK_THROWS_AS(radial_reduction_solve(params, [](double) { return 1.4; }, 1.0),
                    ConfigError);
}

TEST_CASE("radial deviation integral grows like ln r at beta = 2") {
    const double t = std::tan(1.7 / 3.0);
    const auto params =
        PhaseParams::make(SymmetricMatrix::diagonal({t, t, t}), 2.0, 1.7);
    auto G = [](double r) { return 1.7 + 0.3 / (1.0 + r * r); };
    const double R = 1e4;
    const auto sol = radial_reduction_solve(params, G, 0.5 * t * R * R);
    const double i1 = sol.deviation_integral(100.0) - sol.deviation_integral(10.0);
    const double i2 = sol.deviation_integral(1000.0) - sol.deviation_integral(100.0);
    const double i3 = sol.deviation_integral(10000.0) - sol.deviation_integral(1000.0);
    CHECK(i1 > 0.1);
    CHECK(std::fabs(i2 / i1 - 1.0) < 0.3);
    CHECK(std::fabs(i3 / i2 - 1.0) < 0.15);
}

TEST_CASE("sandwich margins collapse to the tolerance for constant phase") {
    const auto params = iso3(4.0);
    const auto flat_env = build_envelopes(params, 0.0);
    const auto flat =
        make_barrier(integrate_sub_profile(flat_env, params.a, 1.0), params);
    const auto sol = newton_solve(build_grid(params, 1.0, 1.0 / 8),
                                  [](const std::array<double, 3>&) { return 3.0 * pi / 4.0; });
    const auto rep = sandwich_check(sol, flat, flat);
    CHECK(rep.ok);
    CHECK(std::fabs(rep.beta_minus) < 1e-12);
    CHECK(std::fabs(rep.beta_plus) < 1e-12);
    CHECK(rep.worst_abs < 1e-10);
}

TEST_CASE("barrier sandwich holds for the slow-decay family") {
    const auto params = iso3(4.0);
    const auto env = build_envelopes(params, 0.1);
    const double wu0 = solve_w_under(env, params.a, 0.0);
    const double wo0 = solve_w_over(env, params.a, 0.0);
    const auto sub = make_barrier(integrate_sub_profile(env, params.a, 1.05 * wu0), params);
    const auto sup = make_barrier(integrate_super_profile(env, params.a, 0.95 * wo0), params);
    auto gf = [&](const std::array<double, 3>& x) {
        return env.family_g(params.quadratic_s(x));
    };
    const auto r1 = sandwich_check(newton_solve(build_grid(params, 1.0, 1.0 / 8), gf), sub, sup);
    CHECK(r1.ok);
    CHECK(r1.beta_minus < 0.0);
    CHECK(r1.beta_plus > 0.0);
    // doubling the domain keeps the same uniform constant
    const auto r2 = sandwich_check(newton_solve(build_grid(params, 2.0, 1.0 / 8), gf), sub, sup);
    CHECK(r2.ok);
    CHECK(std::fabs(r2.c1 - r1.c1) < 1e-12);
    CHECK(r2.worst_abs <= r1.c1);
}

TEST_CASE("limit study on constant phase is already converged") {
    const auto params = iso3(4.0);
    const auto env = build_envelopes(params, 0.0);
    LimitStudyOptions opts;
    opts.h_fine = 1.0 / 8;
    const std::vector<double> levels{0.5, 1.0, 2.0};
    const std::vector<double> probes{0.4};
    const auto rep = entire_limit_study(params, env, levels, probes, opts);
    REQUIRE(rep.cauchy.size() == 2);
    for (double c : rep.cauchy) CHECK(c < 1e-10);
    CHECK(std::fabs(rep.c_inf) < 1e-10);
    CHECK_FALSE(rep.far_field_fitted);
}

TEST_CASE("limit study recovers the far-field decay") {
    const auto params = iso3(4.0);
    const auto env = build_envelopes(params, 0.1);
    LimitStudyOptions opts;
    opts.h_fine = 1.0 / 8;
    const std::vector<double> levels{1.0, 2.0, 4.0};
    const std::vector<double> probes{0.4};
    const auto rep = entire_limit_study(params, env, levels, probes, opts);
    REQUIRE(rep.cauchy.size() == 2);
    CHECK(rep.cauchy[0] > 0.0);
    CHECK(rep.cauchy_monotone);
    REQUIRE(rep.far_field_fitted);
    CHECK(rep.far_target == 1.0);
    CHECK(std::fabs(rep.far_fit.exponent - rep.far_target) < 0.15);
    CHECK_FALSE(rep.far_fit.log_corrected);

    // levels straddling the peak of the deviation integrand come out
    // non-monotone; that is a flag, not an error
    const std::vector<double> straddle{0.5, 1.0, 2.0};
    const auto rep2 = entire_limit_study(params, env, straddle, probes, opts);
    CHECK_FALSE(rep2.cauchy_monotone);
}

TEST_CASE("limit study prefers the log model at beta = n") {
    const auto params = iso3(3.0);
    const auto env = build_envelopes(params, 0.1);
    LimitStudyOptions opts;
    opts.h_fine = 1.0 / 8;
    const std::vector<double> levels{0.5, 1.0};
    const std::vector<double> probes{0.4};
    const auto rep = entire_limit_study(params, env, levels, probes, opts);
    REQUIRE(rep.far_field_fitted);
    CHECK(rep.far_fit.log_corrected);
    CHECK(std::fabs(rep.far_fit.exponent - 1.0) < 0.15);
}

TEST_CASE("limit study validates its inputs") {
    const auto params = iso3(4.0);
    const auto env = build_envelopes(params, 0.1);
    const std::vector<double> probes_far{1.0};
    const std::vector<double> levels{0.5, 1.0};
    CHECK_THROWS_AS(entire_limit_study(params, env, levels, probes_far), ConfigError);
    const std::vector<double> bad_levels{1.0, 0.5};
    const std::vector<double> probes{0.4};
    CHECK_THROWS_AS(entire_limit_study(params, env, bad_levels, probes), ConfigError);
}
