// Acceptance gate for the toolkit: eight criteria, one [PASS]/[FAIL] line
// each, tolerances pinned below.  Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "lml/lml.hpp"

using namespace lml;
using std::numbers::pi;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    int index = 0;
    const char* label = "";
    double budget_s = 0.0;
    bool pass = true;
    std::vector<std::string> notes;

    void expect(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            notes.push_back(what);
        }
    }
};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

PhaseParams iso3(double beta) {
    const std::vector<double> d{1.0, 1.0, 1.0};
    return PhaseParams::from_spectrum(d, beta);
}

// Band-safe random supercritical parameters for the property criteria.
struct RandomCase {
    PhaseParams params;
    PhaseEnvelope env;
};

RandomCase random_case(Sampler& rng) {
    for (;;) {
        const int n = 2 + static_cast<int>(rng.raw() % 5);
        std::vector<double> d(n);
        for (auto& v : d) v = rng.log_uniform(0.4, 4.0);
        const double beta = rng.uniform(2.2, 6.0);
        PhaseParams p;
        try {
            p = PhaseParams::from_spectrum(d, beta);
        } catch (const std::invalid_argument&) {
            continue;
        }
        const double gap_lo = p.g_inf - (p.n - 2) * pi / 2.0;
        const double gap_hi = p.n * pi / 2.0 - p.g_inf;
        const double k_scale = std::pow(std::max(1.0, p.A.trace() / (2.0 * p.n)), beta / 2.0);
        const double c = 0.4 * std::min(gap_lo, gap_hi) / k_scale * rng.uniform(0.2, 1.0);
        return {p, build_envelopes(p, c)};
    }
}

double direct_phase(const Spectrum& a, double w) {
    double f = 0.0;
    for (int i = 0; i < a.n; ++i) f += std::atan(a.values[i] * w);
    return f;
}

void criterion_identities(Criterion& c) {
    const double v3 = phase_value(SymmetricMatrix::diagonal({1.0, 1.0, 1.0}));
    c.expect(std::fabs(v3 - 0.75 * pi) <= 1e-14,
             "phase(I3) off 3pi/4 by " + num(v3 - 0.75 * pi));

    const double v123 = phase_value(SymmetricMatrix::diagonal({1.0, 2.0, 3.0}));
    c.expect(std::fabs(v123 - pi) <= 1e-12, "phase(diag(1,2,3)) off pi by " + num(v123 - pi));

    Spectrum ones;
    ones.n = 3;
    ones.values[0] = ones.values[1] = ones.values[2] = 1.0;
    c.expect(std::fabs(m_of_a(ones) - 1.5) <= 1e-14, "M((1,1,1)) != 3/2");

    for (int k = 0; k < 10; ++k) {
        const double t = std::pow(10.0, -1.0 + 2.0 * k / 9.0);
        Spectrum a;
        a.n = 3;
        a.values[0] = a.values[1] = a.values[2] = t;
        c.expect(std::fabs(m_of_a(a) - 1.5) <= 1e-12, "M((t,t,t)) != 3/2 at t=" + num(t));
    }

    Sampler rng(11);
    for (int k = 0; k < 100; ++k) {
        Spectrum a;
        a.n = 2 + static_cast<int>(rng.raw() % 5);
        for (int i = 0; i < a.n; ++i) a.values[i] = rng.log_uniform(0.2, 5.0);
        std::sort(a.values.begin(), a.values.begin() + a.n);
        const double w = rng.log_uniform(0.1, 10.0);
        c.expect(std::fabs(j_factor(a, w, 0.0)) <= 1e-14, "J(w,0) != 0");
    }
}

void criterion_implicit(Criterion& c) {
    Sampler rng(303);
    int residuals = 0;
    for (int trial = 0; trial < 25; ++trial) {
        const auto rc = random_case(rng);
        const Spectrum& a = rc.params.a;
        for (int k = 0; k < 20; ++k) {
            const double s = (k == 0) ? 0.0 : rng.log_uniform(1e-3, 1e10);
            const double wu = solve_w_under(rc.env, a, s);
            const double wo = solve_w_over(rc.env, a, s);
            c.expect(std::fabs(direct_phase(a, wu) - rc.env.upper(s)) <= 1e-12,
                     "w_under residual at s=" + num(s));
            c.expect(std::fabs(direct_phase(a, wo) - rc.env.lower(s)) <= 1e-12,
                     "w_over residual at s=" + num(s));

            const double w = wu * rng.uniform(1.0, 1.3);
            double lhs = std::atan(solve_h(rc.env, a, s, w));
            for (int i = 1; i < a.n; ++i) lhs += std::atan(a.values[i] * w);
            c.expect(std::fabs(lhs - rc.env.upper(s)) <= 1e-12, "h residual at s=" + num(s));

            const double wH = wo * rng.uniform(0.7, 1.0);
            const double H = solve_H(rc.env, a, s, wH);
            const double J = j_factor(a, wH, H);
            const double an = a.values[a.n - 1];
            double lhsH = std::atan(a.values[0] * wH + 2.0 * an * (1.0 + J) * H);
            for (int i = 1; i < a.n; ++i) lhsH += std::atan(a.values[i] * wH + 2.0 * an * J * H);
            c.expect(std::fabs(lhsH - rc.env.lower(s)) <= 1e-12, "H residual at s=" + num(s));
            residuals += 4;
        }
    }
    c.expect(residuals >= 1000, "fewer than 1000 residual samples");

    // on-curve identities
    Sampler rng2(404);
    for (int trial = 0; trial < 10; ++trial) {
        const auto rc = random_case(rng2);
        const Spectrum& a = rc.params.a;
        for (double s : {0.0, 0.7, 19.0, 1e4, 1e9}) {
            const double wu = solve_w_under(rc.env, a, s);
            c.expect(std::fabs(solve_h(rc.env, a, s, wu) - a.values[0] * wu) <= 1e-10,
                     "h(s, w_under) != a1 w_under at s=" + num(s));
            const double wo = solve_w_over(rc.env, a, s);
            c.expect(std::fabs(solve_H(rc.env, a, s, wo)) <= 1e-10,
                     "H(s, w_over) != 0 at s=" + num(s));
        }
    }

    // limiting slope identity (slope - a_1)/(2 a_n) = -M(A)
    Sampler rng3(505);
    int accepted = 0;
    while (accepted < 50) {
        const int n = 2 + static_cast<int>(rng3.raw() % 5);
        Spectrum a;
        a.n = n;
        for (int i = 0; i < n; ++i) a.values[i] = rng3.log_uniform(0.5, 3.0);
        std::sort(a.values.begin(), a.values.begin() + n);
        double m;
        try {
            m = m_of_a(a);
        } catch (const std::domain_error&) {
            continue;
        }
        if (m <= 1.0) continue;
        ++accepted;
        const double lhs = (dh_dw_limit(a) - a.values[0]) / (2.0 * a.values[n - 1]);
        c.expect(std::fabs(lhs + m) <= 1e-10 * std::max(1.0, m), "dh_dw_limit identity");
    }
}

void criterion_barrier_rates(Criterion& c) {
    struct Case {
        double beta;
        double exponent;
    };
    // min{M(A), beta/2} with M((1,1,1)) = 3/2
    const Case cases[] = {{2.5, 1.25}, {3.0, 1.5}, {4.0, 1.5}};
    for (const auto& cs : cases) {
        const auto params = iso3(cs.beta);
        const auto env = build_envelopes(params, 0.1);
        const double wu0 = solve_w_under(env, params.a, 0.0);
        const double wo0 = solve_w_over(env, params.a, 0.0);

        const Profile sub = integrate_sub_profile(env, params.a, 1.05 * wu0);
        const Profile sup = integrate_super_profile(env, params.a, 0.95 * wo0);
        c.expect(sub.terminal_gap() < 1e-6,
                 "sub terminal gap " + num(sub.terminal_gap()) + " at beta=" + num(cs.beta));
        c.expect(sup.terminal_gap() < 1e-6,
                 "super terminal gap " + num(sup.terminal_gap()) + " at beta=" + num(cs.beta));

        const RateFit fs = fit_decay_rate(sub, cs.beta, params.m_a);
        const RateFit fp = fit_decay_rate(sup, cs.beta, params.m_a);
        c.expect(std::fabs(fs.exponent - cs.exponent) <= 0.05,
                 "sub exponent " + num(fs.exponent) + " at beta=" + num(cs.beta));
        c.expect(std::fabs(fp.exponent - cs.exponent) <= 0.05,
                 "super exponent " + num(fp.exponent) + " at beta=" + num(cs.beta));

        // the ln s correction belongs to beta = 3 and no other beta in the
        // sweep; either profile may carry the preference
        const bool log_preferred = fs.log_corrected || fp.log_corrected;
        c.expect(log_preferred == (cs.beta == 3.0),
                 "log preference at beta=" + num(cs.beta) + " (sub=" +
                     (fs.log_corrected ? "yes" : "no") + ", super=" +
                     (fp.log_corrected ? "yes" : "no") + ")");
    }
}

void criterion_barrier_inequalities(Criterion& c) {
    const auto points = sample_points(3, 1000, 2024);
    for (const double beta : {2.5, 3.0, 4.0}) {
        const auto params = iso3(beta);
        const auto env = build_envelopes(params, 0.1);
        const double wu0 = solve_w_under(env, params.a, 0.0);
        const double wo0 = solve_w_over(env, params.a, 0.0);
        const auto sub = make_barrier(integrate_sub_profile(env, params.a, 1.05 * wu0), params);
        const auto sup = make_barrier(integrate_super_profile(env, params.a, 0.95 * wo0), params);

        const auto rs = verify_subsolution(sub, points);
        c.expect(rs.passed && rs.checked >= 1000, "subsolution check failed at beta=" + num(beta));
        c.expect(rs.worst_phase_margin >= -1e-8,
                 "sub phase margin " + num(rs.worst_phase_margin) + " at beta=" + num(beta));
        c.expect(rs.worst_weyl_margin >= -1e-8,
                 "sub eigenvalue margin " + num(rs.worst_weyl_margin) + " at beta=" + num(beta));

        const auto rp = verify_supersolution(sup, points);
        c.expect(rp.passed && rp.checked >= 1000,
                 "supersolution check failed at beta=" + num(beta));
        c.expect(rp.worst_phase_margin >= -1e-8,
                 "super phase margin " + num(rp.worst_phase_margin) + " at beta=" + num(beta));
        c.expect(rp.worst_weyl_margin >= -1e-8,
                 "super eigenvalue margin " + num(rp.worst_weyl_margin) + " at beta=" + num(beta));
        c.expect(rp.worst_lemma_margin >= -1e-8,
                 "dispersed-slot bound margin " + num(rp.worst_lemma_margin) + " at beta=" +
                     num(beta));
    }
}

void criterion_dirichlet(Criterion& c) {
    const auto params = iso3(4.0);
    const double h = 1.0 / 16;

    // constant phase solves to the domain quadratic
    {
        const auto sol = newton_solve(build_grid(params, 1.0, h),
                                      [&](const std::array<double, 3>&) { return params.g_inf; });
        double worst = 0.0;
        for (std::size_t p = 0; p < sol.grid.size(); ++p)
            worst = std::max(worst, std::fabs(sol.u[p] - sol.grid.s_node[p]));
        c.expect(worst <= 1e-10, "constant phase quadratic error " + num(worst));
    }

    // slow-decay family: residual and radial-oracle agreement
    const auto env = build_envelopes(params, 0.1);
    auto gf = [&](const std::array<double, 3>& x) { return env.family_g(params.quadratic_s(x)); };
    {
        const auto sol = newton_solve(build_grid(params, 1.0, h), gf);
        c.expect(sol.final_residual <= 1e-8, "residual " + num(sol.final_residual));

        const auto oracle = radial_reduction_solve(
            params, [&](double r) { return env.family_g(0.5 * r * r); }, 1.0);
        double worst = 0.0;
        for (std::size_t p = 0; p < sol.grid.size(); ++p) {
            const auto x = sol.grid.position(p);
            const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
            worst = std::max(worst, std::fabs(sol.u[p] - oracle.eval(r)));
        }
        c.expect(worst <= 20.0 * h * h,
                 "radial oracle disagreement " + num(worst) + " > " + num(20.0 * h * h));
    }

    // sandwich uniform in the domain size: one constant for all levels
    {
        const double wu0 = solve_w_under(env, params.a, 0.0);
        const double wo0 = solve_w_over(env, params.a, 0.0);
        const auto sub = make_barrier(integrate_sub_profile(env, params.a, 1.05 * wu0), params);
        const auto sup = make_barrier(integrate_super_profile(env, params.a, 0.95 * wo0), params);

        const double levels[] = {2.0, 4.0, 8.0};
        std::vector<SandwichReport> reps;
        for (const double s : levels) {
            const double hs = s <= 4.0 ? 1.0 / 16 : 1.0 / 8;
            reps.push_back(sandwich_check(newton_solve(build_grid(params, s, hs), gf), sub, sup));
        }
        double c1_common = 0.0;
        for (const auto& r : reps) c1_common = std::max(c1_common, r.c1);
        for (std::size_t i = 0; i < reps.size(); ++i) {
            c.expect(reps[i].ok, "sandwich failed at s_level=" + num(levels[i]));
            c.expect(reps[i].worst_abs <= c1_common,
                     "|u - q| = " + num(reps[i].worst_abs) + " above the common C1 " +
                         num(c1_common) + " at s_level=" + num(levels[i]));
        }
    }
}

void criterion_far_field(Criterion& c) {
    LimitStudyOptions opts;
    opts.h_fine = 1.0 / 8;
    const std::vector<double> levels{0.5, 1.0};
    const std::vector<double> probes{0.4};

    const auto p4 = iso3(4.0);
    const auto rep4 = entire_limit_study(p4, build_envelopes(p4, 0.1), levels, probes, opts);
    c.expect(rep4.far_field_fitted, "beta=4 far field not fitted");
    c.expect(std::fabs(rep4.far_fit.exponent - 1.0) <= 0.15,
             "beta=4 far exponent " + num(rep4.far_fit.exponent));
    c.expect(!rep4.far_fit.log_corrected, "beta=4 unexpectedly log-corrected");

    const auto p3 = iso3(3.0);
    const auto rep3 = entire_limit_study(p3, build_envelopes(p3, 0.1), levels, probes, opts);
    c.expect(rep3.far_field_fitted, "beta=3 far field not fitted");
    c.expect(rep3.far_fit.log_corrected, "beta=3 log model not preferred");
    c.expect(std::fabs(rep3.far_fit.exponent - 1.0) <= 0.15,
             "beta=3 far exponent " + num(rep3.far_fit.exponent));
}

void criterion_nonexistence(Criterion& c) {
    // beta = 2: logarithmic divergence with the 7/4 window ratio
    {
        RadialSolution sol = integrate_radial_profile(build_radial_phase(3, 2.0, 1.7, 2.0));
        const GrowthReport rep = classify_growth(sol);
        c.expect(rep.model == "log" && rep.conclusive, "beta=2 model " + rep.model);
        const double ratio = rep.d_hi / rep.d_mid;
        c.expect(std::fabs(ratio - 1.75) <= 0.05 * 1.75,
                 "beta=2 d(1e7)/d(1e4) = " + num(ratio));
    }
    // beta = 1: power divergence with unit exponent
    {
        RadialSolution sol = integrate_radial_profile(build_radial_phase(3, 2.0, 1.7, 1.0));
        const GrowthReport rep = classify_growth(sol);
        c.expect(rep.model == "power" && rep.conclusive, "beta=1 model " + rep.model);
        c.expect(std::fabs(rep.fit.exponent - 1.0) <= 0.1,
                 "beta=1 exponent " + num(rep.fit.exponent));
    }
    // beta = 4 contrast: deviation stays bounded
    {
        RadialSolution sol = integrate_radial_profile(build_radial_phase(3, 2.0, 1.7, 4.0));
        const GrowthReport rep = classify_growth(sol);
        c.expect(rep.model == "convergent", "beta=4 model " + rep.model);
    }
}

void criterion_determinism(Criterion& c) {
    const char* cfg_text = R"({
      "schema_version": 1,
      "mode": "barriers",
      "params": {"a": [1.0, 1.0, 1.0], "beta": 4.0, "g_inf": 2.3561944901923449},
      "envelope": {"c": 0.1},
      "seed": 7
    })";
    ExperimentConfig cfg = parse_config_text(cfg_text, "acceptance.json");
    const fs::path base = fs::temp_directory_path();
    const fs::path dir_a = base / "lml_acceptance_a";
    const fs::path dir_b = base / "lml_acceptance_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);

    cfg.out_dir = dir_a.string();
    c.expect(run_experiment(cfg).exit_code == 0, "first barrier run failed");
    cfg.out_dir = dir_b.string();
    c.expect(run_experiment(cfg).exit_code == 0, "second barrier run failed");
    for (const char* name : {"sub_profile.csv", "super_profile.csv", "sub_rate.csv",
                             "super_rate.csv", "summary.json"}) {
        c.expect(read_bytes(dir_a / name) == read_bytes(dir_b / name),
                 std::string(name) + " differs between identical runs");
    }

    // halving h keeps the certified agreement within its stated tolerance
    const auto params = iso3(4.0);
    const auto env = build_envelopes(params, 0.1);
    const auto oracle = radial_reduction_solve(
        params, [&](double r) { return env.family_g(0.5 * r * r); }, 1.0);
    for (const double h : {1.0 / 8, 1.0 / 16}) {
        const auto sol =
            newton_solve(build_grid(params, 1.0, h), [&](const std::array<double, 3>& x) {
                return env.family_g(params.quadratic_s(x));
            });
        double worst = 0.0;
        for (std::size_t p = 0; p < sol.grid.size(); ++p) {
            const auto x = sol.grid.position(p);
            const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
            worst = std::max(worst, std::fabs(sol.u[p] - oracle.eval(r)));
        }
        c.expect(worst <= 20.0 * h * h,
                 "h=" + num(h) + " oracle disagreement " + num(worst) + " > " + num(20.0 * h * h));
    }
}

}  // namespace

int main() {
    struct Entry {
        int index;
        const char* label;
        double budget_s;
        void (*run)(Criterion&);
    };
    const Entry entries[] = {
        {1, "closed-form identities", 1.0, criterion_identities},
        {2, "implicit-function residuals", 10.0, criterion_implicit},
        {3, "barrier decay rates", 120.0, criterion_barrier_rates},
        {4, "barrier inequalities", 60.0, criterion_barrier_inequalities},
        {5, "Dirichlet solver", 600.0, criterion_dirichlet},
        {6, "far-field rate", 60.0, criterion_far_field},
        {7, "radial nonexistence", 120.0, criterion_nonexistence},
        {8, "determinism and refinement", 600.0, criterion_determinism},
    };

    bool all = true;
    for (const auto& e : entries) {
        Criterion crit;
        crit.index = e.index;
        crit.label = e.label;
        crit.budget_s = e.budget_s;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            e.run(crit);
        } catch (const std::exception& ex) {
            crit.expect(false, std::string("exception: ") + ex.what());
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        crit.expect(secs < crit.budget_s,
                    "took " + num(secs) + " s, budget " + num(crit.budget_s) + " s");
        std::printf("[%s] %d. %s (%.2f s)\n", crit.pass ? "PASS" : "FAIL", crit.index, crit.label,
                    secs);
        for (const auto& note : crit.notes) std::printf("       - %s\n", note.c_str());
        std::fflush(stdout);
        all = all && crit.pass;
    }
    return all ? 0 : 1;
}
