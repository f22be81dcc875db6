#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lml/barrier.hpp"
#include "lml/config.hpp"
#include "lml/envelope.hpp"
#include "lml/implicit.hpp"
#include "lml/io.hpp"
#include "lml/newton_fd.hpp"
#include "lml/radial.hpp"
#include "lml/rng.hpp"

namespace lml {

struct RunOutput {
    int exit_code = 0;
    RunRecord record;
    std::filesystem::path record_path;
    std::filesystem::path failure_report;  // set when a solver failed (exit 1)
};

namespace detail {

struct RunContext {
    std::filesystem::path dir;
    nlohmann::json summary = nlohmann::json::object();
    std::vector<ManifestEntry> manifest;
    std::vector<CheckResult> checks;

    void emit_csv(const std::string& name, const CsvTable& table) {
        write_csv(dir / name, table);
        manifest.push_back({name, hash_file(dir / name)});
    }
    void emit_bytes(const std::string& name, std::string_view bytes) {
        write_bytes(dir / name, bytes);
        manifest.push_back({name, hash_file(dir / name)});
    }
    void check(const std::string& name, bool pass) { checks.push_back({name, pass}); }
};

inline nlohmann::json rate_fit_json(const RateFit& fit) {
    return {{"exponent", fit.exponent},   {"log_corrected", fit.log_corrected},
            {"r2", fit.r2},               {"intercept", fit.intercept},
            {"window_lo", fit.window_lo}, {"window_hi", fit.window_hi},
            {"npoints", fit.npoints}};
}

inline PhaseParams params_from_config(const ExperimentConfig& cfg) {
    try {
        return PhaseParams::from_spectrum(cfg.a, cfg.beta, cfg.g_inf);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("params: ") + e.what());
    }
}

inline nlohmann::json params_json(const PhaseParams& p) {
    nlohmann::json a = nlohmann::json::array();
    for (int i = 0; i < p.a.n; ++i) a.push_back(p.a.values[i]);
    return {{"a", a}, {"beta", p.beta}, {"g_inf", p.g_inf}, {"m_a", p.m_a}};
}

// One barrier of the requested kind, from the run's envelope, using the
// reference starts: 5% above w_under(0) for the subsolution, 5% below
// w_over(0) for the supersolution.
inline BarrierFunction build_run_barrier(const PhaseEnvelope& env, const PhaseParams& params,
                                         bool sub) {
    try {
        if (sub) {
            const double wu0 = solve_w_under(env, params.a, 0.0);
            return make_barrier(integrate_sub_profile(env, params.a, 1.05 * wu0), params);
        }
        const double wo0 = solve_w_over(env, params.a, 0.0);
        return make_barrier(integrate_super_profile(env, params.a, 0.95 * wo0), params);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("barrier: ") + e.what());
    }
}

inline void run_selfcheck(const ExperimentConfig& cfg, RunContext& ctx) {
    using std::numbers::pi;
    nlohmann::json& s = ctx.summary;

    const double v3 = phase_value(SymmetricMatrix::diagonal({1.0, 1.0, 1.0}));
    s["phase_identity_i3"] = v3;
    ctx.check("phase_identity_i3", std::fabs(v3 - 3.0 * pi / 4.0) <= 1e-14);

    const double v123 = phase_value(SymmetricMatrix::diagonal({1.0, 2.0, 3.0}));
    s["phase_identity_123"] = v123;
    ctx.check("phase_identity_123", std::fabs(v123 - pi) <= 1e-12);

    Spectrum ones;
    ones.n = 3;
    ones.values[0] = ones.values[1] = ones.values[2] = 1.0;
    const double m1 = m_of_a(ones);
    s["m_of_a_ones"] = m1;
    ctx.check("m_of_a_ones", std::fabs(m1 - 1.5) <= 1e-14);

    bool iso_ok = true;
    double iso_worst = 0.0;
    for (int k = 0; k < 10; ++k) {
        Spectrum iso;
        iso.n = 3;
        const double t = std::pow(10.0, -1.0 + 2.0 * k / 9.0);
        iso.values[0] = iso.values[1] = iso.values[2] = t;
        iso_worst = std::max(iso_worst, std::fabs(m_of_a(iso) - 1.5));
        iso_ok = iso_ok && iso_worst <= 1e-12;
    }
    s["m_of_a_isotropic_worst"] = iso_worst;
    ctx.check("m_of_a_isotropic", iso_ok);

    Sampler rng(cfg.seed);
    double j_worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        Spectrum a;
        a.n = 3;
        for (int i = 0; i < 3; ++i) a.values[i] = rng.log_uniform(0.2, 5.0);
        const double w = rng.log_uniform(0.1, 10.0);
        j_worst = std::max(j_worst, std::fabs(j_factor(a, w, 0.0)));
    }
    s["j_factor_zero_worst"] = j_worst;
    ctx.check("j_factor_zero", j_worst <= 1e-14);
}

inline void run_barriers(const ExperimentConfig& cfg, RunContext& ctx) {
    const PhaseParams params = params_from_config(cfg);
    const PhaseEnvelope env = build_envelopes(params, cfg.c);
    ctx.summary["params"] = params_json(params);
    ctx.summary["envelope"] = {{"c", env.c}, {"K", env.K}, {"g_inf", env.g_inf}};

    const bool want_sub = cfg.sign != BarrierSide::super;
    const bool want_super = cfg.sign != BarrierSide::sub;
    for (const bool sub : {true, false}) {
        if (sub ? !want_sub : !want_super) continue;
        const char* tag = sub ? "sub" : "super";
        const BarrierFunction b = build_run_barrier(env, params, sub);
        ctx.emit_csv(std::string(tag) + "_profile.csv", barrier_table(b));
        ctx.emit_csv(std::string(tag) + "_rate.csv", rate_fit_table(*b.rate));
        ctx.summary[tag] = {{"C", b.C},
                            {"terminal_gap", b.profile.terminal_gap()},
                            {"rate", rate_fit_json(*b.rate)}};
        ctx.check(std::string(tag) + "_terminal", b.profile.terminal_gap() < 1e-6);
        ctx.check(std::string(tag) + "_rate_finite", std::isfinite(b.rate->exponent));
    }
}

inline void run_dirichlet(const ExperimentConfig& cfg, RunContext& ctx) {
    const PhaseParams params = params_from_config(cfg);
    const PhaseEnvelope env = build_envelopes(params, cfg.c);
    NewtonOptions opts;
    opts.tol = cfg.newton_tol;
    opts.max_iters = cfg.max_iters;
    const GridSolution sol =
        newton_solve(build_grid(params, cfg.s_level, cfg.h),
                     [&](const std::array<double, 3>& x) {
                         return env.family_g(params.quadratic_s(x));
                     },
                     opts);

    ctx.emit_csv("solution.csv", grid_table(sol));
    {
        write_grid_dump(ctx.dir / "solution.bin", sol);
        ctx.manifest.push_back({"solution.bin", hash_file(ctx.dir / "solution.bin")});
    }
    ctx.summary["params"] = params_json(params);
    ctx.summary["solver"] = {{"s_level", cfg.s_level},
                             {"h", cfg.h},
                             {"nodes", sol.grid.size()},
                             {"newton_iters", sol.newton_iters},
                             {"final_residual", sol.final_residual}};
    ctx.check("newton_converged", sol.final_residual <= cfg.newton_tol);

    if (cfg.c > 0.0) {
        const BarrierFunction sub = build_run_barrier(env, params, true);
        const BarrierFunction super = build_run_barrier(env, params, false);
        const SandwichReport rep = sandwich_check(sol, sub, super);
        ctx.summary["sandwich"] = {{"beta_minus", rep.beta_minus}, {"beta_plus", rep.beta_plus},
                                   {"c1", rep.c1},                 {"tol", rep.tol},
                                   {"worst_lower", rep.worst_lower}, {"worst_upper", rep.worst_upper},
                                   {"ok", rep.ok}};
        ctx.check("sandwich", rep.ok);
    }
}

inline void run_limit_study(const ExperimentConfig& cfg, RunContext& ctx) {
    const PhaseParams params = params_from_config(cfg);
    const PhaseEnvelope env = build_envelopes(params, cfg.c);
    LimitStudyOptions opts;
    opts.h_fine = cfg.h_fine;
    opts.h_coarse = cfg.h_coarse;
    opts.h_switch_level = cfg.h_switch_level;
    const LimitStudyReport rep =
        entire_limit_study(params, env, cfg.s_levels, cfg.probe_radii, opts);

    CsvTable cauchy;
    cauchy.header = {"s_lo", "s_hi", "max_diff"};
    for (std::size_t i = 0; i + 1 < rep.s_levels.size(); ++i)
        cauchy.rows.push_back({rep.s_levels[i], rep.s_levels[i + 1], rep.cauchy[i]});
    ctx.emit_csv("cauchy.csv", cauchy);

    ctx.summary["params"] = params_json(params);
    ctx.summary["s_levels"] = rep.s_levels;
    ctx.summary["h_used"] = rep.h_used;
    ctx.summary["cauchy"] = rep.cauchy;
    ctx.summary["cauchy_monotone"] = rep.cauchy_monotone;  // informational, not a gate
    ctx.summary["far_field_fitted"] = rep.far_field_fitted;

    bool cauchy_finite = true;
    for (const double d : rep.cauchy) cauchy_finite = cauchy_finite && std::isfinite(d);
    ctx.check("cauchy_finite", cauchy_finite);

    if (rep.far_field_fitted) {
        ctx.emit_csv("far_fit.csv", rate_fit_table(rep.far_fit));
        ctx.summary["c_inf"] = rep.c_inf;
        ctx.summary["far_target"] = rep.far_target;
        ctx.summary["far_fit"] = rate_fit_json(rep.far_fit);
        ctx.check("far_rate_within_tolerance",
                  std::fabs(rep.far_fit.exponent - rep.far_target) <= 0.15);
    }
}

inline void run_nonexistence(const ExperimentConfig& cfg, RunContext& ctx) {
    RadialPhase phase;
    try {
        phase = build_radial_phase(cfg.radial_n, cfg.radial_g0, cfg.radial_g_inf,
                                   cfg.radial_beta);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("radial: ") + e.what());
    }
    RadialSolution sol = integrate_radial_profile(phase);
    const GrowthReport growth = classify_growth(sol);
    const NonexistenceReport rep = nonexistence_report(phase);

    ctx.emit_csv("radial_profile.csv", radial_table(sol));

    nlohmann::json blend = nlohmann::json::array();
    for (const double b : phase.blend) blend.push_back(b);
    ctx.summary["phase"] = {{"n", phase.n},
                            {"g0", phase.G0},
                            {"g_inf", phase.G_inf},
                            {"beta", phase.beta},
                            {"r_switch", phase.r_switch},
                            {"blend", blend}};
    ctx.summary["growth"] = {{"model", growth.model},
                             {"conclusive", growth.conclusive},
                             {"c3", growth.c3},
                             {"c4", growth.c4},
                             {"d_mid", growth.d_mid},
                             {"d_hi", growth.d_hi},
                             {"fit", rate_fit_json(growth.fit)}};
    ctx.summary["premises"] = {{"unique_origin_slope", rep.premise_unique},
                               {"divergent_growth", rep.premise_divergent}};
    ctx.summary["eps_tried"] = rep.eps_tried;
    ctx.summary["in_scope"] = rep.in_scope;
    ctx.summary["certified"] = rep.certified;
    ctx.summary["verdict"] = rep.verdict;
    ctx.summary["cited_assumptions"] = rep.cited_assumptions;

    ctx.check("growth_conclusive", rep.growth.conclusive);
    if (rep.in_scope)
        ctx.check("nonexistence_certified", rep.certified);
    else
        ctx.check("contrast_documented", rep.growth.conclusive && !rep.certified);
}

}  // namespace detail

/// Dispatches one experiment, writing all artifacts plus run_record.json
/// under cfg.out_dir.  Exit code 0 means every enabled check passed; 1 means
/// a check failed or a solver threw (failure_report names the written
/// diagnostics); config errors propagate to the caller for exit code 2.
inline RunOutput run_experiment(const ExperimentConfig& cfg) {
    RunOutput out;
    RunRecord& rec = out.record;
    rec.mode = mode_name(cfg.mode);
    rec.config_hash = cfg.config_hash;
    rec.seed = cfg.seed;
    rec.threads = cfg.threads;
    rec.started_at = iso8601_utc_now();

    std::filesystem::create_directories(cfg.out_dir);
    detail::RunContext ctx{cfg.out_dir, nlohmann::json::object(), {}, {}};

    try {
        switch (cfg.mode) {
            case RunMode::selfcheck: detail::run_selfcheck(cfg, ctx); break;
            case RunMode::barriers: detail::run_barriers(cfg, ctx); break;
            case RunMode::dirichlet: detail::run_dirichlet(cfg, ctx); break;
            case RunMode::limit_study: detail::run_limit_study(cfg, ctx); break;
            case RunMode::nonexistence: detail::run_nonexistence(cfg, ctx); break;
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        nlohmann::json fail = {{"mode", rec.mode}, {"error", e.what()}};
        const auto path = ctx.dir / "failure_report.json";
        write_bytes(path, fail.dump(2) + "\n");
        rec.checks.push_back({"completed", false});
        rec.finished_at = iso8601_utc_now();
        write_run_record(ctx.dir, rec);
        out.exit_code = 1;
        out.failure_report = path;
        out.record_path = ctx.dir / "run_record.json";
        return out;
    }

    ctx.emit_bytes("summary.json", ctx.summary.dump(2) + "\n");
    rec.manifest = ctx.manifest;
    rec.checks = ctx.checks;
    rec.finished_at = iso8601_utc_now();
    write_run_record(ctx.dir, rec);
    out.exit_code = rec.all_passed() ? 0 : 1;
    out.record_path = ctx.dir / "run_record.json";
    return out;
}

struct FieldDiff {
    std::string path;
    double a = 0.0;
    double b = 0.0;
    double abs_diff = 0.0;
};

struct CompareReport {
    std::vector<FieldDiff> fields;  // numeric leaves of the two summaries
    std::vector<std::string> notes; // structural or non-numeric differences
    std::vector<std::pair<std::string, bool>> artifact_identical;
    double max_field_diff = 0.0;

    bool identical() const {
        if (max_field_diff != 0.0 || !notes.empty()) return false;
        for (const auto& [name, same] : artifact_identical)
            if (!same) return false;
        return true;
    }
};

namespace detail {

inline void diff_json(const std::string& prefix, const nlohmann::json& a,
                      const nlohmann::json& b, CompareReport& rep) {
    if (a.is_number() && b.is_number()) {
        const double va = a.get<double>(), vb = b.get<double>();
        const double d = std::fabs(va - vb);
        rep.fields.push_back({prefix, va, vb, d});
        rep.max_field_diff = std::max(rep.max_field_diff, d);
        return;
    }
    if (a.is_object() && b.is_object()) {
        for (const auto& [key, va] : a.items()) {
            if (!b.contains(key)) {
                rep.notes.push_back(prefix + "." + key + " only in first run");
                continue;
            }
            diff_json(prefix + "." + key, va, b[key], rep);
        }
        for (const auto& [key, vb] : b.items()) {
            (void)vb;
            if (!a.contains(key)) rep.notes.push_back(prefix + "." + key + " only in second run");
        }
        return;
    }
    if (a.is_array() && b.is_array()) {
        if (a.size() != b.size()) {
            rep.notes.push_back(prefix + " array sizes differ: " + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()));
            return;
        }
        for (std::size_t i = 0; i < a.size(); ++i)
            diff_json(prefix + "[" + std::to_string(i) + "]", a[i], b[i], rep);
        return;
    }
    if (a != b) rep.notes.push_back(prefix + " differs: " + a.dump() + " vs " + b.dump());
}

}  // namespace detail

/// Field-by-field comparison of two finished runs: per-artifact byte
/// identity from the manifests, and numeric diffs over the summaries.
/// Records must share mode and schema version.
inline CompareReport compare_runs(const std::filesystem::path& dir_a,
                                  const std::filesystem::path& dir_b) {
    const RunRecord ra = load_run_record(dir_a);
    const RunRecord rb = load_run_record(dir_b);
    if (ra.mode != rb.mode)
        throw ConfigError("compare_runs: mode mismatch: " + ra.mode + " vs " + rb.mode);
    if (ra.schema_version != rb.schema_version)
        throw ConfigError("compare_runs: schema version mismatch: " +
                          std::to_string(ra.schema_version) + " vs " +
                          std::to_string(rb.schema_version));

    CompareReport rep;
    for (const auto& ma : ra.manifest)
        for (const auto& mb : rb.manifest)
            if (ma.path == mb.path) rep.artifact_identical.push_back({ma.path, ma.hash == mb.hash});

    nlohmann::json sa, sb;
    try {
        sa = nlohmann::json::parse(read_bytes(dir_a / "summary.json"));
        sb = nlohmann::json::parse(read_bytes(dir_b / "summary.json"));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("compare_runs: bad summary.json: ") + e.what());
    }
    detail::diff_json("summary", sa, sb, rep);
    return rep;
}

}  // namespace lml
