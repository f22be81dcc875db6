// Command-line front end: dispatches one experiment per invocation and
// persists the outputs (CSV/JSON plus a manifest) under the run directory.
//
//   lml <mode> --config <file> [--out <dir>] [--seed <u64>] [--threads <k>]
//
// Exit codes: 0 all checks passed, 1 numerical failure or failed check,
// 2 config/schema violation (diagnostics name the config line).

#include <cstdio>
#include <cstdlib>
#include <string>

#include <CLI11.hpp>

#include "lml/lml.hpp"

namespace {

int threads_from_env() {
    const char* env = std::getenv("LML_THREADS");
    if (!env || !*env) return 1;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1)
        throw lml::ConfigError(std::string("LML_THREADS must be a positive integer, got '") +
                               env + "'");
    return static_cast<int>(v);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical toolkit for entire solutions of the Lagrangian mean curvature "
                 "equation in supercritical phase"};
    app.set_version_flag("--version", lml::version_string);

    std::string mode_arg, config_path, out_dir;
    std::uint64_t seed = 0;
    int threads = 0;
    app.add_option("mode", mode_arg,
                   "Run mode: barriers, dirichlet, limit_study, nonexistence, selfcheck")
        ->required();
    app.add_option("--config", config_path, "Experiment config (JSON, strict schema)")
        ->required();
    app.add_option("--out", out_dir, "Output directory (overrides config out_dir)");
    auto* seed_opt = app.add_option("--seed", seed, "Sampling seed (overrides config seed)");
    app.add_option("--threads", threads, "Worker thread budget (default: LML_THREADS, else 1)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        const lml::RunMode mode = lml::parse_mode(mode_arg);
        lml::ExperimentConfig cfg = lml::load_config(config_path);
        if (cfg.mode != mode)
            throw lml::ConfigError(std::string("config mode '") + lml::mode_name(cfg.mode) +
                                   "' does not match CLI mode '" + lml::mode_name(mode) + "'");
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (seed_opt->count() > 0) cfg.seed = seed;
        cfg.threads = threads > 0 ? threads : threads_from_env();
        if (cfg.threads < 1) throw lml::ConfigError("--threads must be a positive integer");

        const lml::RunOutput out = lml::run_experiment(cfg);
        if (!out.failure_report.empty()) {
            std::fprintf(stderr, "numerical failure; report: %s\n",
                         out.failure_report.string().c_str());
            return 1;
        }
        for (const auto& c : out.record.checks)
            std::printf("[%s] %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str());
        std::printf("run record: %s\n", out.record_path.string().c_str());
        return out.exit_code;
    } catch (const lml::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
