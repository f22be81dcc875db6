#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "lml/errors.hpp"
#include "lml/io.hpp"
#include "lml/version.hpp"

namespace lml {

enum class RunMode { barriers, dirichlet, limit_study, nonexistence, selfcheck };

inline const char* mode_name(RunMode m) {
    switch (m) {
        case RunMode::barriers: return "barriers";
        case RunMode::dirichlet: return "dirichlet";
        case RunMode::limit_study: return "limit_study";
        case RunMode::nonexistence: return "nonexistence";
        case RunMode::selfcheck: return "selfcheck";
    }
    throw InternalError("mode_name: unhandled mode");
}

inline RunMode parse_mode(const std::string& s) {
    if (s == "barriers") return RunMode::barriers;
    if (s == "dirichlet") return RunMode::dirichlet;
    if (s == "limit_study") return RunMode::limit_study;
    if (s == "nonexistence") return RunMode::nonexistence;
    if (s == "selfcheck") return RunMode::selfcheck;
    throw ConfigError("unknown mode '" + s +
                      "' (expected barriers, dirichlet, limit_study, nonexistence, or selfcheck)");
}

/// Which barrier family a run emits.
enum class BarrierSide { sub, super, both };

struct ExperimentConfig {
    RunMode mode = RunMode::selfcheck;
    int schema_version = config_schema_version;

    // params (modes built on the generalized symmetric reduction)
    std::vector<double> a;
    double beta = 0.0;
    std::optional<double> g_inf;

    // envelope
    double c = 0.0;
    BarrierSide sign = BarrierSide::both;

    // solver (dirichlet)
    double s_level = 1.0;
    double h = 0.125;
    double newton_tol = 1e-8;
    int max_iters = 50;

    // study (limit_study)
    std::vector<double> s_levels;
    std::vector<double> probe_radii;
    double h_fine = 1.0 / 16.0;
    double h_coarse = 1.0 / 8.0;
    double h_switch_level = 4.0;

    // radial (nonexistence)
    int radial_n = 3;
    double radial_g0 = 0.0;
    double radial_g_inf = 0.0;
    double radial_beta = 0.0;

    std::string out_dir = "lml_out";
    std::uint64_t seed = 0;
    int threads = 1;

    std::string config_hash;  // FNV-1a over the config file bytes
};

namespace detail {

/// Best-effort line lookup for schema diagnostics: the first occurrence of
/// the quoted key, searched after `anchor` so nested sections resolve to
/// their own copy of a repeated name.
inline int line_of_key(const std::string& text, const std::string& key, std::size_t anchor = 0) {
    const std::string needle = "\"" + key + "\"";
    std::size_t at = text.find(needle, anchor);
    if (at == std::string::npos) at = text.find(needle);
    if (at == std::string::npos) return 0;
    int line = 1;
    for (std::size_t i = 0; i < at; ++i)
        if (text[i] == '\n') ++line;
    return line;
}

inline std::size_t offset_of_key(const std::string& text, const std::string& key) {
    const std::size_t at = text.find("\"" + key + "\"");
    return at == std::string::npos ? 0 : at;
}

inline int line_of_offset(const std::string& text, std::size_t byte) {
    int line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

struct ConfigCursor {
    const std::string& file;  // display name
    const std::string& text;  // raw bytes, for line lookup

    [[noreturn]] void fail(const std::string& key, std::size_t anchor,
                           const std::string& what) const {
        throw ConfigError(file + ":" + std::to_string(line_of_key(text, key, anchor)) + ": " +
                          what);
    }

    void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& allowed,
                        const std::string& section, std::size_t anchor) const {
        for (const auto& [key, value] : obj.items()) {
            (void)value;
            if (!allowed.count(key))
                fail(key, anchor, "unknown key \"" + key + "\" in " + section);
        }
    }

    double number(const nlohmann::json& obj, const std::string& key, std::size_t anchor) const {
        if (!obj.contains(key)) fail(key, anchor, "missing required key \"" + key + "\"");
        if (!obj[key].is_number()) fail(key, anchor, "\"" + key + "\" must be a number");
        return obj[key].get<double>();
    }

    double number_or(const nlohmann::json& obj, const std::string& key, std::size_t anchor,
                     double fallback) const {
        if (!obj.contains(key)) return fallback;
        if (!obj[key].is_number()) fail(key, anchor, "\"" + key + "\" must be a number");
        return obj[key].get<double>();
    }

    int integer_or(const nlohmann::json& obj, const std::string& key, std::size_t anchor,
                   int fallback) const {
        if (!obj.contains(key)) return fallback;
        if (!obj[key].is_number_integer()) fail(key, anchor, "\"" + key + "\" must be an integer");
        return obj[key].get<int>();
    }

    std::vector<double> number_array(const nlohmann::json& obj, const std::string& key,
                                     std::size_t anchor) const {
        if (!obj.contains(key)) fail(key, anchor, "missing required key \"" + key + "\"");
        if (!obj[key].is_array() || obj[key].empty())
            fail(key, anchor, "\"" + key + "\" must be a non-empty array of numbers");
        std::vector<double> out;
        for (const auto& v : obj[key]) {
            if (!v.is_number()) fail(key, anchor, "\"" + key + "\" must contain only numbers");
            out.push_back(v.get<double>());
        }
        return out;
    }

    const nlohmann::json& section(const nlohmann::json& obj, const std::string& key,
                                  bool required) const {
        static const nlohmann::json empty = nlohmann::json::object();
        if (!obj.contains(key)) {
            if (required) fail(key, 0, "mode requires a \"" + key + "\" section");
            return empty;
        }
        if (!obj[key].is_object()) fail(key, 0, "\"" + key + "\" must be an object");
        return obj[key];
    }
};

}  // namespace detail

/// Parses and validates an experiment config.  The schema is strict: unknown
/// keys anywhere are rejected, required keys depend on the mode, and every
/// violation is reported with the config file line it occurs on.
inline ExperimentConfig parse_config_text(const std::string& text, const std::string& file) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(file + ":" + std::to_string(detail::line_of_offset(text, e.byte)) +
                          ": JSON parse error: " + e.what());
    }
    const detail::ConfigCursor cur{file, text};
    if (!j.is_object()) throw ConfigError(file + ":1: config root must be a JSON object");

    cur.reject_unknown(j,
                       {"schema_version", "mode", "params", "envelope", "solver", "study",
                        "radial", "out_dir", "seed"},
                       "the top-level config", 0);

    ExperimentConfig cfg;
    cfg.config_hash = hash_hex(fnv1a(text));

    if (!j.contains("schema_version"))
        cur.fail("schema_version", 0, "missing required key \"schema_version\"");
    if (!j["schema_version"].is_number_integer() ||
        j["schema_version"].get<int>() != config_schema_version)
        cur.fail("schema_version", 0,
                 "\"schema_version\" must be the integer " +
                     std::to_string(config_schema_version));
    cfg.schema_version = config_schema_version;

    if (!j.contains("mode") || !j["mode"].is_string())
        cur.fail("mode", 0, "missing or non-string \"mode\"");
    try {
        cfg.mode = parse_mode(j["mode"].get<std::string>());
    } catch (const ConfigError& e) {
        cur.fail("mode", 0, e.what());
    }

    if (j.contains("out_dir")) {
        if (!j["out_dir"].is_string()) cur.fail("out_dir", 0, "\"out_dir\" must be a string");
        cfg.out_dir = j["out_dir"].get<std::string>();
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
            cur.fail("seed", 0, "\"seed\" must be a nonnegative integer");
        if (j["seed"].is_number_integer() && j["seed"].get<std::int64_t>() < 0)
            cur.fail("seed", 0, "\"seed\" must be a nonnegative integer");
        cfg.seed = j["seed"].get<std::uint64_t>();
    }

    const bool wants_params = cfg.mode == RunMode::barriers || cfg.mode == RunMode::dirichlet ||
                              cfg.mode == RunMode::limit_study;

    for (const char* name : {"params", "envelope", "solver", "study", "radial"}) {
        const bool relevant = (std::string(name) == "params" && wants_params) ||
                              (std::string(name) == "envelope" && wants_params) ||
                              (std::string(name) == "solver" && cfg.mode == RunMode::dirichlet) ||
                              (std::string(name) == "study" && cfg.mode == RunMode::limit_study) ||
                              (std::string(name) == "radial" && cfg.mode == RunMode::nonexistence);
        if (j.contains(name) && !relevant)
            cur.fail(name, 0,
                     std::string("section \"") + name + "\" is not accepted in mode " +
                         mode_name(cfg.mode));
    }

    if (wants_params) {
        const auto& params = cur.section(j, "params", true);
        const std::size_t anchor = detail::offset_of_key(text, "params");
        cur.reject_unknown(params, {"a", "beta", "g_inf"}, "\"params\"", anchor);
        cfg.a = cur.number_array(params, "a", anchor);
        cfg.beta = cur.number(params, "beta", anchor);
        if (params.contains("g_inf")) cfg.g_inf = cur.number(params, "g_inf", anchor);
        if (!(cfg.beta > 0.0)) cur.fail("beta", anchor, "\"beta\" must be positive");

        const auto& env = cur.section(j, "envelope", true);
        const std::size_t eanchor = detail::offset_of_key(text, "envelope");
        cur.reject_unknown(env, {"c", "sign"}, "\"envelope\"", eanchor);
        cfg.c = cur.number(env, "c", eanchor);
        if (!(cfg.c >= 0.0)) cur.fail("c", eanchor, "\"c\" must be nonnegative");
        if (env.contains("sign")) {
            if (!env["sign"].is_string())
                cur.fail("sign", eanchor, "\"sign\" must be \"sub\", \"super\", or \"both\"");
            const std::string s = env["sign"].get<std::string>();
            if (s == "sub")
                cfg.sign = BarrierSide::sub;
            else if (s == "super")
                cfg.sign = BarrierSide::super;
            else if (s == "both")
                cfg.sign = BarrierSide::both;
            else
                cur.fail("sign", eanchor, "\"sign\" must be \"sub\", \"super\", or \"both\"");
        }
    }

    if (cfg.mode == RunMode::dirichlet) {
        const auto& solver = cur.section(j, "solver", true);
        const std::size_t anchor = detail::offset_of_key(text, "solver");
        cur.reject_unknown(solver, {"s_level", "h", "newton_tol", "max_iters"}, "\"solver\"",
                           anchor);
        cfg.s_level = cur.number(solver, "s_level", anchor);
        cfg.h = cur.number(solver, "h", anchor);
        cfg.newton_tol = cur.number_or(solver, "newton_tol", anchor, cfg.newton_tol);
        cfg.max_iters = cur.integer_or(solver, "max_iters", anchor, cfg.max_iters);
        if (!(cfg.s_level > 0.0)) cur.fail("s_level", anchor, "\"s_level\" must be positive");
        if (!(cfg.h > 0.0)) cur.fail("h", anchor, "\"h\" must be positive");
        if (!(cfg.newton_tol > 0.0))
            cur.fail("newton_tol", anchor, "\"newton_tol\" must be positive");
        if (cfg.max_iters < 1) cur.fail("max_iters", anchor, "\"max_iters\" must be at least 1");
    }

    if (cfg.mode == RunMode::limit_study) {
        const auto& study = cur.section(j, "study", true);
        const std::size_t anchor = detail::offset_of_key(text, "study");
        cur.reject_unknown(study,
                           {"s_levels", "probe_radii", "h_fine", "h_coarse", "h_switch_level"},
                           "\"study\"", anchor);
        cfg.s_levels = cur.number_array(study, "s_levels", anchor);
        cfg.probe_radii = cur.number_array(study, "probe_radii", anchor);
        cfg.h_fine = cur.number_or(study, "h_fine", anchor, cfg.h_fine);
        cfg.h_coarse = cur.number_or(study, "h_coarse", anchor, cfg.h_coarse);
        cfg.h_switch_level = cur.number_or(study, "h_switch_level", anchor, cfg.h_switch_level);
        if (!(cfg.h_fine > 0.0) || !(cfg.h_coarse > 0.0))
            cur.fail("h_fine", anchor, "grid spacings must be positive");
    }

    if (cfg.mode == RunMode::nonexistence) {
        const auto& radial = cur.section(j, "radial", true);
        const std::size_t anchor = detail::offset_of_key(text, "radial");
        cur.reject_unknown(radial, {"n", "g0", "g_inf", "beta"}, "\"radial\"", anchor);
        cfg.radial_n = cur.integer_or(radial, "n", anchor, 3);
        cfg.radial_g0 = cur.number(radial, "g0", anchor);
        cfg.radial_g_inf = cur.number(radial, "g_inf", anchor);
        cfg.radial_beta = cur.number(radial, "beta", anchor);
        if (!(cfg.radial_beta > 0.0)) cur.fail("beta", anchor, "\"beta\" must be positive");
    }

    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    return parse_config_text(read_bytes(path), path.filename().string());
}

}  // namespace lml
