#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <limits>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lml/barrier.hpp"
#include "lml/errors.hpp"
#include "lml/newton_fd.hpp"
#include "lml/radial.hpp"
#include "lml/version.hpp"

namespace lml {

/// 17 significant digits: the shortest width that round-trips every double.
inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

namespace detail {

inline std::string render_csv(const CsvTable& table) {
    std::string out;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (i) out += ',';
        out += table.header[i];
    }
    out += '\n';
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size())
            throw InternalError("render_csv: row width " + std::to_string(row.size()) +
                                " does not match header width " +
                                std::to_string(table.header.size()));
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += format_g17(row[i]);
        }
        out += '\n';
    }
    return out;
}

}  // namespace detail

/// Binary mode keeps the LF line endings literal on every platform.
inline void write_bytes(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("write_bytes: cannot open " + path.string() + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw ConfigError("write_bytes: short write to " + path.string());
}

inline std::string read_bytes(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("read_bytes: cannot open " + path.string());
    std::string out((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return out;
}

inline void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    write_bytes(path, detail::render_csv(table));
}

inline CsvTable read_csv(const std::filesystem::path& path) {
    const std::string text = read_bytes(path);
    CsvTable table;
    std::size_t pos = 0;
    bool first = true;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string_view line(text.data() + pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t c = 0;
        while (true) {
            std::size_t comma = line.find(',', c);
            cells.emplace_back(line.substr(c, comma - c));
            if (comma == std::string_view::npos) break;
            c = comma + 1;
        }
        if (first) {
            table.header = std::move(cells);
            first = false;
            continue;
        }
        std::vector<double> row(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i) {
            char* end = nullptr;
            row[i] = std::strtod(cells[i].c_str(), &end);
            if (end == cells[i].c_str())
                throw ConfigError("read_csv: non-numeric cell '" + cells[i] + "' in " +
                                  path.string());
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

// Column orders are part of the interface; consumers parse by position.

/// Profile table (s, W, U); barriers add the first-axis radius r with
/// s = a_1 r^2 / 2 and the barrier value there.
inline CsvTable profile_table(const Profile& p) {
    CsvTable t;
    t.header = {"s", "W", "U"};
    for (std::size_t k = 0; k < p.t.size(); ++k)
        t.rows.push_back({p.s[k], p.w[k], p.s[k] + p.integral[k]});
    return t;
}

inline CsvTable barrier_table(const BarrierFunction& b) {
    CsvTable t;
    t.header = {"s", "W", "U", "r", "u_r"};
    const Profile& p = b.profile;
    const double a1 = b.params.a.values[0];
    for (std::size_t k = 0; k < p.t.size(); ++k) {
        const double s = p.s[k];
        const double r = std::sqrt(2.0 * s / a1);
        const std::array<double, 3> xr{r, 0.0, 0.0};
        t.rows.push_back({s, p.w[k], b.U(s), r, b.value(xr)});
    }
    return t;
}

inline CsvTable grid_table(const GridSolution& sol) {
    CsvTable t;
    t.header = {"x", "y", "z", "u"};
    for (std::size_t pnode = 0; pnode < sol.grid.size(); ++pnode) {
        const auto x = sol.grid.position(pnode);
        t.rows.push_back({x[0], x[1], x[2], sol.u[pnode]});
    }
    return t;
}

inline CsvTable rate_fit_table(const RateFit& fit) {
    CsvTable t;
    t.header = {"exponent", "log_corrected", "r2", "intercept", "window_lo", "window_hi",
                "npoints"};
    t.rows.push_back({fit.exponent, fit.log_corrected ? 1.0 : 0.0, fit.r2, fit.intercept,
                      fit.window_lo, fit.window_hi, static_cast<double>(fit.npoints)});
    return t;
}

inline CsvTable radial_table(const RadialSolution& sol, int stride = 1) {
    CsvTable t;
    t.header = {"r", "W", "u0", "d"};
    const Profile& p = sol.profile;
    for (std::size_t k = 0; k < p.t.size(); k += static_cast<std::size_t>(stride)) {
        const double r = p.s[k];
        t.rows.push_back({r, p.w[k], sol.u0(r), sol.growth_dev(r)});
    }
    return t;
}

namespace detail {

inline void put_u32_le(std::string& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

inline void put_f64_le(std::string& out, double v) {
    const auto u = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((u >> (8 * b)) & 0xff));
}

inline std::uint32_t get_u32_le(std::string_view in, std::size_t at) {
    std::uint32_t v = 0;
    for (int b = 3; b >= 0; --b)
        v = (v << 8) | static_cast<std::uint8_t>(in[at + static_cast<std::size_t>(b)]);
    return v;
}

inline double get_f64_le(std::string_view in, std::size_t at) {
    std::uint64_t v = 0;
    for (int b = 7; b >= 0; --b)
        v = (v << 8) | static_cast<std::uint8_t>(in[at + static_cast<std::size_t>(b)]);
    return std::bit_cast<double>(v);
}

}  // namespace detail

/// Compact dump of a grid solution: header (three u32 box dimensions, f64 h,
/// f64 s_level), then one little-endian f64 per box slot in index order
/// (x-major), NaN at slots outside the discrete domain.
inline void write_grid_dump(const std::filesystem::path& path, const GridSolution& sol) {
    const auto& g = sol.grid;
    const std::uint32_t nx = 2u * static_cast<std::uint32_t>(g.ext[0]) + 1u;
    const std::uint32_t ny = 2u * static_cast<std::uint32_t>(g.ext[1]) + 1u;
    const std::uint32_t nz = 2u * static_cast<std::uint32_t>(g.ext[2]) + 1u;
    std::string out;
    out.reserve(16 + 8ull * nx * ny * nz);
    detail::put_u32_le(out, nx);
    detail::put_u32_le(out, ny);
    detail::put_u32_le(out, nz);
    detail::put_f64_le(out, g.h);
    detail::put_f64_le(out, g.s_level);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::uint32_t i = 0; i < nx; ++i)
        for (std::uint32_t j = 0; j < ny; ++j)
            for (std::uint32_t k = 0; k < nz; ++k) {
                const std::int32_t id =
                    g.node_at(static_cast<int>(i) - g.ext[0], static_cast<int>(j) - g.ext[1],
                              static_cast<int>(k) - g.ext[2]);
                detail::put_f64_le(out, id >= 0 ? sol.u[static_cast<std::size_t>(id)] : nan);
            }
    write_bytes(path, out);
}

struct GridDump {
    std::uint32_t nx = 0, ny = 0, nz = 0;
    double h = 0.0, s_level = 0.0;
    std::vector<double> values;  // nx*ny*nz, index order, NaN outside the domain
};

inline GridDump read_grid_dump(const std::filesystem::path& path) {
    const std::string in = read_bytes(path);
    if (in.size() < 28) throw ConfigError("read_grid_dump: truncated header in " + path.string());
    GridDump d;
    d.nx = detail::get_u32_le(in, 0);
    d.ny = detail::get_u32_le(in, 4);
    d.nz = detail::get_u32_le(in, 8);
    d.h = detail::get_f64_le(in, 12);
    d.s_level = detail::get_f64_le(in, 20);
    const std::size_t count = std::size_t(d.nx) * d.ny * d.nz;
    if (in.size() != 28 + 8 * count)
        throw ConfigError("read_grid_dump: payload size mismatch in " + path.string());
    d.values.resize(count);
    for (std::size_t k = 0; k < count; ++k) d.values[k] = detail::get_f64_le(in, 28 + 8 * k);
    return d;
}

inline std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (const char c : bytes) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string hash_file(const std::filesystem::path& path) {
    return hash_hex(fnv1a(read_bytes(path)));
}

inline std::string iso8601_utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct ManifestEntry {
    std::string path;  // relative to the run directory
    std::string hash;  // FNV-1a over the file bytes
};

struct CheckResult {
    std::string name;
    bool pass = false;
};

/// Persistent record of one CLI run.  Timestamps are the only
/// non-reproducible fields; everything else is a pure function of the
/// config and seed.
struct RunRecord {
    std::string mode;
    int schema_version = config_schema_version;
    std::string lml_version = version_string;
    std::string config_hash;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string started_at;
    std::string finished_at;
    std::vector<ManifestEntry> manifest;
    std::vector<CheckResult> checks;

    bool all_passed() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

inline nlohmann::json run_record_json(const RunRecord& rec) {
    nlohmann::json j;
    j["mode"] = rec.mode;
    j["schema_version"] = rec.schema_version;
    j["lml_version"] = rec.lml_version;
    j["config_hash"] = rec.config_hash;
    j["seed"] = rec.seed;
    j["threads"] = rec.threads;
    j["started_at"] = rec.started_at;
    j["finished_at"] = rec.finished_at;
    j["manifest"] = nlohmann::json::array();
    for (const auto& m : rec.manifest) j["manifest"].push_back({{"path", m.path}, {"hash", m.hash}});
    j["checks"] = nlohmann::json::array();
    for (const auto& c : rec.checks) j["checks"].push_back({{"name", c.name}, {"pass", c.pass}});
    return j;
}

inline void write_run_record(const std::filesystem::path& dir, const RunRecord& rec) {
    write_bytes(dir / "run_record.json", run_record_json(rec).dump(2) + "\n");
}

/// Reads a run directory's record and re-verifies the manifest: every listed
/// file must exist and hash to its recorded value.
inline RunRecord load_run_record(const std::filesystem::path& dir) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_bytes(dir / "run_record.json"));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("load_run_record: " + dir.string() + ": " + e.what());
    }
    RunRecord rec;
    try {
        rec.mode = j.at("mode").get<std::string>();
        rec.schema_version = j.at("schema_version").get<int>();
        rec.lml_version = j.at("lml_version").get<std::string>();
        rec.config_hash = j.at("config_hash").get<std::string>();
        rec.seed = j.at("seed").get<std::uint64_t>();
        rec.threads = j.at("threads").get<int>();
        rec.started_at = j.at("started_at").get<std::string>();
        rec.finished_at = j.at("finished_at").get<std::string>();
        for (const auto& m : j.at("manifest"))
            rec.manifest.push_back(
                {m.at("path").get<std::string>(), m.at("hash").get<std::string>()});
        for (const auto& c : j.at("checks"))
            rec.checks.push_back({c.at("name").get<std::string>(), c.at("pass").get<bool>()});
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("load_run_record: malformed record in " + dir.string() + ": " +
                          e.what());
    }
    for (const auto& m : rec.manifest) {
        const auto p = dir / m.path;
        if (!std::filesystem::exists(p))
            throw ConfigError("load_run_record: manifest file missing: " + p.string());
        const std::string h = hash_file(p);
        if (h != m.hash)
            throw ConfigError("load_run_record: hash mismatch for " + p.string() + ": recorded " +
                              m.hash + ", actual " + h);
    }
    return rec;
}

}  // namespace lml
