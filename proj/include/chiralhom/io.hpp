#pragma once

#include "chiralhom/correctors.hpp"
#include "chiralhom/energy.hpp"
#include "chiralhom/magnetization.hpp"
#include "chiralhom/microstructure.hpp"
#include "chiralhom/minimize.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

namespace chiralhom {

using json = nlohmann::json;

inline json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

/// Row-major nested arrays.
inline json to_json(const Mat3& m) {
    json rows = json::array();
    for (int i = 0; i < 3; ++i) rows.push_back(json::array({m(i, 0), m(i, 1), m(i, 2)}));
    return rows;
}

inline json to_json(const Dims& d) { return json::array({d.nx, d.ny, d.nz}); }

inline json to_json(const Phase& p) {
    return {{"a", p.a}, {"kappa", p.kappa}, {"m_sat", p.m_sat}, {"k1", p.k1}, {"easy_axis", to_json(p.easy_axis)}};
}

inline json to_json(const Moments& m) {
    return {{"E[a]", m.mean_a},
            {"E[1/a]", m.mean_inv_a},
            {"E[1/a]^-1", m.harmonic_a()},
            {"E[kappa]", m.mean_kappa},
            {"E[kappa/a]", m.mean_kappa_over_a},
            {"E[kappa^2/a]", m.mean_kappa_sq_over_a},
            {"E[M]", m.mean_m},
            {"E[M^2]", m.mean_m_sq},
            {"E[k1]", m.mean_k1},
            {"E[k1 e e]", to_json(m.mean_k1_ee)}};
}

inline json to_json(const EffectiveModel& m) {
    return {{"a_ex", to_json(m.a_ex)},
            {"a_ex_second_route", to_json(m.a_ex_alt)},
            {"k_dmi", to_json(m.k_dmi)},
            {"d_kappa", to_json(m.d_kappa)},
            {"d_m", to_json(m.d_m)},
            {"m_mean", m.m_mean},
            {"mu0", m.mu0},
            {"h_applied", to_json(m.h_applied)},
            {"corrector_mean_norm", m.corrector_mean_norm},
            {"moments", to_json(m.moments)}};
}

inline json to_json(const CorrectorSet& s) {
    json out;
    out["form"] = s.form == CorrectorSet::Form::Rve ? "rve" : "laminate";
    out["tol"] = s.tol;
    out["seed"] = s.seed;
    if (s.form == CorrectorSet::Form::Rve) {
        out["dims"] = to_json(s.dims);
        for (int k = 0; k < 3; ++k) {
            const auto& r = s.rve[k];
            out["solves"][std::string(name(r.kind))] = {{"residual", r.residual}, {"iterations", r.iterations}};
        }
    } else {
        auto list = [](const std::vector<Mat3>& v) {
            json a = json::array();
            for (const auto& m : v) a.push_back(to_json(m));
            return a;
        };
        out["theta_a"] = list(s.theta_a);
        out["theta_kappa"] = list(s.theta_kappa);
        out["theta_m"] = list(s.theta_m);
    }
    return out;
}

inline json to_json(const EnergyBreakdown& e) {
    return {{"model", e.model},       {"exchange", e.exchange}, {"dmi", e.dmi},     {"stray", e.stray},
            {"anisotropy", e.anisotropy}, {"zeeman", e.zeeman},     {"total", e.total}};
}

inline json to_json(const HelixFit& f) {
    return {{"theta0", f.theta0}, {"q", f.q}, {"rms_residual", f.rms_residual}, {"max_out_of_plane", f.max_out_of_plane}};
}

/// Writes through a temporary file in the same directory and renames it into place.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    if (ec) throw ConfigError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw ConfigError("cannot open " + tmp.string() + " for writing");
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!f) throw ConfigError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) throw ConfigError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open " + path.string());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

/// Shortest decimal representation that round-trips a double.
inline std::string fmt(double v) {
    if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
    return os.str();
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_atomic(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------------------------
// Binary magnetization grids: "CHMG", u32 version, u64 nx ny nz, f64 h, then nx*ny*nz triples
// of f64 in cell order (z fastest). Little-endian throughout.

namespace detail {
inline constexpr char kGridMagic[4] = {'C', 'H', 'M', 'G'};
inline constexpr std::uint32_t kGridVersion = 1;

template <typename T>
void put(std::string& out, T v) {
    static_assert(std::endian::native == std::endian::little, "binary grids assume a little-endian host");
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw ConfigError("binary grid: truncated file");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}
}  // namespace detail

inline std::string encode_grid(const Magnetization& m) {
    std::string out(detail::kGridMagic, 4);
    detail::put<std::uint32_t>(out, detail::kGridVersion);
    detail::put<std::uint64_t>(out, m.dims().nx);
    detail::put<std::uint64_t>(out, m.dims().ny);
    detail::put<std::uint64_t>(out, m.dims().nz);
    detail::put<double>(out, m.h());
    for (const auto& v : m.values())
        for (int i = 0; i < 3; ++i) detail::put<double>(out, v[i]);
    return out;
}

inline Magnetization decode_grid(const std::string& in) {
    if (in.size() < 4 || std::memcmp(in.data(), detail::kGridMagic, 4) != 0)
        throw ConfigError("binary grid: bad magic");
    std::size_t pos = 4;
    const auto version = detail::get<std::uint32_t>(in, pos);
    if (version != detail::kGridVersion) throw ConfigError("binary grid: unsupported version " + std::to_string(version));
    Dims d;
    d.nx = detail::get<std::uint64_t>(in, pos);
    d.ny = detail::get<std::uint64_t>(in, pos);
    d.nz = detail::get<std::uint64_t>(in, pos);
    const double h = detail::get<double>(in, pos);
    if (d.nx == 0 || d.ny == 0 || d.nz == 0) throw ConfigError("binary grid: zero dimension");
    if ((in.size() - pos) != d.size() * 3 * sizeof(double)) throw ConfigError("binary grid: payload size mismatch");
    std::vector<Vec3> v(d.size());
    for (auto& x : v)
        for (int i = 0; i < 3; ++i) x[i] = detail::get<double>(in, pos);
    return Magnetization(d, h, std::move(v));
}

inline void write_grid(const std::filesystem::path& path, const Magnetization& m) { write_atomic(path, encode_grid(m)); }
inline Magnetization read_grid(const std::filesystem::path& path) { return decode_grid(read_file(path)); }

// ---------------------------------------------------------------------------------------------
// CSV exports

inline std::string realization_csv(const LaminateRealization& r) {
    std::string out = "breakpoint,phase_index,a,kappa,m_sat\n";
    for (std::size_t k = 0; k < r.layers(); ++k) {
        const Phase& p = r.table.phases[r.phase_index[k]];
        out += fmt(r.breakpoints[k]) + "," + std::to_string(r.phase_index[k]) + "," + fmt(p.a) + "," + fmt(p.kappa) +
               "," + fmt(p.m_sat) + "\n";
    }
    out += fmt(r.end()) + ",,,,\n";
    return out;
}

inline std::string trace_csv(const MinimizeTrace& t) {
    std::string out = "iter,energy,grad_norm,step\n";
    for (const auto& row : t.rows)
        out += std::to_string(row.iter) + "," + fmt(row.energy) + "," + fmt(row.grad_norm) + "," + fmt(row.step) + "\n";
    return out;
}

/// One row per cell of a column: z, m1, m2, m3.
inline std::string column_csv(const Magnetization& m) {
    std::string out = "z,m1,m2,m3\n";
    for (std::size_t c = 0; c < m.size(); ++c)
        out += fmt(m.center(c).z()) + "," + fmt(m[c].x()) + "," + fmt(m[c].y()) + "," + fmt(m[c].z()) + "\n";
    return out;
}

}  // namespace chiralhom
