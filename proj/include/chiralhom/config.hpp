#pragma once

// Experiment configuration documents (schema_version 1). See README.md for the field list.

#include "chiralhom/io.hpp"
#include "chiralhom/microstructure.hpp"
#include "chiralhom/phase.hpp"

#include <json.hpp>

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace chiralhom {

struct SolverConfig {
    double cg_tol = 1e-10;
    std::size_t cg_max_iter = 0;
    double grad_tol = 1e-6;
    std::size_t max_iters = 200000;
    bool precondition = true;
};

struct CheckerboardConfig {
    double cell_size = 1.0;
    Dims dims{16, 16, 16};
};

struct RunConfig {
    static constexpr int kSchemaVersion = 1;

    std::string experiment;
    LaminateSpec laminate;
    std::optional<CheckerboardConfig> checkerboard;

    // column / grid geometry
    std::size_t cells = 512;
    double length = 64.0;

    // Gamma sweep: eps = length / 2^k for k in eps_levels, or explicit epsilons
    std::vector<double> epsilons;
    std::size_t cells_per_layer = 32;
    bool periodic_anchor = false;

    // validate-laminate
    std::size_t rve_layers = 64;
    std::size_t rve_cells_per_layer = 1;

    std::vector<std::uint64_t> seeds{1};
    SolverConfig solver;
    double mu0 = 1.0;
    Vec3 h_applied = Vec3::Zero();

    // Birkhoff averaging
    std::vector<double> windows;  // in mean layer widths
    std::vector<Quantity> quantities{kAllQuantities.begin(), kAllQuantities.end()};

    // energy-eval
    std::optional<std::string> magnetization_file;
    std::string init = "random";
    double eps = 0.0;  // 0: homogenized energy only

    std::string output_dir = "out";
    unsigned threads = 1;
    bool verbose = false;

    json source;  // the document as read, echoed into reports
};

namespace detail {

inline const json& require_key(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + ": missing required field '" + key + "'");
    return j.at(key);
}

template <typename T>
T number(const json& j, const std::string& where) {
    if (!j.is_number()) throw ConfigError(where + ": expected a number");
    return j.get<T>();
}

inline Vec3 vec3(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) throw ConfigError(where + ": expected an array of three numbers");
    return {number<double>(j[0], where), number<double>(j[1], where), number<double>(j[2], where)};
}

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError(where + ": unknown field '" + it.key() + "'");
}

inline Dims dims(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) throw ConfigError(where + ": expected [nx, ny, nz]");
    Dims d;
    for (int i = 0; i < 3; ++i) {
        if (!j[i].is_number_integer() || j[i].get<long long>() < 1)
            throw ConfigError(where + ": dimensions must be positive integers");
    }
    d.nx = j[0].get<std::size_t>();
    d.ny = j[1].get<std::size_t>();
    d.nz = j[2].get<std::size_t>();
    return d;
}

}  // namespace detail

inline RunConfig parse_config(const json& doc) {
    using namespace detail;
    if (!doc.is_object()) throw ConfigError("config: top level must be an object");
    check_keys(doc,
               {"schema_version", "experiment", "description", "phases", "bounds", "checkerboard", "grid", "eps_levels",
                "epsilons", "cells_per_layer", "periodic_anchor", "rve", "seeds", "solver", "mu0", "h_applied",
                "birkhoff", "energy_eval", "output_dir"},
               "config");
    RunConfig cfg;
    cfg.source = doc;
    const int version = number<int>(require_key(doc, "schema_version", "config"), "schema_version");
    if (version != RunConfig::kSchemaVersion)
        throw ConfigError("config: unsupported schema_version " + std::to_string(version));
    const json& exp = require_key(doc, "experiment", "config");
    if (!exp.is_string()) throw ConfigError("config: experiment must be a string");
    cfg.experiment = exp.get<std::string>();

    // phases and layer widths
    const json& phases = require_key(doc, "phases", "config");
    if (!phases.is_array() || phases.empty()) throw ConfigError("config: phases must be a non-empty array");
    PhaseTable table;
    std::vector<WidthLaw> widths;
    for (std::size_t i = 0; i < phases.size(); ++i) {
        const std::string where = "phases[" + std::to_string(i) + "]";
        const json& p = phases[i];
        if (!p.is_object()) throw ConfigError(where + ": expected an object");
        check_keys(p, {"a", "kappa", "m_sat", "k1", "easy_axis", "probability", "width", "name"}, where);
        Phase ph;
        ph.a = number<double>(require_key(p, "a", where), where + ".a");
        ph.kappa = p.contains("kappa") ? number<double>(p["kappa"], where + ".kappa") : 0.0;
        ph.m_sat = p.contains("m_sat") ? number<double>(p["m_sat"], where + ".m_sat") : 0.0;
        ph.k1 = p.contains("k1") ? number<double>(p["k1"], where + ".k1") : 0.0;
        if (p.contains("easy_axis")) ph.easy_axis = vec3(p["easy_axis"], where + ".easy_axis");
        table.phases.push_back(ph);
        table.probabilities.push_back(number<double>(require_key(p, "probability", where), where + ".probability"));
        WidthLaw w;
        if (p.contains("width")) {
            const json& wj = p["width"];
            check_keys(wj, {"law", "mean"}, where + ".width");
            const std::string law = wj.value("law", "fixed");
            if (law == "fixed") w.kind = WidthLaw::Kind::Fixed;
            else if (law == "exponential") w.kind = WidthLaw::Kind::Exponential;
            else throw ConfigError(where + ".width.law: expected 'fixed' or 'exponential'");
            w.mean = number<double>(require_key(wj, "mean", where + ".width"), where + ".width.mean");
        }
        widths.push_back(w);
    }
    if (doc.contains("bounds")) {
        const json& b = doc["bounds"];
        check_keys(b, {"c_ex", "C_ex", "C_dmi", "C_sat"}, "bounds");
        table.bounds.c_ex = number<double>(require_key(b, "c_ex", "bounds"), "bounds.c_ex");
        table.bounds.C_ex = number<double>(require_key(b, "C_ex", "bounds"), "bounds.C_ex");
        table.bounds.C_dmi = number<double>(require_key(b, "C_dmi", "bounds"), "bounds.C_dmi");
        table.bounds.C_sat = number<double>(require_key(b, "C_sat", "bounds"), "bounds.C_sat");
    } else {
        table.bounds = bounds_for(table.phases);
    }
    cfg.laminate = LaminateSpec{table, widths};
    cfg.laminate.validate();

    if (doc.contains("checkerboard")) {
        const json& c = doc["checkerboard"];
        check_keys(c, {"cell_size", "dims"}, "checkerboard");
        CheckerboardConfig cb;
        if (c.contains("cell_size")) cb.cell_size = number<double>(c["cell_size"], "checkerboard.cell_size");
        if (c.contains("dims")) cb.dims = dims(c["dims"], "checkerboard.dims");
        if (!(cb.cell_size > 0.0)) throw ConfigError("checkerboard.cell_size must be positive");
        cfg.checkerboard = cb;
    }

    if (doc.contains("grid")) {
        const json& g = doc["grid"];
        check_keys(g, {"cells", "length"}, "grid");
        if (g.contains("cells")) {
            if (!g["cells"].is_number_integer() || g["cells"].get<long long>() < 1)
                throw ConfigError("grid.cells must be a positive integer");
            cfg.cells = g["cells"].get<std::size_t>();
        }
        if (g.contains("length")) cfg.length = number<double>(g["length"], "grid.length");
        if (!(cfg.length > 0.0)) throw ConfigError("grid.length must be positive");
    }

    if (doc.contains("eps_levels") && doc.contains("epsilons"))
        throw ConfigError("config: give either eps_levels or epsilons, not both");
    if (doc.contains("eps_levels")) {
        for (const auto& k : doc["eps_levels"]) {
            if (!k.is_number_integer()) throw ConfigError("eps_levels: expected integers");
            cfg.epsilons.push_back(cfg.length / std::ldexp(1.0, k.get<int>()));
        }
    }
    if (doc.contains("epsilons"))
        for (const auto& e : doc["epsilons"]) cfg.epsilons.push_back(number<double>(e, "epsilons"));
    for (std::size_t i = 0; i < cfg.epsilons.size(); ++i) {
        if (!(cfg.epsilons[i] > 0.0)) throw ConfigError("eps list: values must be positive");
        if (i > 0 && !(cfg.epsilons[i] < cfg.epsilons[i - 1]))
            throw ConfigError("eps list: values must be strictly decreasing");
    }
    if (doc.contains("cells_per_layer")) {
        if (!doc["cells_per_layer"].is_number_integer() || doc["cells_per_layer"].get<long long>() < 4)
            throw ConfigError("cells_per_layer must be an integer >= 4 (grid must satisfy h <= eps*w_min/4)");
        cfg.cells_per_layer = doc["cells_per_layer"].get<std::size_t>();
    }
    if (doc.contains("periodic_anchor")) cfg.periodic_anchor = doc["periodic_anchor"].get<bool>();

    if (doc.contains("rve")) {
        const json& r = doc["rve"];
        check_keys(r, {"layers", "cells_per_layer"}, "rve");
        if (r.contains("layers")) cfg.rve_layers = r["layers"].get<std::size_t>();
        if (r.contains("cells_per_layer")) cfg.rve_cells_per_layer = r["cells_per_layer"].get<std::size_t>();
        if (cfg.rve_layers < 1 || cfg.rve_cells_per_layer < 1) throw ConfigError("rve: sizes must be positive");
    }

    if (doc.contains("seeds")) {
        const json& s = doc["seeds"];
        if (!s.is_array() || s.empty()) throw ConfigError("seeds: expected a non-empty array");
        cfg.seeds.clear();
        for (const auto& v : s) {
            if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError("seeds: expected nonnegative integers");
            cfg.seeds.push_back(v.get<std::uint64_t>());
        }
    }

    if (doc.contains("solver")) {
        const json& s = doc["solver"];
        check_keys(s, {"cg_tol", "cg_max_iter", "grad_tol", "max_iters", "precondition"}, "solver");
        if (s.contains("cg_tol")) cfg.solver.cg_tol = number<double>(s["cg_tol"], "solver.cg_tol");
        if (s.contains("cg_max_iter")) cfg.solver.cg_max_iter = s["cg_max_iter"].get<std::size_t>();
        if (s.contains("grad_tol")) cfg.solver.grad_tol = number<double>(s["grad_tol"], "solver.grad_tol");
        if (s.contains("max_iters")) cfg.solver.max_iters = s["max_iters"].get<std::size_t>();
        if (s.contains("precondition")) cfg.solver.precondition = s["precondition"].get<bool>();
        if (!(cfg.solver.cg_tol > 0.0) || !(cfg.solver.grad_tol > 0.0) || cfg.solver.max_iters < 1)
            throw ConfigError("solver: tolerances and iteration limits must be positive");
    }
    if (doc.contains("mu0")) cfg.mu0 = number<double>(doc["mu0"], "mu0");
    if (!(cfg.mu0 >= 0.0)) throw ConfigError("mu0 must be nonnegative");
    if (doc.contains("h_applied")) cfg.h_applied = vec3(doc["h_applied"], "h_applied");

    if (doc.contains("birkhoff")) {
        const json& b = doc["birkhoff"];
        check_keys(b, {"windows", "quantities"}, "birkhoff");
        if (b.contains("windows"))
            for (const auto& w : b["windows"]) {
                const double t = number<double>(w, "birkhoff.windows");
                if (!(t > 0.0)) throw ConfigError("birkhoff.windows: values must be positive");
                cfg.windows.push_back(t);
            }
        if (b.contains("quantities")) {
            cfg.quantities.clear();
            for (const auto& q : b["quantities"]) {
                const auto parsed = parse_quantity(q.get<std::string>());
                if (!parsed) throw ConfigError("birkhoff.quantities: unknown quantity '" + q.get<std::string>() + "'");
                cfg.quantities.push_back(*parsed);
            }
        }
    }
    if (cfg.windows.empty()) cfg.windows = {10.0, 100.0, 1000.0, 10000.0};

    if (doc.contains("energy_eval")) {
        const json& e = doc["energy_eval"];
        check_keys(e, {"magnetization", "init", "eps"}, "energy_eval");
        if (e.contains("magnetization")) cfg.magnetization_file = e["magnetization"].get<std::string>();
        if (e.contains("init")) cfg.init = e["init"].get<std::string>();
        if (e.contains("eps")) cfg.eps = number<double>(e["eps"], "energy_eval.eps");
        if (cfg.init != "random" && cfg.init != "helix" && cfg.init != "uniform")
            throw ConfigError("energy_eval.init: expected 'random', 'helix' or 'uniform'");
    }
    if (doc.contains("output_dir")) cfg.output_dir = doc["output_dir"].get<std::string>();
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }
    try {
        return parse_config(doc);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

}  // namespace chiralhom
