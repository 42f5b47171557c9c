#pragma once

#include "chiralhom/config.hpp"
#include "chiralhom/correctors.hpp"
#include "chiralhom/energy.hpp"
#include "chiralhom/io.hpp"
#include "chiralhom/minimize.hpp"
#include "chiralhom/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace chiralhom {

/// One comparison in a report. pass is a pure function of the stored fields:
///   "abs": |value - target| <= tolerance,  "max": value <= target,  "min": value >= target.
struct Check {
    std::string name;
    std::string formula;
    double value = 0.0;
    double target = 0.0;
    double tolerance = 0.0;
    std::string comparison = "abs";
    bool skipped = false;
    std::string note;

    bool pass() const {
        if (skipped) return true;
        if (!std::isfinite(value)) return false;
        if (comparison == "max") return value <= target;
        if (comparison == "min") return value >= target;
        return std::abs(value - target) <= tolerance;
    }
};

inline Check check_abs(std::string name, std::string formula, double value, double target, double tol) {
    return {std::move(name), std::move(formula), value, target, tol, "abs", false, {}};
}
inline Check check_max(std::string name, std::string formula, double value, double bound) {
    return {std::move(name), std::move(formula), value, bound, 0.0, "max", false, {}};
}
inline Check check_min(std::string name, std::string formula, double value, double bound) {
    return {std::move(name), std::move(formula), value, bound, 0.0, "min", false, {}};
}

inline json to_json(const Check& c) {
    json j = {{"name", c.name},           {"formula", c.formula},       {"value", c.value},
              {"target", c.target},       {"tolerance", c.tolerance},   {"comparison", c.comparison},
              {"pass", c.pass()},         {"skipped", c.skipped}};
    if (!c.note.empty()) j["note"] = c.note;
    return j;
}

struct RunReport {
    std::string experiment;
    json config;
    json metrics = json::object();
    std::vector<Check> checks;
    json timings = json::object();

    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass(); });
    }

    json to_json() const {
        json c = json::array();
        for (const auto& ch : checks) c.push_back(chiralhom::to_json(ch));
        return {{"experiment", experiment}, {"config", config},   {"metrics", metrics},
                {"checks", c},              {"pass", passed()},   {"timings", timings}};
    }
};

/// Largest entrywise difference divided by the largest entry of the reference, or by `floor` when
/// that is larger (absolute if both vanish).
inline double matrix_rel_error(const Mat3& value, const Mat3& reference, double floor = 0.0) {
    const double scale = std::max(reference.cwiseAbs().maxCoeff(), floor);
    const double diff = (value - reference).cwiseAbs().maxCoeff();
    return scale > 0.0 ? diff / scale : diff;
}

/// Effective tensors of a laminate normal to e3 written directly from the moments.
inline EffectiveModel laminate_closed_form(const Moments& mo, double mu0 = 1.0, const Vec3& h_applied = Vec3::Zero()) {
    const double H = mo.harmonic_a();
    EffectiveModel m;
    m.moments = mo;
    m.mu0 = mu0;
    m.h_applied = h_applied;
    m.m_mean = mo.mean_m;
    m.a_ex = Vec3(mo.mean_a, mo.mean_a, H).asDiagonal();
    m.a_ex_alt = m.a_ex;
    m.k_dmi = Vec3(mo.mean_kappa, mo.mean_kappa, mo.mean_kappa_over_a * H).asDiagonal();
    m.d_kappa = Mat3::Zero();
    m.d_kappa(2, 2) = mo.mean_kappa_sq_over_a - mo.mean_kappa_over_a * mo.mean_kappa_over_a * H;
    m.d_m = Mat3::Zero();
    m.d_m(2, 2) = mo.mean_m_sq - mo.mean_m * mo.mean_m;
    return m;
}

/// Column-like grid field whose cell faces coincide with the layer interfaces. Every layer of the
/// realization (from the one containing the origin onward) spans round(w / h) cells.
inline GridField aligned_laminate_grid(const LaminateRealization& r, const std::vector<double>& layer_widths,
                                       std::size_t layers, double h, std::size_t nxy = 1) {
    if (layers < 1) throw ConfigError("aligned laminate: need at least one layer");
    std::vector<std::size_t> column;
    const std::size_t first = r.layer_at(0.0);
    if (first + layers > r.layers()) throw ConfigError("aligned laminate: realization has too few layers");
    for (std::size_t k = first; k < first + layers; ++k) {
        const double w = layer_widths[r.phase_index[k]];
        const double cells = w / h;
        const auto n = static_cast<std::size_t>(std::llround(cells));
        if (n < 1 || std::abs(cells - static_cast<double>(n)) > 1e-9 * cells)
            throw ConfigError("aligned laminate: layer width is not a multiple of the cell size");
        column.insert(column.end(), n, r.phase_index[k]);
    }
    GridField g;
    g.dims = Dims{nxy, nxy, column.size()};
    g.h = h;
    g.seed = r.seed;
    for (std::size_t c = 0; c < g.dims.size(); ++c) {
        const std::size_t idx = column[g.dims.coord(c, 2)];
        g.phase_index.push_back(idx);
        g.cells.push_back(r.table.phases[idx]);
    }
    return g;
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline std::vector<double> fixed_widths(const LaminateSpec& spec) {
    std::vector<double> w;
    for (const auto& law : spec.widths) {
        if (law.kind != WidthLaw::Kind::Fixed) return {};
        w.push_back(law.mean);
    }
    return w;
}

// sqrt(E[kappa^2/a] E[a]) bounds the size of the DMI tensor entries
inline double dmi_scale(const Moments& mo) { return std::sqrt(mo.mean_kappa_sq_over_a * mo.mean_a); }

inline double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline MinimizeOptions column_options(const SolverConfig& s, double stiffness, double shift) {
    MinimizeOptions o;
    o.grad_tol = s.grad_tol;
    o.max_iters = s.max_iters;
    o.precondition = s.precondition;
    o.sobolev_stiffness = stiffness;
    o.sobolev_shift = shift;
    return o;
}

inline json eigenvalues(const Mat3& m) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (m + m.transpose()));
    return to_json(Vec3(es.eigenvalues()));
}

inline json laminate_law_metrics(const LaminateSpec& spec) {
    json j;
    j["per_layer_probabilities"] = spec.table.probabilities;
    j["point_probabilities"] = spec.point_probabilities();
    j["per_layer_moments"] = to_json(moments(spec.table));
    j["spatial_moments"] = to_json(spatial_moments(spec));
    j["equal_fixed_widths"] = spec.equal_fixed_widths();
    return j;
}

}  // namespace detail

// ---------------------------------------------------------------------------------------------

inline RunReport run_laminate_validation(const RunConfig& cfg) {
    const auto t0 = detail::Clock::now();
    RunReport rep;
    rep.experiment = "validate-laminate";
    rep.config = cfg.source;
    const LaminateSpec& spec = cfg.laminate;
    const PhaseTable law = point_law_table(spec);
    const Moments mo = moments(law);
    rep.metrics["law"] = detail::laminate_law_metrics(spec);

    // closed form from the corrector formulas vs the effective-tensor formulas
    const EffectiveModel closed = laminate_effective(law, cfg.mu0, cfg.h_applied);
    const EffectiveModel formula = laminate_closed_form(mo, cfg.mu0, cfg.h_applied);
    rep.metrics["closed_form"] = to_json(closed);
    rep.metrics["closed_form_correctors"] = to_json(laminate_correctors(mo, law));
    rep.metrics["phi_eff_coefficient"] = -0.5 * closed.d_kappa(2, 2);
    rep.checks.push_back(check_abs("closed_form_a_ex", "a_ex = diag(E[a], E[a], E[1/a]^-1)",
                                   matrix_rel_error(closed.a_ex, formula.a_ex), 0.0, 1e-12));
    rep.checks.push_back(check_abs("closed_form_k_dmi", "k_dmi = diag(E[kappa], E[kappa], E[kappa/a] E[1/a]^-1)",
                                   matrix_rel_error(closed.k_dmi, formula.k_dmi, detail::dmi_scale(mo)), 0.0, 1e-12));
    rep.checks.push_back(check_abs("closed_form_d_kappa", "d_kappa_33 = E[kappa^2/a] - E[kappa/a]^2 E[1/a]^-1",
                                   matrix_rel_error(closed.d_kappa, formula.d_kappa, mo.mean_kappa_sq_over_a), 0.0, 1e-12));
    rep.checks.push_back(check_abs("closed_form_d_m", "d_m_33 = E[M^2] - E[M]^2",
                                   matrix_rel_error(closed.d_m, formula.d_m, mo.mean_m_sq), 0.0, 1e-12));
    rep.checks.push_back(check_abs("closed_form_a_ex_two_routes", "E[a (I+Theta_a)^T (I+Theta_a)] = E[a I - Theta_a^T a Theta_a]",
                                   matrix_rel_error(closed.a_ex, closed.a_ex_alt), 0.0, 1e-12));
    for (int k = 0; k < 3; ++k)
        rep.checks.push_back(check_abs(std::string("closed_form_mean_zero_") + std::string(name(static_cast<CorrectorKind>(k))),
                                       "|E[Theta]| = 0", closed.corrector_mean_norm[k], 0.0, 1e-12));

    const auto widths = detail::fixed_widths(spec);
    CgOptions cg{cfg.solver.cg_tol, cfg.solver.cg_max_iter};
    if (widths.empty()) {
        Check c = check_abs("rve_a_ex", "RVE a_ex vs empirical closed form", 0.0, 0.0, 1e-10);
        c.skipped = true;
        c.note = "grid-aligned RVE needs fixed layer widths";
        rep.checks.push_back(c);
    } else {
        const double h = spec.min_width() / static_cast<double>(cfg.rve_cells_per_layer);
        double max_w = 0.0;
        for (double w : widths) max_w = std::max(max_w, w);
        json runs = json::array();
        for (std::uint64_t seed : cfg.seeds) {
            const LaminateRealization r = sample_laminate(spec, seed, static_cast<double>(cfg.rve_layers + 2) * max_w);
            const GridField field = aligned_laminate_grid(r, widths, cfg.rve_layers, h, 2);
            const CorrectorSet set = solve_correctors_rve(field, cg, cfg.threads);
            const EffectiveModel rve = assemble_effective(set, field, cfg.mu0, cfg.h_applied);
            const Moments emp = field.empirical_moments();
            const EffectiveModel target = laminate_closed_form(emp, cfg.mu0, cfg.h_applied);
            const std::string tag = "seed" + std::to_string(seed) + "_";

            // cellwise corrector values against the closed forms with empirical moments
            const double H = emp.harmonic_a();
            double cell_err = 0.0, off_err = 0.0;
            for (std::size_t c = 0; c < field.cells.size(); ++c) {
                const Phase& p = field.cells[c];
                const double ta = H / p.a - 1.0;
                const double tk = emp.mean_kappa_over_a * H / p.a - p.kappa / p.a;
                const double tm = emp.mean_m - p.m_sat;
                cell_err = std::max({cell_err, std::abs(set.theta_a[c](2, 2) - ta), std::abs(set.theta_kappa[c](2, 2) - tk),
                                     std::abs(set.theta_m[c](2, 2) - tm)});
                for (const auto* th : {&set.theta_a[c], &set.theta_kappa[c], &set.theta_m[c]}) {
                    Mat3 t = *th;
                    t(2, 2) = 0.0;
                    off_err = std::max(off_err, t.cwiseAbs().maxCoeff());
                }
            }
            json run = {{"seed", seed},
                        {"dims", to_json(field.dims)},
                        {"cell_size", h},
                        {"empirical_moments", to_json(emp)},
                        {"rve", to_json(rve)},
                        {"empirical_closed_form", to_json(target)},
                        {"correctors", to_json(set)},
                        {"a_ex_eigenvalues", detail::eigenvalues(rve.a_ex)}};
            runs.push_back(run);
            rep.checks.push_back(check_abs(tag + "rve_a_ex", "RVE a_ex vs diag(E_emp[a], E_emp[a], E_emp[1/a]^-1)",
                                           matrix_rel_error(rve.a_ex, target.a_ex), 0.0, 1e-10));
            rep.checks.push_back(check_abs(tag + "rve_k_dmi", "RVE k_dmi vs empirical closed form",
                                           matrix_rel_error(rve.k_dmi, target.k_dmi, detail::dmi_scale(emp)), 0.0, 1e-10));
            rep.checks.push_back(check_abs(tag + "rve_d_kappa", "RVE d_kappa vs empirical closed form",
                                           matrix_rel_error(rve.d_kappa, target.d_kappa, emp.mean_kappa_sq_over_a), 0.0, 1e-10));
            rep.checks.push_back(check_abs(tag + "rve_d_m", "RVE d_m vs empirical closed form",
                                           matrix_rel_error(rve.d_m, target.d_m, emp.mean_m_sq), 0.0, 1e-10));
            rep.checks.push_back(check_abs(tag + "rve_theta_cellwise", "Theta_33 per cell vs closed forms with empirical moments",
                                           cell_err, 0.0, 1e-10));
            rep.checks.push_back(check_abs(tag + "rve_theta_other_entries", "Theta entries other than (3,3) vanish",
                                           off_err, 0.0, 1e-10));
            rep.checks.push_back(check_abs(tag + "rve_a_ex_two_routes", "<a(I+Theta)^T(I+Theta)> = <a I - Theta^T a Theta>",
                                           matrix_rel_error(rve.a_ex, rve.a_ex_alt), 0.0, 1e-9));
            for (int k = 0; k < 3; ++k)
                rep.checks.push_back(check_max(tag + "rve_mean_zero_" + std::string(name(static_cast<CorrectorKind>(k))),
                                               "|<Theta>| <= 10 tol", rve.corrector_mean_norm[k], 10.0 * cfg.solver.cg_tol));
            Eigen::SelfAdjointEigenSolver<Mat3> es(rve.a_ex);
            rep.checks.push_back(check_min(tag + "voigt_reuss_lower", "min eig a_ex >= E_emp[1/a]^-1 - 1e-10",
                                           es.eigenvalues().minCoeff(), H - 1e-10));
            rep.checks.push_back(check_max(tag + "voigt_reuss_upper", "max eig a_ex <= E_emp[a] + 1e-10",
                                           es.eigenvalues().maxCoeff(), emp.mean_a + 1e-10));
        }
        rep.metrics["rve_runs"] = runs;

        // deterministic periodic laminate: one period of all phases in table order
        std::vector<std::size_t> pattern(law.size());
        for (std::size_t i = 0; i < pattern.size(); ++i) pattern[i] = i;
        const LaminateRealization per = periodic_laminate(spec.table, pattern, widths, 2.0 * std::accumulate(widths.begin(), widths.end(), 0.0));
        const GridField pfield = aligned_laminate_grid(per, widths, pattern.size(), h, 1);
        const CorrectorSet pset = solve_correctors_rve(pfield, cg, cfg.threads);
        const EffectiveModel peff = assemble_effective(pset, pfield, cfg.mu0, cfg.h_applied);
        double inv_sum = 0.0, total_w = 0.0;
        for (std::size_t i = 0; i < widths.size(); ++i) {
            inv_sum += widths[i] / spec.table.phases[i].a;
            total_w += widths[i];
        }
        const double harmonic = total_w / inv_sum;
        rep.metrics["periodic"] = {{"a_ex", to_json(peff.a_ex)}, {"cell_harmonic_mean", harmonic}};
        rep.checks.push_back(check_abs("periodic_a_ex_33", "a_ex_33 = cell harmonic mean of a",
                                       std::abs(peff.a_ex(2, 2) - harmonic) / harmonic, 0.0, 1e-10));
    }

    if (cfg.checkerboard) {
        const GridField field = sample_checkerboard(spec.table, cfg.checkerboard->cell_size, cfg.checkerboard->dims,
                                                    cfg.seeds.front());
        const CorrectorSet set = solve_correctors_rve(field, cg, cfg.threads);
        const EffectiveModel eff = assemble_effective(set, field, cfg.mu0, cfg.h_applied);
        const Moments emp = field.empirical_moments();
        Eigen::SelfAdjointEigenSolver<Mat3> es(eff.a_ex);
        rep.metrics["checkerboard"] = {{"dims", to_json(field.dims)},
                                       {"effective", to_json(eff)},
                                       {"a_ex_eigenvalues", detail::eigenvalues(eff.a_ex)},
                                       {"reuss", emp.harmonic_a()},
                                       {"voigt", emp.mean_a},
                                       {"correctors", to_json(set)}};
        const bool contrast = emp.mean_a - emp.harmonic_a() > 1e-12;
        Check lo = check_min("checkerboard_reuss_strict", "min eig a_ex > E_emp[1/a]^-1",
                             es.eigenvalues().minCoeff(), emp.harmonic_a() + (contrast ? 1e-12 : -1e-10));
        Check hi = check_max("checkerboard_voigt_strict", "max eig a_ex < E_emp[a]", es.eigenvalues().maxCoeff(),
                             emp.mean_a - (contrast ? 1e-12 : -1e-10));
        rep.checks.push_back(lo);
        rep.checks.push_back(hi);
        rep.checks.push_back(check_abs("checkerboard_a_ex_two_routes", "<a(I+Theta)^T(I+Theta)> = <a I - Theta^T a Theta>",
                                       matrix_rel_error(eff.a_ex, eff.a_ex_alt), 0.0, 1e-9));
    }
    rep.timings["total_seconds"] = detail::seconds_since(t0);
    return rep;
}

// ---------------------------------------------------------------------------------------------

struct HelixRun {
    std::uint64_t seed = 0;
    MinimizeTrace trace;
    std::optional<HelixFit> fit;
    std::string fit_error;
    double energy_per_area = 0.0;
};

inline RunReport run_helix_experiment(const RunConfig& cfg, std::vector<HelixRun>* runs_out = nullptr) {
    const auto t0 = detail::Clock::now();
    RunReport rep;
    rep.experiment = "helix";
    rep.config = cfg.source;
    const PhaseTable law = point_law_table(cfg.laminate);
    const Moments mo = moments(law);
    const EffectiveModel model = laminate_effective(law, cfg.mu0, cfg.h_applied);
    const Dims dims{1, 1, cfg.cells};
    const double h = cfg.length / static_cast<double>(cfg.cells);
    const HomEnergy energy(model, dims, h, TermMask::exchange_dmi());
    const double stiffness = model.a_ex(2, 2);
    const double shift = mo.mean_kappa_sq_over_a + stiffness * std::pow(std::numbers::pi / cfg.length, 2);
    const MinimizeOptions opts = detail::column_options(cfg.solver, stiffness, shift);

    const double q_target = mo.mean_kappa_over_a;
    const double e_target = -0.5 * cfg.length * mo.mean_kappa_sq_over_a;
    const bool applicable = std::abs(mo.mean_kappa) <= 1e-12;
    const bool achiral = mo.mean_kappa_sq_over_a == 0.0;
    rep.metrics["moments"] = to_json(mo);
    rep.metrics["effective"] = to_json(model);
    rep.metrics["target_pitch"] = q_target;
    rep.metrics["target_energy_per_area"] = e_target;
    rep.metrics["discrete_pitch"] = std::atan(model.k_dmi(2, 2) * h / model.a_ex(2, 2)) / h;
    rep.metrics["comparison_applicable"] = applicable;
    rep.metrics["cell_size"] = h;

    std::vector<HelixRun> runs(cfg.seeds.size());
    parallel_for(cfg.seeds.size(), cfg.threads, [&](std::size_t i) {
        HelixRun& run = runs[i];
        run.seed = cfg.seeds[i];
        run.trace = minimize_sphere(energy.function(), Magnetization::random(dims, h, run.seed), opts);
        run.energy_per_area = run.trace.energy / (h * h);
        try {
            run.fit = fit_helix(run.trace.final_state);
        } catch (const NumericalError& e) {
            run.fit_error = e.what();
        }
    });

    json per_seed = json::array();
    std::size_t best = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const HelixRun& run = runs[i];
        if (run.energy_per_area < runs[best].energy_per_area) best = i;
        json j = {{"seed", run.seed},
                  {"iterations", run.trace.iterations},
                  {"converged", run.trace.converged},
                  {"stalled", run.trace.stalled},
                  {"grad_norm", run.trace.grad_norm},
                  {"energy_per_area", run.energy_per_area},
                  {"energy_rel_error", std::abs(run.energy_per_area - e_target) / std::max(std::abs(e_target), 1e-300)}};
        if (run.fit) {
            j["fit"] = to_json(*run.fit);
            j["pitch_rel_error"] = q_target != 0.0 ? std::abs(run.fit->q - q_target) / std::abs(q_target) : std::abs(run.fit->q);
        } else {
            j["fit_error"] = run.fit_error;
        }
        per_seed.push_back(j);

        const std::string tag = "seed" + std::to_string(run.seed) + "_";
        Check conv = check_abs(tag + "converged", "projected gradient <= grad_tol", run.trace.converged ? 1.0 : 0.0, 1.0, 0.0);
        rep.checks.push_back(conv);
        if (achiral) {
            rep.checks.push_back(check_abs(tag + "energy", "G_hom minimum = 0 without chirality",
                                           run.energy_per_area, 0.0, 1e-8 * cfg.length));
            continue;
        }
        Check pitch = check_max(tag + "pitch", "|q_fit - E[kappa/a]| / |E[kappa/a]| <= 0.02",
                                run.fit ? j["pitch_rel_error"].get<double>() : std::numeric_limits<double>::infinity(), 0.02);
        Check en = check_max(tag + "energy", "|G/area - (-lambda/2 E[kappa^2/a])| / |lambda/2 E[kappa^2/a]| <= 0.01",
                             j["energy_rel_error"].get<double>(), 0.01);
        Check oop = check_max(tag + "out_of_plane", "max |m . e3| <= 0.02",
                              run.fit ? run.fit->max_out_of_plane : std::numeric_limits<double>::infinity(), 0.02);
        for (Check* c : {&pitch, &en, &oop}) {
            if (!applicable) {
                c->skipped = true;
                c->note = "E[kappa] != 0: helical minimizers are only characterized for E[kappa] = 0";
            }
            rep.checks.push_back(*c);
        }
    }
    rep.metrics["seeds"] = per_seed;
    rep.metrics["best_seed"] = runs.empty() ? json(nullptr) : json(runs[best].seed);
    rep.timings["total_seconds"] = detail::seconds_since(t0);
    if (runs_out) *runs_out = std::move(runs);
    return rep;
}

// ---------------------------------------------------------------------------------------------

struct SweepResult {
    std::vector<double> epsilons;
    std::vector<std::size_t> cells;
    std::vector<std::vector<double>> energy;  // [eps][seed], per unit area
    std::vector<std::vector<double>> gap;     // relative, signed
    std::vector<double> median_abs_gap;
    std::size_t inversions = 0;
};

namespace detail {
inline std::size_t sweep_cells(double length, double eps, double w_min, std::size_t cells_per_layer) {
    const double h = eps * w_min / static_cast<double>(cells_per_layer);
    return static_cast<std::size_t>(std::ceil(length / h - 1e-9));
}
}  // namespace detail

inline RunReport run_gamma_sweep(const RunConfig& cfg, SweepResult* result_out = nullptr) {
    const auto t0 = detail::Clock::now();
    RunReport rep;
    rep.experiment = "gamma-sweep";
    rep.config = cfg.source;
    if (cfg.epsilons.empty()) throw ConfigError("gamma-sweep: eps_levels or epsilons required");
    const LaminateSpec& spec = cfg.laminate;
    const PhaseTable law = point_law_table(spec);
    const Moments mo = moments(law);
    const double target = -0.5 * cfg.length * mo.mean_kappa_sq_over_a;
    const double w_min = spec.min_width();
    const double lambda = cfg.length;
    rep.metrics["target_energy_per_area"] = target;
    rep.metrics["law"] = detail::laminate_law_metrics(spec);

    SweepResult res;
    res.epsilons = cfg.epsilons;
    for (double eps : cfg.epsilons) res.cells.push_back(detail::sweep_cells(lambda, eps, w_min, cfg.cells_per_layer));
    const std::size_t ne = cfg.epsilons.size(), ns = cfg.seeds.size();
    res.energy.assign(ne, std::vector<double>(ns, 0.0));
    res.gap.assign(ne, std::vector<double>(ns, 0.0));
    std::vector<std::vector<MinimizeTrace>> traces(ne, std::vector<MinimizeTrace>(ns));

    // one realization per seed covering the window of the smallest eps
    std::vector<LaminateRealization> reals;
    for (std::uint64_t seed : cfg.seeds) reals.push_back(sample_laminate(spec, seed, lambda / cfg.epsilons.back()));

    auto solve = [&](const LaminateRealization& r, double eps, std::size_t n, std::uint64_t init_seed) {
        const double h = lambda / static_cast<double>(n);
        const Dims dims{1, 1, n};
        MaterialGrid grid = MaterialGrid::from_laminate(r, eps, dims, h, w_min);
        double mean_a = 0.0, mean_k2a = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            mean_a += grid.a[c] / static_cast<double>(n);
            mean_k2a += grid.kappa[c] * grid.kappa[c] / grid.a[c] / static_cast<double>(n);
        }
        const EpsEnergy energy(std::move(grid), cfg.mu0, cfg.h_applied, TermMask::exchange_dmi());
        const MinimizeOptions opts = detail::column_options(
            cfg.solver, mean_a, mean_k2a + mean_a * std::pow(std::numbers::pi / lambda, 2));
        return minimize_sphere(energy.function(), Magnetization::random(dims, h, init_seed), opts);
    };

    parallel_for(ne * ns, cfg.threads, [&](std::size_t job) {
        const std::size_t e = job / ns, s = job % ns;
        const double h = lambda / static_cast<double>(res.cells[e]);
        traces[e][s] = solve(reals[s], cfg.epsilons[e], res.cells[e], cfg.seeds[s] * 1000003ULL + e);
        res.energy[e][s] = traces[e][s].energy / (h * h);
        res.gap[e][s] = (res.energy[e][s] - target) / std::max(std::abs(target), 1e-300);
    });

    json levels = json::array();
    bool all_converged = true;
    for (std::size_t e = 0; e < ne; ++e) {
        std::vector<double> abs_gap;
        json seeds = json::array();
        for (std::size_t s = 0; s < ns; ++s) {
            abs_gap.push_back(std::abs(res.gap[e][s]));
            all_converged = all_converged && traces[e][s].converged;
            // what the grid's own coefficients give for the continuum minimum, i.e. sampling alone
            seeds.push_back({{"seed", cfg.seeds[s]},
                             {"energy_per_area", res.energy[e][s]},
                             {"relative_gap", res.gap[e][s]},
                             {"iterations", traces[e][s].iterations},
                             {"converged", traces[e][s].converged},
                             {"stalled", traces[e][s].stalled},
                             {"grad_norm", traces[e][s].grad_norm}});
        }
        res.median_abs_gap.push_back(detail::median(abs_gap));
        levels.push_back({{"eps", cfg.epsilons[e]},
                          {"cells", res.cells[e]},
                          {"cell_size", lambda / static_cast<double>(res.cells[e])},
                          {"median_abs_relative_gap", res.median_abs_gap.back()},
                          {"seeds", seeds}});
    }
    for (std::size_t e = 1; e < ne; ++e)
        if (res.median_abs_gap[e] > res.median_abs_gap[e - 1]) ++res.inversions;
    rep.metrics["levels"] = levels;
    rep.metrics["inversions"] = res.inversions;

    rep.checks.push_back(check_abs("all_converged", "every run reaches grad_tol (or round-off)", all_converged ? 1.0 : 0.0, 1.0, 0.0));
    rep.checks.push_back(check_max("median_gap_finest", "median_seeds |min G_eps - G_hom_min| / |G_hom_min| at smallest eps <= 0.05",
                                   res.median_abs_gap.back(), 0.05));
    rep.checks.push_back(check_max("gap_inversions", "number of eps levels where the median gap increases <= 1",
                                   static_cast<double>(res.inversions), 1.0));

    if (cfg.periodic_anchor) {
        const auto widths = detail::fixed_widths(spec);
        if (!widths.empty()) {
            std::vector<std::size_t> pattern(spec.table.size());
            for (std::size_t i = 0; i < pattern.size(); ++i) pattern[i] = i;
            const LaminateRealization per = periodic_laminate(spec.table, pattern, widths, lambda / cfg.epsilons.back());
            const Moments cell = weighted_moments(spec.table.phases, widths);
            const double per_target = -0.5 * lambda * cell.mean_kappa_sq_over_a;
            json anchor = json::array();
            for (std::size_t e = 0; e < ne; ++e) {
                const double h = lambda / static_cast<double>(res.cells[e]);
                const MinimizeTrace t = solve(per, cfg.epsilons[e], res.cells[e], 7 + e);
                const double en = t.energy / (h * h);
                anchor.push_back({{"eps", cfg.epsilons[e]},
                                  {"energy_per_area", en},
                                  {"relative_gap", (en - per_target) / std::max(std::abs(per_target), 1e-300)},
                                  {"converged", t.converged}});
            }
            rep.metrics["periodic_anchor"] = {{"target_energy_per_area", per_target}, {"levels", anchor}};
        }
    }
    rep.timings["total_seconds"] = detail::seconds_since(t0);
    if (result_out) *result_out = std::move(res);
    return rep;
}

// ---------------------------------------------------------------------------------------------

/// Standard deviation of the window-t spatial average of q for a stationary renewal laminate,
/// E[W^2 (q - mu)^2] / (E[W] t) under the per-layer law; equals Var[q] w / t for equal fixed widths.
inline double birkhoff_envelope(const LaminateSpec& spec, Quantity q, double t) {
    const double mu = spatial_moments(spec).get(q);
    double num = 0.0;
    for (std::size_t i = 0; i < spec.table.size(); ++i) {
        const double w = spec.widths[i].mean;
        const double w2 = spec.widths[i].kind == WidthLaw::Kind::Fixed ? w * w : 2.0 * w * w;
        const double d = evaluate(q, spec.table.phases[i]) - mu;
        num += spec.table.probabilities[i] * w2 * d * d;
    }
    return std::sqrt(num / (spec.mean_width() * t));
}

inline RunReport run_birkhoff(const RunConfig& cfg, std::string* csv_out = nullptr) {
    const auto t0 = detail::Clock::now();
    RunReport rep;
    rep.experiment = "birkhoff";
    rep.config = cfg.source;
    const LaminateSpec& spec = cfg.laminate;
    if (cfg.seeds.size() < 20) throw ConfigError("birkhoff: at least 20 seeds are required");
    const double wbar = spec.mean_width();
    const Moments layer = moments(spec.table);
    const Moments spatial = spatial_moments(spec);
    rep.metrics["law"] = detail::laminate_law_metrics(spec);
    rep.metrics["mean_layer_width"] = wbar;

    const double t_max = *std::max_element(cfg.windows.begin(), cfg.windows.end()) * wbar;
    std::vector<LaminateRealization> reals(cfg.seeds.size());
    parallel_for(cfg.seeds.size(), cfg.threads,
                 [&](std::size_t s) { reals[s] = sample_laminate(spec, cfg.seeds[s], t_max); });

    std::string csv = "quantity,t_layers,t,seed,average,error,target_spatial,target_per_layer\n";
    json table = json::object();
    for (Quantity q : cfg.quantities) {
        const std::string qn(name(q));
        json rows = json::array();
        for (double tl : cfg.windows) {
            const double t = tl * wbar;
            double sq = 0.0;
            int positive = 0, negative = 0;
            for (std::size_t s = 0; s < reals.size(); ++s) {
                const double avg = birkhoff_average(reals[s], q, t);
                const double err = avg - spatial.get(q);
                sq += err * err;
                (avg > 0 ? positive : negative) += avg != 0.0;
                csv += qn + "," + fmt(tl) + "," + fmt(t) + "," + std::to_string(cfg.seeds[s]) + "," + fmt(avg) + "," +
                       fmt(err) + "," + fmt(spatial.get(q)) + "," + fmt(layer.get(q)) + "\n";
            }
            const double rms = std::sqrt(sq / static_cast<double>(reals.size()));
            const double env = birkhoff_envelope(spec, q, t);
            rows.push_back({{"t_layers", tl},
                            {"t", t},
                            {"rms_error", rms},
                            {"clt_envelope", env},
                            {"ratio", env > 0 ? rms / env : 0.0},
                            {"seeds_positive", positive},
                            {"seeds_negative", negative}});
        }
        table[qn] = {{"target_spatial", spatial.get(q)}, {"target_per_layer", layer.get(q)}, {"windows", rows}};

        const json& last = rows.back();
        if (q == Quantity::Kappa && spatial.mean_kappa == 0.0 && variance(spec.table, q) > 0.0)
            rep.checks.push_back(check_min("kappa_sign_changes", "E[kappa] = 0: seeds with positive and with negative averages, min count >= 1",
                                           std::min(last["seeds_positive"].get<double>(), last["seeds_negative"].get<double>()), 1.0));
        const double env = last["clt_envelope"].get<double>();
        const double rms = last["rms_error"].get<double>();
        if (env > 0.0)
            rep.checks.push_back(check_max("rms_" + qn, "RMS over seeds of |average - E[" + qn + "]| <= 5 sqrt(E[W^2(q-mu)^2]/(E[W] t))",
                                           rms, 5.0 * env));
        else
            rep.checks.push_back(check_max("rms_" + qn, "degenerate law: average equals E[" + qn + "] exactly",
                                           rms, 1e-12 * std::max(1.0, std::abs(spatial.get(q)))));
    }
    rep.metrics["quantities"] = table;
    rep.timings["total_seconds"] = detail::seconds_since(t0);
    if (csv_out) *csv_out = std::move(csv);
    return rep;
}

// ---------------------------------------------------------------------------------------------

inline RunReport run_correctors(const RunConfig& cfg, CorrectorSet* set_out = nullptr) {
    const auto t0 = detail::Clock::now();
    RunReport rep;
    rep.experiment = "correctors";
    rep.config = cfg.source;
    GridField field;
    if (cfg.checkerboard) {
        field = sample_checkerboard(cfg.laminate.table, cfg.checkerboard->cell_size, cfg.checkerboard->dims, cfg.seeds.front());
    } else {
        const auto widths = detail::fixed_widths(cfg.laminate);
        if (widths.empty()) throw ConfigError("correctors: laminate RVE needs fixed widths (or configure a checkerboard)");
        double max_w = *std::max_element(widths.begin(), widths.end());
        const double h = cfg.laminate.min_width() / static_cast<double>(cfg.rve_cells_per_layer);
        const LaminateRealization r = sample_laminate(cfg.laminate, cfg.seeds.front(), static_cast<double>(cfg.rve_layers + 2) * max_w);
        field = aligned_laminate_grid(r, widths, cfg.rve_layers, h, 1);
    }
    const CorrectorSet set = solve_correctors_rve(field, CgOptions{cfg.solver.cg_tol, cfg.solver.cg_max_iter}, cfg.threads);
    const EffectiveModel eff = assemble_effective(set, field, cfg.mu0, cfg.h_applied);
    const Moments emp = field.empirical_moments();
    rep.metrics["correctors"] = to_json(set);
    rep.metrics["effective"] = to_json(eff);
    rep.metrics["a_ex_eigenvalues"] = detail::eigenvalues(eff.a_ex);
    Eigen::SelfAdjointEigenSolver<Mat3> es(eff.a_ex);
    rep.checks.push_back(check_abs("a_ex_two_routes", "<a(I+Theta)^T(I+Theta)> = <a I - Theta^T a Theta>",
                                   matrix_rel_error(eff.a_ex, eff.a_ex_alt), 0.0, 1e-9));
    for (int k = 0; k < 3; ++k)
        rep.checks.push_back(check_max("mean_zero_" + std::string(name(static_cast<CorrectorKind>(k))), "|<Theta>| <= 10 tol",
                                       eff.corrector_mean_norm[k], 10.0 * cfg.solver.cg_tol));
    rep.checks.push_back(check_min("voigt_reuss_lower", "min eig a_ex >= E_emp[1/a]^-1 - 1e-10", es.eigenvalues().minCoeff(),
                                   emp.harmonic_a() - 1e-10));
    rep.checks.push_back(check_max("voigt_reuss_upper", "max eig a_ex <= E_emp[a] + 1e-10", es.eigenvalues().maxCoeff(),
                                   emp.mean_a + 1e-10));
    rep.timings["total_seconds"] = detail::seconds_since(t0);
    if (set_out) *set_out = set;
    return rep;
}

// ---------------------------------------------------------------------------------------------

inline RunReport run_energy_eval(const RunConfig& cfg, Magnetization* state_out = nullptr) {
    const auto t0 = detail::Clock::now();
    RunReport rep;
    rep.experiment = "energy-eval";
    rep.config = cfg.source;

    std::optional<MaterialGrid> grid;
    EffectiveModel model;
    Dims dims;
    double h = 0.0;
    if (cfg.checkerboard) {
        const GridField field = sample_checkerboard(cfg.laminate.table, cfg.checkerboard->cell_size, cfg.checkerboard->dims,
                                                    cfg.seeds.front());
        grid = MaterialGrid::from_cells(field);
        dims = field.dims;
        h = field.h;
        const CorrectorSet set = solve_correctors_rve(field, CgOptions{cfg.solver.cg_tol, cfg.solver.cg_max_iter}, cfg.threads);
        model = assemble_effective(set, field, cfg.mu0, cfg.h_applied);
    } else {
        dims = Dims{1, 1, cfg.cells};
        h = cfg.length / static_cast<double>(cfg.cells);
        model = laminate_effective(point_law_table(cfg.laminate), cfg.mu0, cfg.h_applied);
        if (cfg.eps > 0.0) {
            const LaminateRealization r = sample_laminate(cfg.laminate, cfg.seeds.front(), cfg.length / cfg.eps);
            grid = MaterialGrid::from_laminate(r, cfg.eps, dims, h, cfg.laminate.min_width());
        }
    }

    Magnetization m;
    if (cfg.magnetization_file) {
        m = read_grid(*cfg.magnetization_file);
        if (!(m.dims() == dims) || std::abs(m.h() - h) > 1e-12 * h)
            throw ConfigError("energy-eval: magnetization file does not match the configured grid");
    } else if (cfg.init == "helix") {
        m = Magnetization::helix(dims, h, model.moments.mean_kappa_over_a);
    } else if (cfg.init == "uniform") {
        m = Magnetization(dims, h, Vec3::UnitX());
    } else {
        m = Magnetization::random(dims, h, cfg.seeds.front());
    }

    const HomEnergy hom(model, dims, h);
    const HomBreakdown hb = hom.evaluate_both(m.values());
    rep.metrics["effective"] = to_json(model);
    rep.metrics["hom"] = to_json(hb.hom);
    rep.metrics["eff"] = to_json(hb.eff);
    const double scale = std::max({std::abs(hb.hom.exchange), std::abs(hb.hom.dmi), std::abs(hb.hom.stray),
                                   std::abs(hb.hom.anisotropy), std::abs(hb.hom.zeeman), 1e-300});
    rep.checks.push_back(check_max("regrouping", "|F_hom (hom grouping) - F_hom (eff grouping)| / scale <= 1e-12",
                                   std::abs(hb.hom.total - hb.eff.total) / scale, 1e-12));
    const double g_hom = hb.hom.exchange + hb.hom.dmi;
    rep.checks.push_back(check_max("thom_integral", "|sum T_hom(m, grad m) h^3 - G_hom| / scale <= 1e-10",
                                   std::abs(integrate_thom(m.values(), dims, h, model) - g_hom) / scale, 1e-10));
    rep.checks.push_back(check_min("stray_nonnegative_hom", "W_hom >= 0", hb.eff.stray, 0.0));

    if (grid) {
        const EpsEnergy eps_energy(*grid, cfg.mu0, cfg.h_applied);
        const EnergyBreakdown eb = eps_energy.evaluate(m.values());
        rep.metrics["eps"] = to_json(eb);
        const double s2 = std::max({std::abs(eb.exchange), std::abs(eb.dmi), 1e-300});
        rep.checks.push_back(check_max("curl_identity", "|sum kappa m.curl m + sum kappa chi(m):grad m| / scale <= 1e-10",
                                       std::abs(eps_energy.dmi_via_curl(m.values()) - eb.dmi) / s2, 1e-10));
        rep.checks.push_back(check_max("completed_square",
                                       "|E+K - (1/2 sum a|grad m - (kappa/a) chi(m)|^2 - sum kappa^2/a |m|^2)| / scale <= 1e-10",
                                       std::abs(eps_energy.completed_square(m.values()) - (eb.exchange + eb.dmi)) / s2, 1e-10));
        rep.checks.push_back(check_min("stray_nonnegative_eps", "W_eps >= 0", eb.stray, 0.0));
    }
    rep.timings["total_seconds"] = detail::seconds_since(t0);
    if (state_out) *state_out = m;
    return rep;
}

}  // namespace chiralhom
