#pragma once

// Discrete heterogeneous and homogenized micromagnetic energies with exact gradients.
//
// Each cell carries two gradient tensors G+ (forward differences, backward where no forward
// neighbour exists) and G- (the mirror choice). The local density is the average of the
// integrand at (m_c, G+) and (m_c, G-). Averaging both stencils removes the checkerboard
// null mode of central differences; along a column every face ends up with weight 1 except
// the two boundary faces, which get 3/2 so that a uniform texture integrates exactly.

#include "chiralhom/chi.hpp"
#include "chiralhom/correctors.hpp"
#include "chiralhom/demag.hpp"
#include "chiralhom/magnetization.hpp"
#include "chiralhom/microstructure.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace chiralhom {

struct TermMask {
    bool exchange = true;
    bool dmi = true;
    bool stray = true;
    bool anisotropy = true;
    bool zeeman = true;

    static TermMask all() { return {}; }
    static TermMask exchange_dmi() { return {true, true, false, false, false}; }
    static TermMask only(const std::string& term) {
        TermMask m{false, false, false, false, false};
        if (term == "exchange") m.exchange = true;
        else if (term == "dmi") m.dmi = true;
        else if (term == "stray") m.stray = true;
        else if (term == "anisotropy") m.anisotropy = true;
        else if (term == "zeeman") m.zeeman = true;
        else throw ConfigError("unknown energy term '" + term + "'");
        return m;
    }
};

struct EnergyBreakdown {
    double exchange = 0.0;
    double dmi = 0.0;
    double stray = 0.0;
    double anisotropy = 0.0;
    double zeeman = 0.0;
    double total = 0.0;
    std::string model;  // "eps", "hom" or "eff"

    void finalize() { total = exchange + dmi + stray + anisotropy + zeeman; }
};

/// Both groupings of the homogenized energy.
struct HomBreakdown {
    EnergyBreakdown hom;  // G_hom = exchange + dmi, W_hom holds the d_m term, A_hom = E[phi]
    EnergyBreakdown eff;  // corrector terms collected in the anisotropy
};

/// Per-cell coefficients of the heterogeneous energy on a magnetization grid.
struct MaterialGrid {
    Dims dims;
    double h = 1.0;
    std::vector<double> a, kappa, m_sat, k1;
    std::vector<Vec3> easy_axis;
    std::string source;

    std::size_t size() const { return dims.size(); }

    void push(const Phase& p) {
        a.push_back(p.a);
        kappa.push_back(p.kappa);
        m_sat.push_back(p.m_sat);
        k1.push_back(p.k1);
        easy_axis.push_back(p.easy_axis);
    }

    static MaterialGrid uniform(const Phase& p, Dims dims, double h) {
        MaterialGrid g = empty(dims, h);
        for (std::size_t c = 0; c < dims.size(); ++c) g.push(p);
        g.source = "uniform";
        return g;
    }

    /// Cell c takes the phase at its centre x3 / eps of the realization. Requires h <= eps w_min / 4.
    static MaterialGrid from_laminate(const LaminateRealization& r, double eps, Dims dims, double h, double w_min) {
        if (!(eps > 0.0)) throw ConfigError("energy: eps must be positive");
        if (!(w_min > 0.0)) throw ConfigError("energy: minimal layer width must be positive");
        if (h > eps * w_min / 4.0 * (1.0 + 1e-12))
            throw ConfigError("energy: grid does not resolve the microstructure (need h <= eps*w_min/4, h=" +
                              std::to_string(h) + ", eps*w_min/4=" + std::to_string(eps * w_min / 4.0) + ")");
        if (static_cast<double>(dims.nz) * h / eps > r.end())
            throw ConfigError("energy: domain extends beyond the laminate realization");
        MaterialGrid g = empty(dims, h);
        for (std::size_t c = 0; c < dims.size(); ++c) {
            const double x3 = (static_cast<double>(dims.coord(c, 2)) + 0.5) * h;
            g.push(eval_laminate(r, x3, eps));
        }
        g.source = "laminate";
        return g;
    }

    /// Cell c takes the coefficients of the periodically extended field at centre / eps.
    static MaterialGrid from_field(const GridField& f, double eps, Dims dims, double h) {
        if (!(eps > 0.0)) throw ConfigError("energy: eps must be positive");
        if (h > eps * f.h / 4.0 * (1.0 + 1e-12))
            throw ConfigError("energy: grid does not resolve the microstructure (need h <= eps*cell/4)");
        MaterialGrid g = empty(dims, h);
        for (std::size_t c = 0; c < dims.size(); ++c) {
            std::size_t i, j, k;
            dims.coords(c, i, j, k);
            const Vec3 x = h * Vec3(i + 0.5, j + 0.5, k + 0.5);
            g.push(f.at_point(x / eps));
        }
        g.source = "field";
        return g;
    }

    /// The field's own cells, one magnetization cell per coefficient cell.
    static MaterialGrid from_cells(const GridField& f) {
        MaterialGrid g = empty(f.dims, f.h);
        for (const Phase& p : f.cells) g.push(p);
        g.source = "cells";
        return g;
    }

private:
    static MaterialGrid empty(Dims dims, double h) {
        if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1) throw ConfigError("energy: dimensions must be >= 1");
        if (!(h > 0.0)) throw ConfigError("energy: spacing must be positive");
        MaterialGrid g;
        g.dims = dims;
        g.h = h;
        return g;
    }
};

namespace detail {

/// Rows d of the two one-sided gradient tensors of cell c. Directions with a single cell give zero rows.
struct Stencil {
    std::array<std::size_t, 3> plus_from{}, plus_to{}, minus_from{}, minus_to{};
    std::array<bool, 3> active{};
};

inline Stencil stencil(const Dims& dims, std::size_t c) {
    Stencil s;
    for (int d = 0; d < 3; ++d) {
        const std::size_t n = dims[d];
        const std::size_t pos = dims.coord(c, d);
        const std::size_t stride = dims.stride(d);
        s.active[d] = n > 1;
        if (n <= 1) continue;
        const bool has_next = pos + 1 < n;
        const bool has_prev = pos > 0;
        // face (from -> to) used by each stencil
        s.plus_from[d] = has_next ? c : c - stride;
        s.plus_to[d] = has_next ? c + stride : c;
        s.minus_from[d] = has_prev ? c - stride : c;
        s.minus_to[d] = has_prev ? c : c + stride;
    }
    return s;
}

inline Mat3 gradient(const std::vector<Vec3>& m, const std::array<std::size_t, 3>& from,
                     const std::array<std::size_t, 3>& to, const std::array<bool, 3>& active, double inv_h) {
    Mat3 g = Mat3::Zero();
    for (int d = 0; d < 3; ++d)
        if (active[d]) g.row(d) = ((m[to[d]] - m[from[d]]) * inv_h).transpose();
    return g;
}

/// Exchange + DMI density 1/2 sum a_ij G_i.G_j - sum k_ij G_i.(e_j x m) and its partial derivatives.
struct LocalQuadratic {
    double exchange = 0.0, dmi = 0.0;
    Mat3 d_g = Mat3::Zero();  // row i: derivative with respect to G_i
    Vec3 d_m = Vec3::Zero();
};

inline LocalQuadratic local_quadratic(const Vec3& m, const Mat3& g, const Mat3& a, const Mat3& k, bool want_grad) {
    LocalQuadratic out;
    const Mat3 ch = chi(m);
    const Mat3 ag = a * g;
    const Mat3 kc = k * ch;
    out.exchange = 0.5 * frob(g, ag);
    out.dmi = -frob(g, kc);
    if (want_grad) {
        out.d_g = ag - kc;
        // d/dm of G_i.(e_j x m) = G_i x e_j
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (k(i, j) != 0.0) out.d_m -= k(i, j) * g.row(i).transpose().cross(unit(j));
    }
    return out;
}

inline void check_finite(const std::vector<Vec3>& m) {
    for (std::size_t c = 0; c < m.size(); ++c)
        if (!m[c].allFinite()) throw NumericalError("energy: non-finite magnetization at cell " + std::to_string(c));
}

inline void check_gradient(const std::vector<Vec3>& g) {
    for (std::size_t c = 0; c < g.size(); ++c)
        if (!g[c].allFinite()) throw NumericalError("energy: non-finite gradient at cell " + std::to_string(c));
}

/// Exchange and DMI over the grid with per-cell tensors (a, k); adds the gradient if requested.
template <typename Coeff>
void accumulate_quadratic(const Dims& dims, double h, const std::vector<Vec3>& m, Coeff&& coeff, bool exchange,
                          bool dmi, double& e_ex, double& e_dmi, std::vector<Vec3>* grad) {
    const double inv_h = 1.0 / h;
    const double w = 0.5 * h * h * h;
    for (std::size_t c = 0; c < m.size(); ++c) {
        auto [a, k] = coeff(c);
        if (!exchange) a.setZero();
        if (!dmi) k.setZero();
        const Stencil s = stencil(dims, c);
        for (int side = 0; side < 2; ++side) {
            const auto& from = side == 0 ? s.plus_from : s.minus_from;
            const auto& to = side == 0 ? s.plus_to : s.minus_to;
            const Mat3 g = gradient(m, from, to, s.active, inv_h);
            const LocalQuadratic q = local_quadratic(m[c], g, a, k, grad != nullptr);
            e_ex += w * q.exchange;
            e_dmi += w * q.dmi;
            if (grad) {
                (*grad)[c] += w * q.d_m;
                for (int d = 0; d < 3; ++d) {
                    if (!s.active[d]) continue;
                    const Vec3 row = w * inv_h * q.d_g.row(d).transpose();
                    (*grad)[to[d]] += row;
                    (*grad)[from[d]] -= row;
                }
            }
        }
    }
}

}  // namespace detail

/// Signature shared by all energies: value and, optionally, dE/dm for unconstrained vectors m.
using EnergyFunction = std::function<double(const std::vector<Vec3>&, std::vector<Vec3>*)>;

/// Heterogeneous energy F_eps on a material grid.
class EpsEnergy {
public:
    EpsEnergy(MaterialGrid grid, double mu0, const Vec3& h_applied, TermMask mask = TermMask::all(), int padding = 2)
        : grid_(std::move(grid)), mu0_(mu0), h_applied_(h_applied), mask_(mask) {
        if (mask_.stray) demag_ = std::make_shared<DemagSolver>(grid_.dims, padding);
    }

    const MaterialGrid& grid() const { return grid_; }

    EnergyBreakdown evaluate(const std::vector<Vec3>& m, std::vector<Vec3>* grad = nullptr) const {
        if (m.size() != grid_.size()) throw ConfigError("energy: magnetization and material grid differ in size");
        detail::check_finite(m);
        if (grad) grad->assign(m.size(), Vec3::Zero());
        EnergyBreakdown e;
        e.model = "eps";
        const double vol = grid_.h * grid_.h * grid_.h;
        if (mask_.exchange || mask_.dmi) {
            detail::accumulate_quadratic(
                grid_.dims, grid_.h, m,
                [&](std::size_t c) {
                    return std::pair<Mat3, Mat3>(grid_.a[c] * Mat3::Identity(), grid_.kappa[c] * Mat3::Identity());
                },
                mask_.exchange, mask_.dmi, e.exchange, e.dmi, grad);
        }
        if (mask_.anisotropy) {
            for (std::size_t c = 0; c < m.size(); ++c) {
                const double p = m[c].dot(grid_.easy_axis[c]);
                e.anisotropy += vol * grid_.k1[c] * (m[c].squaredNorm() - p * p);
                if (grad) (*grad)[c] += vol * grid_.k1[c] * (2.0 * m[c] - 2.0 * p * grid_.easy_axis[c]);
            }
        }
        if (mask_.zeeman) {
            for (std::size_t c = 0; c < m.size(); ++c) {
                e.zeeman -= vol * mu0_ * grid_.m_sat[c] * h_applied_.dot(m[c]);
                if (grad) (*grad)[c] -= vol * mu0_ * grid_.m_sat[c] * h_applied_;
            }
        }
        if (mask_.stray) {
            std::vector<Vec3> density(m.size());
            for (std::size_t c = 0; c < m.size(); ++c) density[c] = grid_.m_sat[c] * m[c];
            const auto hd = demag_->field(density);
            for (std::size_t c = 0; c < m.size(); ++c) {
                e.stray -= 0.5 * vol * mu0_ * hd[c].dot(density[c]);
                if (grad) (*grad)[c] -= vol * mu0_ * grid_.m_sat[c] * hd[c];
            }
        }
        if (grad) detail::check_gradient(*grad);
        e.finalize();
        return e;
    }

    /// Exchange + DMI through the completed square 1/2 a|G - (kappa/a) chi(m)|^2 - (kappa^2/a)|m|^2.
    double completed_square(const std::vector<Vec3>& m) const {
        const double inv_h = 1.0 / grid_.h;
        const double w = 0.5 * grid_.h * grid_.h * grid_.h;
        double total = 0.0;
        for (std::size_t c = 0; c < m.size(); ++c) {
            const detail::Stencil s = detail::stencil(grid_.dims, c);
            const double a = grid_.a[c], k = grid_.kappa[c];
            const Mat3 shifted = (k / a) * chi(m[c]);
            for (int side = 0; side < 2; ++side) {
                const Mat3 g = side == 0 ? detail::gradient(m, s.plus_from, s.plus_to, s.active, inv_h)
                                         : detail::gradient(m, s.minus_from, s.minus_to, s.active, inv_h);
                total += w * (0.5 * a * (g - shifted).squaredNorm() - (k * k / a) * m[c].squaredNorm());
            }
        }
        return total;
    }

    /// DMI evaluated through kappa m.curl m instead of the chi contraction.
    double dmi_via_curl(const std::vector<Vec3>& m) const {
        const double inv_h = 1.0 / grid_.h;
        const double w = 0.5 * grid_.h * grid_.h * grid_.h;
        double total = 0.0;
        for (std::size_t c = 0; c < m.size(); ++c) {
            const detail::Stencil s = detail::stencil(grid_.dims, c);
            for (int side = 0; side < 2; ++side) {
                const Mat3 g = side == 0 ? detail::gradient(m, s.plus_from, s.plus_to, s.active, inv_h)
                                         : detail::gradient(m, s.minus_from, s.minus_to, s.active, inv_h);
                total += w * grid_.kappa[c] * m[c].dot(curl_from_gradient(g));
            }
        }
        return total;
    }

    EnergyFunction function() const {
        return [this](const std::vector<Vec3>& m, std::vector<Vec3>* g) { return evaluate(m, g).total; };
    }

private:
    MaterialGrid grid_;
    double mu0_;
    Vec3 h_applied_;
    TermMask mask_;
    std::shared_ptr<DemagSolver> demag_;
};

/// Homogenized energy F_hom of an effective model on a uniform grid.
class HomEnergy {
public:
    HomEnergy(EffectiveModel model, Dims dims, double h, TermMask mask = TermMask::all(), int padding = 2)
        : model_(std::move(model)), dims_(dims), h_(h), mask_(mask) {
        if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1) throw ConfigError("energy: dimensions must be >= 1");
        if (!(h > 0.0)) throw ConfigError("energy: spacing must be positive");
        if (mask_.stray) demag_ = std::make_shared<DemagSolver>(dims, padding);
    }

    const EffectiveModel& model() const { return model_; }
    const Dims& dims() const { return dims_; }
    double h() const { return h_; }

    HomBreakdown evaluate_both(const std::vector<Vec3>& m, std::vector<Vec3>* grad = nullptr) const {
        if (m.size() != dims_.size()) throw ConfigError("energy: magnetization does not match the model grid");
        detail::check_finite(m);
        if (grad) grad->assign(m.size(), Vec3::Zero());
        const double vol = h_ * h_ * h_;
        const double mu0 = model_.mu0;
        const Moments& mo = model_.moments;

        double ex = 0.0, dmi = 0.0;
        if (mask_.exchange || mask_.dmi)
            detail::accumulate_quadratic(
                dims_, h_, m, [&](std::size_t) { return std::pair<Mat3, Mat3>(model_.a_ex, model_.k_dmi); },
                mask_.exchange, mask_.dmi, ex, dmi, grad);

        double kappa_corr = 0.0, m_corr = 0.0, phi = 0.0, zee = 0.0, stray = 0.0;
        const Mat3& dk = model_.d_kappa;
        const Mat3& dm = model_.d_m;
        for (std::size_t c = 0; c < m.size(); ++c) {
            const Vec3& v = m[c];
            if (mask_.dmi) {
                kappa_corr -= 0.5 * vol * chi_quadratic(v, dk);
                if (grad) (*grad)[c] -= vol * (dk.trace() * v - 0.5 * (dk + dk.transpose()) * v);
            }
            if (mask_.stray) {
                m_corr += 0.5 * vol * mu0 * v.dot(dm * v);
                if (grad) (*grad)[c] += 0.5 * vol * mu0 * (dm + dm.transpose()) * v;
            }
            if (mask_.anisotropy) {
                phi += vol * (mo.mean_k1 * v.squaredNorm() - v.dot(mo.mean_k1_ee * v));
                if (grad) (*grad)[c] += vol * (2.0 * mo.mean_k1 * v - (mo.mean_k1_ee + mo.mean_k1_ee.transpose()) * v);
            }
            if (mask_.zeeman) {
                zee -= vol * mu0 * model_.m_mean * model_.h_applied.dot(v);
                if (grad) (*grad)[c] -= vol * mu0 * model_.m_mean * model_.h_applied;
            }
        }
        if (mask_.stray) {
            std::vector<Vec3> density(m.size());
            for (std::size_t c = 0; c < m.size(); ++c) density[c] = model_.m_mean * m[c];
            const auto hd = demag_->field(density);
            for (std::size_t c = 0; c < m.size(); ++c) {
                stray -= 0.5 * vol * mu0 * hd[c].dot(density[c]);
                if (grad) (*grad)[c] -= vol * mu0 * model_.m_mean * hd[c];
            }
        }
        if (grad) detail::check_gradient(*grad);

        HomBreakdown out;
        out.hom.model = "hom";
        out.hom.exchange = ex;
        out.hom.dmi = dmi + kappa_corr;
        out.hom.stray = stray + m_corr;
        out.hom.anisotropy = phi;
        out.hom.zeeman = zee;
        out.hom.finalize();
        out.eff.model = "eff";
        out.eff.exchange = ex;
        out.eff.dmi = dmi;
        out.eff.stray = stray;
        out.eff.anisotropy = phi + kappa_corr + m_corr;
        out.eff.zeeman = zee;
        out.eff.finalize();
        return out;
    }

    EnergyBreakdown evaluate(const std::vector<Vec3>& m, std::vector<Vec3>* grad = nullptr) const {
        return evaluate_both(m, grad).hom;
    }

    EnergyFunction function() const {
        return [this](const std::vector<Vec3>& m, std::vector<Vec3>* g) { return evaluate(m, g).total; };
    }

private:
    EffectiveModel model_;
    Dims dims_;
    double h_;
    TermMask mask_;
    std::shared_ptr<DemagSolver> demag_;
};

inline EnergyBreakdown energy_eps(const Magnetization& m, const MaterialGrid& grid, double mu0, const Vec3& h_applied,
                                  TermMask mask = TermMask::all()) {
    if (!(m.dims() == grid.dims) || std::abs(m.h() - grid.h) > 1e-12 * grid.h)
        throw ConfigError("energy: magnetization and material grid cover different domains");
    return EpsEnergy(grid, mu0, h_applied, mask).evaluate(m.values());
}

inline EnergyBreakdown energy_eps(const Magnetization& m, const LaminateRealization& r, double eps, double w_min,
                                  double mu0, const Vec3& h_applied, TermMask mask = TermMask::all()) {
    return energy_eps(m, MaterialGrid::from_laminate(r, eps, m.dims(), m.h(), w_min), mu0, h_applied, mask);
}

inline EnergyBreakdown energy_eps(const Magnetization& m, const GridField& f, double eps, double mu0,
                                  const Vec3& h_applied, TermMask mask = TermMask::all()) {
    return energy_eps(m, MaterialGrid::from_field(f, eps, m.dims(), m.h()), mu0, h_applied, mask);
}

inline HomBreakdown energy_hom(const Magnetization& m, const EffectiveModel& model, TermMask mask = TermMask::all()) {
    return HomEnergy(model, m.dims(), m.h(), mask).evaluate_both(m.values());
}

namespace detail {
inline double thom_density_unchecked(const Vec3& s, const Mat3& a, const EffectiveModel& model) {
    return 0.5 * frob(a, model.a_ex * a) - frob(a, model.k_dmi * chi(s)) - 0.5 * chi_quadratic(s, model.d_kappa);
}
}  // namespace detail

/// T_hom(s, A) = 1/2 A:a_ex A - A:k_dmi chi(s) - 1/2 chi(s):d_kappa chi(s) for A tangent at s.
inline double thom_density(const Vec3& s, const Mat3& a, const EffectiveModel& model) {
    detail::require_tangent(s, a, "thom_density");
    return detail::thom_density_unchecked(s, a, model);
}

/// Pointwise minimizer Xi = Theta_a A - Theta_kappa chi(s), one matrix per phase or cell.
inline std::vector<Mat3> thom_xi(const Vec3& s, const Mat3& a, const CorrectorSet& set) {
    detail::require_tangent(s, a, "thom_xi");
    if (set.theta_a.size() != set.theta_kappa.size()) throw ConfigError("thom_xi: corrector sets differ in size");
    const Mat3 ch = chi(s);
    std::vector<Mat3> xi(set.theta_a.size());
    for (std::size_t i = 0; i < xi.size(); ++i) xi[i] = set.theta_a[i] * a - set.theta_kappa[i] * ch;
    return xi;
}

/// Sum over cells of T_hom(m_c, G+-) h^3, averaged over both stencils; equals exchange + dmi of the hom grouping.
inline double integrate_thom(const std::vector<Vec3>& m, const Dims& dims, double h, const EffectiveModel& model) {
    const double inv_h = 1.0 / h;
    const double w = 0.5 * h * h * h;
    double total = 0.0;
    for (std::size_t c = 0; c < m.size(); ++c) {
        const detail::Stencil s = detail::stencil(dims, c);
        total += w * detail::thom_density_unchecked(m[c], detail::gradient(m, s.plus_from, s.plus_to, s.active, inv_h), model);
        total += w * detail::thom_density_unchecked(m[c], detail::gradient(m, s.minus_from, s.minus_to, s.active, inv_h), model);
    }
    return total;
}

}  // namespace chiralhom
