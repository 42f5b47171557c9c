#pragma once

// Corrector problems
//
//   div(a grad phi_a + a e_i) = 0,  div(a grad phi_kappa + kappa e_i) = 0,  div(grad phi_M + M e_i) = 0,
//
// solved on periodic cell grids (finite volumes, harmonic face averages, Jacobi-CG) and in
// closed form for laminates, plus assembly of the effective tensors.
//
// Matrices Theta follow the gradient convention (Theta)_{di} = d_d phi_i: column i is the
// corrector gradient for the unit direction e_i.

#include "chiralhom/chi.hpp"
#include "chiralhom/microstructure.hpp"
#include "chiralhom/parallel.hpp"
#include "chiralhom/phase.hpp"
#include "chiralhom/types.hpp"

#include <array>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

namespace chiralhom {

enum class CorrectorKind { A = 0, Kappa = 1, M = 2 };

inline std::string_view name(CorrectorKind k) {
    switch (k) {
        case CorrectorKind::A: return "a";
        case CorrectorKind::Kappa: return "kappa";
        case CorrectorKind::M: return "m";
    }
    return "?";
}

/// Diffusion coefficient c and source r of one corrector problem.
inline double corrector_c(CorrectorKind k, const Phase& p) { return k == CorrectorKind::M ? 1.0 : p.a; }
inline double corrector_r(CorrectorKind k, const Phase& p) {
    switch (k) {
        case CorrectorKind::A: return p.a;
        case CorrectorKind::Kappa: return p.kappa;
        case CorrectorKind::M: return p.m_sat;
    }
    return 0.0;
}

/// Solution of one corrector problem on a periodic grid.
struct RveCorrector {
    CorrectorKind kind = CorrectorKind::A;
    Dims dims;
    /// Cell values of Theta, reconstructed from the face fluxes:
    /// Theta_{di} = (mean of the two d-face fluxes - r delta_{di}) / c.
    std::vector<Mat3> theta;
    /// face_grad[i][d][c]: (phi_i(c + e_d) - phi_i(c)) / h on the face between c and c + e_d.
    std::array<std::array<std::vector<double>, 3>, 3> face_grad;
    /// Harmonic face coefficient c_f and face source r_f = c_f * mean(r/c) on d-faces.
    std::array<std::vector<double>, 3> face_c;
    std::array<std::vector<double>, 3> face_r;
    std::array<double, 3> residual{};
    std::array<std::size_t, 3> iterations{};
};

struct CgOptions {
    double tol = 1e-10;
    std::size_t max_iter = 0;  // 0 selects 1000 * n_cells^(1/3)

    std::size_t iteration_limit(std::size_t cells) const {
        if (max_iter) return max_iter;
        return static_cast<std::size_t>(1000.0 * std::cbrt(static_cast<double>(cells))) + 10;
    }
};

namespace detail {

inline std::size_t neighbor(const Dims& dims, std::size_t c, int d, bool forward) {
    const std::size_t n = dims[d];
    const std::size_t pos = dims.coord(c, d);
    const std::size_t stride = dims.stride(d);
    if (forward) return pos + 1 < n ? c + stride : c - pos * stride;
    return pos > 0 ? c - stride : c + (n - 1) * stride;
}

struct FaceOperator {
    const Dims& dims;
    const std::array<std::vector<double>, 3>& cf;

    void apply(const std::vector<double>& x, std::vector<double>& y) const {
        const std::size_t n = dims.size();
        for (std::size_t c = 0; c < n; ++c) {
            double acc = 0.0;
            for (int d = 0; d < 3; ++d) {
                if (dims[d] == 1) continue;
                const std::size_t fwd = neighbor(dims, c, d, true);
                const std::size_t bwd = neighbor(dims, c, d, false);
                acc += cf[d][c] * (x[c] - x[fwd]) + cf[d][bwd] * (x[c] - x[bwd]);
            }
            y[c] = acc;
        }
    }
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline void remove_mean(std::vector<double>& x) {
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    for (double& v : x) v -= m;
}

}  // namespace detail

/// Solves one corrector problem for all three unit directions on the periodic RVE.
/// Throws NumericalError when CG does not reach the tolerance within the iteration limit.
inline RveCorrector solve_corrector_rve(const GridField& field, CorrectorKind kind, const CgOptions& opts = {},
                                        unsigned threads = 1) {
    if (!(opts.tol > 0.0)) throw ConfigError("corrector: tolerance must be positive");
    const Dims& dims = field.dims;
    const std::size_t n = dims.size();
    if (field.cells.size() != n) throw ConfigError("corrector: field has wrong cell count");
    for (const auto& p : field.cells)
        if (!(corrector_c(kind, p) > 0.0)) throw ConfigError("corrector: non-positive diffusion coefficient");

    RveCorrector out;
    out.kind = kind;
    out.dims = dims;
    for (int d = 0; d < 3; ++d) {
        out.face_c[d].resize(n);
        out.face_r[d].resize(n);
        for (std::size_t c = 0; c < n; ++c) {
            const std::size_t q = detail::neighbor(dims, c, d, true);
            const Phase& pp = field.cells[c];
            const Phase& pq = field.cells[q];
            const double cp = corrector_c(kind, pp), cq = corrector_c(kind, pq);
            const double cf = 2.0 * cp * cq / (cp + cq);
            out.face_c[d][c] = cf;
            out.face_r[d][c] = cf * 0.5 * (corrector_r(kind, pp) / cp + corrector_r(kind, pq) / cq);
        }
    }

    // Lengths scale out: phi is solved with unit spacing, gradients are dimensionless.
    const detail::FaceOperator op{dims, out.face_c};
    std::vector<double> diag(n, 0.0);
    for (std::size_t c = 0; c < n; ++c)
        for (int d = 0; d < 3; ++d) {
            if (dims[d] == 1) continue;
            diag[c] += out.face_c[d][c] + out.face_c[d][detail::neighbor(dims, c, d, false)];
        }

    std::array<std::vector<double>, 3> phi;
    parallel_for(3, threads, [&](std::size_t i) {
        const int dir = static_cast<int>(i);
        std::vector<double> b(n, 0.0);
        if (dims[dir] > 1)
            for (std::size_t c = 0; c < n; ++c)
                b[c] = out.face_r[dir][c] - out.face_r[dir][detail::neighbor(dims, c, dir, false)];
        const double bnorm = std::sqrt(detail::dot(b, b));
        std::vector<double> x(n, 0.0);
        std::size_t it = 0;
        double rel = 0.0;
        if (bnorm > 0.0) {
            std::vector<double> r = b, z(n), p(n), ap(n);
            for (std::size_t c = 0; c < n; ++c) z[c] = diag[c] > 0.0 ? r[c] / diag[c] : 0.0;
            p = z;
            double rz = detail::dot(r, z);
            const std::size_t limit = opts.iteration_limit(n);
            rel = 1.0;
            while (it < limit) {
                op.apply(p, ap);
                const double alpha = rz / detail::dot(p, ap);
                for (std::size_t c = 0; c < n; ++c) {
                    x[c] += alpha * p[c];
                    r[c] -= alpha * ap[c];
                }
                ++it;
                rel = std::sqrt(detail::dot(r, r)) / bnorm;
                if (rel <= opts.tol) break;
                for (std::size_t c = 0; c < n; ++c) z[c] = diag[c] > 0.0 ? r[c] / diag[c] : 0.0;
                const double rz_new = detail::dot(r, z);
                const double beta = rz_new / rz;
                rz = rz_new;
                for (std::size_t c = 0; c < n; ++c) p[c] = z[c] + beta * p[c];
            }
            // Recompute the true residual; the recursive one drifts near machine precision.
            op.apply(x, ap);
            double rr = 0.0;
            for (std::size_t c = 0; c < n; ++c) rr += (b[c] - ap[c]) * (b[c] - ap[c]);
            rel = std::sqrt(rr) / bnorm;
            if (rel > opts.tol)
                throw NumericalError("corrector '" + std::string(name(kind)) + "' direction " + std::to_string(i) +
                                     ": CG stopped after " + std::to_string(it) +
                                     " iterations with relative residual " + std::to_string(rel));
            detail::remove_mean(x);
        }
        out.residual[i] = rel;
        out.iterations[i] = it;
        phi[i] = std::move(x);
    });

    for (int i = 0; i < 3; ++i)
        for (int d = 0; d < 3; ++d) {
            auto& g = out.face_grad[i][d];
            g.assign(n, 0.0);
            if (dims[d] == 1) continue;
            for (std::size_t c = 0; c < n; ++c) g[c] = phi[i][detail::neighbor(dims, c, d, true)] - phi[i][c];
        }

    out.theta.assign(n, Mat3::Zero());
    for (std::size_t c = 0; c < n; ++c) {
        const Phase& p = field.cells[c];
        const double cc = corrector_c(kind, p), rc = corrector_r(kind, p);
        for (int d = 0; d < 3; ++d) {
            const std::size_t bwd = detail::neighbor(dims, c, d, false);
            for (int i = 0; i < 3; ++i) {
                const double src = d == i ? 1.0 : 0.0;
                const double f_hi = out.face_c[d][c] * out.face_grad[i][d][c] + src * out.face_r[d][c];
                const double f_lo = out.face_c[d][bwd] * out.face_grad[i][d][bwd] + src * out.face_r[d][bwd];
                out.theta[c](d, i) = (0.5 * (f_hi + f_lo) - src * rc) / cc;
            }
        }
    }
    return out;
}

/// Correctors in either representation: per grid cell (RVE) or per phase (laminate closed form).
struct CorrectorSet {
    enum class Form { Rve, Laminate };
    Form form = Form::Laminate;
    std::vector<Mat3> theta_a, theta_kappa, theta_m;
    // RVE only
    Dims dims;
    std::array<RveCorrector, 3> rve;
    double tol = 0.0;
    std::uint64_t seed = 0;

    const std::vector<Mat3>& theta(CorrectorKind k) const {
        return k == CorrectorKind::A ? theta_a : (k == CorrectorKind::Kappa ? theta_kappa : theta_m);
    }
};

inline CorrectorSet solve_correctors_rve(const GridField& field, const CgOptions& opts = {}, unsigned threads = 1) {
    CorrectorSet set;
    set.form = CorrectorSet::Form::Rve;
    set.dims = field.dims;
    set.tol = opts.tol;
    set.seed = field.seed;
    for (int k = 0; k < 3; ++k) set.rve[k] = solve_corrector_rve(field, static_cast<CorrectorKind>(k), opts, threads);
    set.theta_a = set.rve[0].theta;
    set.theta_kappa = set.rve[1].theta;
    set.theta_m = set.rve[2].theta;
    return set;
}

/// Laminate closed forms (layers normal to e3): only the (3,3) entries are nonzero,
///   Theta_a = H/a - 1,  Theta_kappa = E[kappa/a] H/a - kappa/a,  Theta_M = E[M] - M,
/// with H = E[1/a]^-1.
inline CorrectorSet laminate_correctors(const Moments& mo, const PhaseTable& table) {
    table.validate();
    CorrectorSet set;
    set.form = CorrectorSet::Form::Laminate;
    const double harmonic = mo.harmonic_a();
    for (const Phase& p : table.phases) {
        Mat3 ta = Mat3::Zero(), tk = Mat3::Zero(), tm = Mat3::Zero();
        ta(2, 2) = harmonic / p.a - 1.0;
        tk(2, 2) = mo.mean_kappa_over_a * harmonic / p.a - p.kappa / p.a;
        tm(2, 2) = mo.mean_m - p.m_sat;
        set.theta_a.push_back(ta);
        set.theta_kappa.push_back(tk);
        set.theta_m.push_back(tm);
    }
    return set;
}

/// Tensors of the homogenized energy.
struct EffectiveModel {
    Mat3 a_ex = Mat3::Identity();     // E[a Id - Theta_a^T a Theta_a]
    Mat3 k_dmi = Mat3::Zero();        // E[kappa Id - Theta_a^T a Theta_kappa]
    Mat3 d_kappa = Mat3::Zero();      // E[Theta_kappa^T a Theta_kappa]
    Mat3 d_m = Mat3::Zero();          // E[Theta_M^T Theta_M]
    double m_mean = 0.0;              // E[M_sat]
    Moments moments;                  // includes the anisotropy expectation
    double mu0 = 1.0;
    Vec3 h_applied = Vec3::Zero();

    // Diagnostics of the assembly.
    Mat3 a_ex_alt = Mat3::Identity();  // second assembly route of a_ex
    std::array<double, 3> corrector_mean_norm{};

    /// Effective anisotropy density -1/2 chi(s):d_kappa chi(s) + mu0/2 s.d_m s.
    double corrector_anisotropy(const Vec3& s) const {
        return -0.5 * chi_quadratic(s, d_kappa) + 0.5 * mu0 * s.dot(d_m * s);
    }
};

/// Assembly from per-phase correctors with exact expectations under the table's law.
inline EffectiveModel assemble_effective(const CorrectorSet& set, const PhaseTable& table, double mu0,
                                         const Vec3& h_applied) {
    if (set.form != CorrectorSet::Form::Laminate || set.theta_a.size() != table.size())
        throw ConfigError("assemble_effective: correctors do not match the phase table");
    EffectiveModel m;
    m.moments = moments(table);
    m.mu0 = mu0;
    m.h_applied = h_applied;
    m.m_mean = m.moments.mean_m;
    Mat3 route_a = Mat3::Zero(), tat = Mat3::Zero(), mixed = Mat3::Zero(), dk = Mat3::Zero(), dm = Mat3::Zero();
    Mat3 mean_ta = Mat3::Zero(), mean_tk = Mat3::Zero(), mean_tm = Mat3::Zero();
    for (std::size_t i = 0; i < table.size(); ++i) {
        const double p = table.probabilities[i];
        const Phase& ph = table.phases[i];
        const Mat3& ta = set.theta_a[i];
        const Mat3& tk = set.theta_kappa[i];
        const Mat3& tm = set.theta_m[i];
        const Mat3 ita = Mat3::Identity() + ta;
        route_a += p * ph.a * ita.transpose() * ita;
        tat += p * ph.a * ta.transpose() * ta;
        mixed += p * ph.a * ta.transpose() * tk;
        dk += p * ph.a * tk.transpose() * tk;
        dm += p * tm.transpose() * tm;
        mean_ta += p * ta;
        mean_tk += p * tk;
        mean_tm += p * tm;
    }
    m.a_ex = route_a;
    m.a_ex_alt = m.moments.mean_a * Mat3::Identity() - tat;
    m.k_dmi = m.moments.mean_kappa * Mat3::Identity() - mixed;
    m.d_kappa = dk;
    m.d_m = dm;
    m.corrector_mean_norm = {mean_ta.norm(), mean_tk.norm(), mean_tm.norm()};
    return m;
}

/// Assembly on a periodic RVE. a_ex and k_dmi are assembled on the staggered face
/// gradients, where the discrete weak form makes both a_ex routes agree to solver
/// tolerance; d_kappa and d_m are Gram matrices of the cell values of Theta.
inline EffectiveModel assemble_effective(const CorrectorSet& set, const GridField& field, double mu0,
                                         const Vec3& h_applied) {
    if (set.form != CorrectorSet::Form::Rve || !(set.dims == field.dims) || set.theta_a.size() != field.cells.size())
        throw ConfigError("assemble_effective: correctors do not match the grid");
    const Dims& dims = field.dims;
    const std::size_t n = dims.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    const RveCorrector& ca = set.rve[0];
    const RveCorrector& ck = set.rve[1];

    EffectiveModel m;
    m.moments = field.empirical_moments();
    m.mu0 = mu0;
    m.h_applied = h_applied;
    m.m_mean = m.moments.mean_m;

    Mat3 route_a = Mat3::Zero(), tat = Mat3::Zero(), mixed = Mat3::Zero();
    Vec3 mean_c = Vec3::Zero(), mean_rk = Vec3::Zero();
    for (int d = 0; d < 3; ++d)
        for (std::size_t c = 0; c < n; ++c) {
            const double cf = ca.face_c[d][c];
            mean_c[d] += cf * inv_n;
            mean_rk[d] += ck.face_r[d][c] * inv_n;
            for (int i = 0; i < 3; ++i) {
                const double gi = ca.face_grad[i][d][c];
                const double ui = gi + (d == i ? 1.0 : 0.0);
                for (int j = 0; j < 3; ++j) {
                    const double gj = ca.face_grad[j][d][c];
                    const double uj = gj + (d == j ? 1.0 : 0.0);
                    route_a(i, j) += cf * ui * uj * inv_n;
                    tat(i, j) += cf * gi * gj * inv_n;
                    mixed(i, j) += cf * gi * ck.face_grad[j][d][c] * inv_n;
                }
            }
        }
    m.a_ex = route_a;
    m.a_ex_alt = Mat3(mean_c.asDiagonal()) - tat;
    m.k_dmi = Mat3(mean_rk.asDiagonal()) - mixed;

    Mat3 dk = Mat3::Zero(), dm = Mat3::Zero();
    for (std::size_t c = 0; c < n; ++c) {
        dk += field.cells[c].a * set.theta_kappa[c].transpose() * set.theta_kappa[c] * inv_n;
        dm += set.theta_m[c].transpose() * set.theta_m[c] * inv_n;
    }
    m.d_kappa = dk;
    m.d_m = dm;

    for (int k = 0; k < 3; ++k) {
        Mat3 mean = Mat3::Zero();
        for (int i = 0; i < 3; ++i)
            for (int d = 0; d < 3; ++d) {
                double s = 0.0;
                for (double g : set.rve[k].face_grad[i][d]) s += g;
                mean(d, i) = s * inv_n;
            }
        m.corrector_mean_norm[k] = mean.norm();
    }
    return m;
}

/// Effective model of a laminate straight from its phase law.
inline EffectiveModel laminate_effective(const PhaseTable& table, double mu0 = 1.0, const Vec3& h_applied = Vec3::Zero()) {
    return assemble_effective(laminate_correctors(moments(table), table), table, mu0, h_applied);
}

/// One-point law of the stationary laminate: phase i with probability p_i w_i / sum p_j w_j.
inline PhaseTable point_law_table(const LaminateSpec& spec) {
    PhaseTable t = spec.table;
    t.probabilities = spec.point_probabilities();
    double total = 0.0;
    for (double p : t.probabilities) total += p;
    t.probabilities.back() += 1.0 - total;
    return t;
}

namespace detail {
inline void require_tangent(const Vec3& s, const Mat3& a, const char* who) {
    if ((a * s).cwiseAbs().maxCoeff() > 1e-10) throw ConfigError(std::string(who) + ": rows of A are not tangent at s");
}
}  // namespace detail

/// Brute-force value of the tangentially homogenized density for a laminate law:
///   min over zero-mean, row-3-only, tangent Xi of  sum_c w_c (1/2 a_c |A + Xi_c|^2 - kappa_c chi(s):(A + Xi_c)),
/// with the phases spread over n_cells cells of a 1D period, solved through its KKT system.
inline double thom_bruteforce(const Vec3& s, const Mat3& a, const PhaseTable& table, std::size_t n_cells) {
    table.validate();
    detail::require_tangent(s, a, "thom_bruteforce");
    if (n_cells < table.size()) throw ConfigError("thom_bruteforce: need at least one cell per phase");

    // cells per phase proportional to probability; weights keep the law exact.
    std::vector<std::size_t> count(table.size(), 0);
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (table.probabilities[i] <= 0.0) continue;
        count[i] = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(table.probabilities[i] * n_cells)));
    }
    std::vector<double> wc, ac, kc;
    for (std::size_t i = 0; i < table.size(); ++i)
        for (std::size_t c = 0; c < count[i]; ++c) {
            wc.push_back(table.probabilities[i] / static_cast<double>(count[i]));
            ac.push_back(table.phases[i].a);
            kc.push_back(table.phases[i].kappa);
        }
    const std::size_t n = wc.size();

    // Orthonormal basis of the tangent plane.
    Vec3 t1 = s.unitOrthogonal();
    Vec3 t2 = s.normalized().cross(t1);
    Eigen::Matrix<double, 3, 2> basis;
    basis << t1, t2;

    const Mat3 ch = chi(s);
    const Vec3 a3 = a.row(2).transpose();
    const Vec3 chi3 = ch.row(2).transpose();

    const Eigen::Index dim = static_cast<Eigen::Index>(2 * n + 2);
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
    for (std::size_t c = 0; c < n; ++c) {
        const Eigen::Index o = static_cast<Eigen::Index>(2 * c);
        kkt(o, o) = wc[c] * ac[c];
        kkt(o + 1, o + 1) = wc[c] * ac[c];
        const Eigen::Vector2d lin = wc[c] * basis.transpose() * (ac[c] * a3 - kc[c] * chi3);
        rhs.segment<2>(o) = -lin;
        for (int k = 0; k < 2; ++k) {
            kkt(o + k, 2 * n + k) = wc[c];
            kkt(2 * n + k, o + k) = wc[c];
        }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (!lu.isInvertible()) throw NumericalError("thom_bruteforce: singular normal equations");
    const Eigen::VectorXd sol = lu.solve(rhs);

    double value = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        Mat3 xi = Mat3::Zero();
        xi.row(2) = (basis * sol.segment<2>(static_cast<Eigen::Index>(2 * c))).transpose();
        const Mat3 total = a + xi;
        value += wc[c] * (0.5 * ac[c] * total.squaredNorm() - kc[c] * frob(ch, total));
    }
    return value;
}

}  // namespace chiralhom
