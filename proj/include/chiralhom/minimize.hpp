#pragma once

#include "chiralhom/energy.hpp"
#include "chiralhom/magnetization.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace chiralhom {

struct MinimizeOptions {
    std::size_t max_iters = 200000;
    double grad_tol = 1e-7;      // sup over cells of |P g_c| / h^3
    double initial_step = 1e-2;  // used for the first iteration only; later steps start from Barzilai-Borwein
    double armijo = 1e-4;
    double backtrack = 0.5;
    std::size_t max_halvings = 60;
    double max_step = 1e3;
    // A failed line search counts as converged when the predicted decrease step * <g, d> is below
    // stall_rtol * |E|, i.e. the remaining progress is lost in round-off of the energy sum.
    double stall_rtol = 1e-10;
    std::uint64_t seed = 0;
    // Optional Sobolev metric along e3: directions solve (shift - stiffness * d33) p = P g per column.
    bool precondition = false;
    double sobolev_stiffness = 1.0;
    double sobolev_shift = 1.0;

    void validate() const {
        if (max_iters < 1) throw ConfigError("minimize: max_iters must be positive");
        if (!(grad_tol > 0.0)) throw ConfigError("minimize: grad_tol must be positive");
        if (!(initial_step > 0.0)) throw ConfigError("minimize: initial_step must be positive");
        if (!(armijo > 0.0 && armijo < 1.0)) throw ConfigError("minimize: Armijo constant must lie in (0,1)");
        if (!(backtrack > 0.0 && backtrack < 1.0)) throw ConfigError("minimize: backtracking factor must lie in (0,1)");
        if (precondition && !(sobolev_stiffness >= 0.0 && sobolev_shift > 0.0))
            throw ConfigError("minimize: Sobolev metric needs stiffness >= 0 and shift > 0");
    }
};

struct TraceRow {
    std::size_t iter = 0;
    double energy = 0.0;
    double grad_norm = 0.0;
    double step = 0.0;
};

struct MinimizeTrace {
    std::vector<TraceRow> rows;
    Magnetization final_state;
    bool converged = false;
    bool line_search_failed = false;
    bool stalled = false;  // stopped at round-off level (counts as converged)
    std::size_t iterations = 0;
    double energy = 0.0;
    double grad_norm = 0.0;
};

/// g - (g.m) m.
inline Vec3 project_tangent(const Vec3& m, const Vec3& g) { return g - g.dot(m) * m; }

namespace detail {

inline double tangent_sup_norm(const std::vector<Vec3>& m, const std::vector<Vec3>& g, double inv_vol,
                               std::vector<Vec3>& pg) {
    double sup = 0.0;
    pg.resize(m.size());
    for (std::size_t c = 0; c < m.size(); ++c) {
        pg[c] = project_tangent(m[c], g[c]) * inv_vol;
        sup = std::max(sup, pg[c].norm());
    }
    return sup;
}

/// Tangent search direction: P(K^-1 P g) with K the line operator, or P g itself.
inline void search_direction(const Magnetization& geom, const std::vector<Vec3>& m, const std::vector<Vec3>& pg,
                             const MinimizeOptions& opts, std::vector<Vec3>& dir) {
    dir = pg;
    if (!opts.precondition) return;
    const Dims& dims = geom.dims();
    const std::size_t nz = dims.nz;
    const double off = opts.sobolev_stiffness / (geom.h() * geom.h());
    std::vector<double> cp(nz);
    std::vector<Vec3> dp(nz);
    for (std::size_t col = 0; col < dims.nx * dims.ny; ++col) {
        const std::size_t base = col * nz;
        // Thomas algorithm for the free-boundary second difference
        for (std::size_t k = 0; k < nz; ++k) {
            const double neighbours = static_cast<double>((k > 0) + (k + 1 < nz));
            const double diag = opts.sobolev_shift + off * neighbours;
            const double lower = k > 0 ? -off : 0.0;
            const double denom = diag - (k > 0 ? lower * cp[k - 1] : 0.0);
            cp[k] = k + 1 < nz ? -off / denom : 0.0;
            dp[k] = (pg[base + k] - (k > 0 ? Vec3(lower * dp[k - 1]) : Vec3::Zero())) / denom;
        }
        for (std::size_t k = nz; k-- > 0;) {
            if (k + 1 < nz) dp[k] -= cp[k] * dp[k + 1];
            dir[base + k] = project_tangent(m[base + k], dp[k]);
        }
    }
}

}  // namespace detail

/// Projected gradient descent on the product of spheres with normalization retraction and Armijo
/// backtracking. Trial steps come from the Barzilai-Borwein formula on successive search directions.
inline MinimizeTrace minimize_sphere(const EnergyFunction& energy, const Magnetization& m0,
                                     const MinimizeOptions& opts = {}) {
    opts.validate();
    const double inv_vol = 1.0 / m0.cell_volume();
    const double vol = m0.cell_volume();

    MinimizeTrace trace;
    std::vector<Vec3> m = m0.values();
    std::vector<Vec3> g, pg, dir, trial, g_trial, pg_trial, dir_trial;
    double e = energy(m, &g);
    double gnorm = detail::tangent_sup_norm(m, g, inv_vol, pg);
    detail::search_direction(m0, m, pg, opts, dir);
    trace.rows.push_back({0, e, gnorm, 0.0});

    double step = opts.initial_step;
    std::size_t it = 0;
    while (gnorm > opts.grad_tol && it < opts.max_iters) {
        // Armijo on the true energy along the retracted path
        double directional = 0.0;
        for (std::size_t c = 0; c < m.size(); ++c) directional += pg[c].dot(dir[c]) * vol;
        double tau = step;
        bool accepted = false;
        double e_trial = 0.0;
        trial.resize(m.size());
        for (std::size_t halving = 0; halving <= opts.max_halvings; ++halving) {
            for (std::size_t c = 0; c < m.size(); ++c) trial[c] = (m[c] - tau * dir[c]).normalized();
            e_trial = energy(trial, nullptr);
            if (std::isfinite(e_trial) && e_trial <= e - opts.armijo * tau * directional) {
                accepted = true;
                break;
            }
            tau *= opts.backtrack;
        }
        if (!accepted) {
            trace.line_search_failed = true;
            trace.stalled = step * directional <= opts.stall_rtol * std::max(std::abs(e), 1e-300);
            break;
        }
        energy(trial, &g_trial);
        const double gnorm_trial = detail::tangent_sup_norm(trial, g_trial, inv_vol, pg_trial);
        detail::search_direction(m0, trial, pg_trial, opts, dir_trial);

        // Barzilai-Borwein step from differences of iterates and search directions
        double ss = 0.0, sy = 0.0;
        for (std::size_t c = 0; c < m.size(); ++c) {
            const Vec3 s = trial[c] - m[c];
            const Vec3 y = dir_trial[c] - dir[c];
            ss += s.squaredNorm();
            sy += s.dot(y);
        }
        step = sy > 0.0 ? std::clamp(ss / sy, 1e-12, opts.max_step) : std::min(2.0 * tau, opts.max_step);

        m.swap(trial);
        g.swap(g_trial);
        pg.swap(pg_trial);
        dir.swap(dir_trial);
        e = e_trial;
        gnorm = gnorm_trial;
        ++it;
        trace.rows.push_back({it, e, gnorm, tau});
    }
    trace.converged = gnorm <= opts.grad_tol || trace.stalled;
    trace.iterations = it;
    trace.energy = e;
    trace.grad_norm = gnorm;
    trace.final_state = Magnetization(m0.dims(), m0.h(), std::move(m));
    return trace;
}

struct HelixFit {
    double theta0 = 0.0;  // in [0, 2 pi)
    double q = 0.0;
    double rms_residual = 0.0;
    double max_out_of_plane = 0.0;
};

/// Least-squares fit of the unwrapped in-plane angle to theta0 + q x3 on a column.
inline HelixFit fit_helix(const Magnetization& m) {
    const Dims& d = m.dims();
    if (d.nx != 1 || d.ny != 1) throw ConfigError("fit_helix: magnetization is not a column");
    const std::size_t n = m.size();
    std::vector<double> z(n), theta(n);
    HelixFit fit;
    double prev = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        const Vec3& v = m[c];
        const double inplane = std::hypot(v.x(), v.y());
        if (inplane < 0.5)
            throw NumericalError("fit_helix: in-plane magnitude " + std::to_string(inplane) + " below 0.5 at cell " +
                                 std::to_string(c));
        fit.max_out_of_plane = std::max(fit.max_out_of_plane, std::abs(v.z()));
        double t = std::atan2(v.y(), v.x());
        if (c > 0) t = prev + std::remainder(t - prev, 2.0 * std::numbers::pi);
        theta[c] = t;
        prev = t;
        z[c] = m.center(c).z();
    }
    if (n == 1) {
        fit.theta0 = theta[0] - 2.0 * std::numbers::pi * std::floor(theta[0] / (2.0 * std::numbers::pi));
        return fit;
    }
    Eigen::MatrixXd design(n, 2);
    Eigen::VectorXd rhs(n);
    for (std::size_t c = 0; c < n; ++c) {
        design(static_cast<Eigen::Index>(c), 0) = 1.0;
        design(static_cast<Eigen::Index>(c), 1) = z[c];
        rhs(static_cast<Eigen::Index>(c)) = theta[c];
    }
    const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(rhs);
    const Eigen::VectorXd res = design * coef - rhs;
    fit.q = coef(1);
    fit.rms_residual = std::sqrt(res.squaredNorm() / static_cast<double>(n));
    const double two_pi = 2.0 * std::numbers::pi;
    fit.theta0 = coef(0) - two_pi * std::floor(coef(0) / two_pi);
    if (fit.theta0 >= two_pi) fit.theta0 = 0.0;
    return fit;
}

}  // namespace chiralhom
