#pragma once

// Stationary ergodic coefficient fields: equilibrium renewal laminates along e3 and
// iid lattices with a uniform random offset.

#include "chiralhom/phase.hpp"
#include "chiralhom/types.hpp"

#include <algorithm>
#include <cstdint>
#include <vector>

namespace chiralhom {

struct WidthLaw {
    enum class Kind { Fixed, Exponential };
    Kind kind = Kind::Fixed;
    double mean = 1.0;

    double sample(Rng& rng) const { return kind == Kind::Fixed ? mean : rng.exponential(mean); }

    /// Width of the layer covering a fixed point (length-biased law).
    double sample_length_biased(Rng& rng) const {
        if (kind == Kind::Fixed) return mean;
        // Length-biased exponential is Gamma(2, mean).
        return rng.exponential(mean) + rng.exponential(mean);
    }
};

struct LaminateSpec {
    PhaseTable table;
    std::vector<WidthLaw> widths;  // one per phase

    void validate() const {
        table.validate();
        if (widths.size() != table.size()) throw ConfigError("laminate: one width law per phase required");
        for (const auto& w : widths)
            if (!(w.mean > 0.0) || !std::isfinite(w.mean))
                throw ConfigError("laminate: layer widths must be positive and finite");
    }

    double min_width() const {
        double w = widths.front().mean;
        for (const auto& law : widths) w = std::min(w, law.mean);
        return w;
    }

    /// Mean layer width under the per-layer law.
    double mean_width() const {
        double w = 0.0;
        for (std::size_t i = 0; i < widths.size(); ++i) w += table.probabilities[i] * widths[i].mean;
        return w;
    }

    /// Probability that a fixed point lies in phase i: p_i w_i / sum_j p_j w_j.
    std::vector<double> point_probabilities() const {
        std::vector<double> w(table.size());
        double total = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) total += (w[i] = table.probabilities[i] * widths[i].mean);
        for (double& x : w) x /= total;
        return w;
    }

    /// Equal fixed widths make spatial averages coincide with per-layer expectations.
    bool equal_fixed_widths() const {
        for (const auto& w : widths)
            if (w.kind != WidthLaw::Kind::Fixed || w.mean != widths.front().mean) return false;
        return true;
    }

    static LaminateSpec fixed(PhaseTable table, double width = 1.0) {
        LaminateSpec s{std::move(table), {}};
        s.widths.assign(s.table.size(), WidthLaw{WidthLaw::Kind::Fixed, width});
        return s;
    }
};

/// Limits of spatial averages along a laminate (length-biased mixture).
inline Moments spatial_moments(const LaminateSpec& spec) {
    return weighted_moments(spec.table.phases, spec.point_probabilities());
}

/// One realization of the layer process in unscaled coordinates y = x3 / eps.
/// Interval k is [breakpoints[k], breakpoints[k+1]) and carries phase_index[k].
struct LaminateRealization {
    std::vector<double> breakpoints;
    std::vector<std::size_t> phase_index;
    PhaseTable table;
    std::uint64_t seed = 0;
    double offset = 0.0;  // position of the origin inside the first layer

    double begin() const { return breakpoints.front(); }
    double end() const { return breakpoints.back(); }
    std::size_t layers() const { return phase_index.size(); }

    /// Layer containing y; right-open intervals, so a breakpoint belongs to the layer on its right.
    std::size_t layer_at(double y) const {
        if (!(y >= begin() && y < end())) throw ConfigError("laminate: point outside the realized window");
        const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), y);
        return static_cast<std::size_t>(it - breakpoints.begin()) - 1;
    }

    const Phase& phase_at(double y) const { return table.phases[phase_index[layer_at(y)]]; }
};

/// Samples an equilibrium renewal laminate covering [0, length]: the layer containing
/// the origin is length-biased with the origin uniform inside it, later layers are iid.
inline LaminateRealization sample_laminate(const LaminateSpec& spec, std::uint64_t seed, double length) {
    if (!(length > 0.0) || !std::isfinite(length)) throw ConfigError("laminate: window length must be positive");
    spec.validate();
    Rng rng(seed);
    LaminateRealization r;
    r.table = spec.table;
    r.seed = seed;

    const std::size_t first = rng.categorical(spec.point_probabilities());
    const double w0 = spec.widths[first].sample_length_biased(rng);
    r.offset = rng.uniform() * w0;
    r.breakpoints.push_back(-r.offset);
    r.breakpoints.push_back(w0 - r.offset);
    r.phase_index.push_back(first);
    while (r.breakpoints.back() <= length) {
        const std::size_t i = rng.categorical(spec.table.probabilities);
        r.breakpoints.push_back(r.breakpoints.back() + spec.widths[i].sample(rng));
        r.phase_index.push_back(i);
    }
    return r;
}

/// Deterministic periodic laminate repeating the given phase sequence with fixed widths,
/// starting at y = 0.
inline LaminateRealization periodic_laminate(const PhaseTable& table, const std::vector<std::size_t>& pattern,
                                             const std::vector<double>& widths, double length) {
    table.validate();
    if (pattern.empty() || pattern.size() != widths.size()) throw ConfigError("periodic laminate: bad pattern");
    LaminateRealization r;
    r.table = table;
    r.breakpoints.push_back(0.0);
    for (std::size_t k = 0; r.breakpoints.back() <= length; ++k) {
        const std::size_t j = k % pattern.size();
        if (pattern[j] >= table.size() || !(widths[j] > 0.0)) throw ConfigError("periodic laminate: bad pattern");
        r.breakpoints.push_back(r.breakpoints.back() + widths[j]);
        r.phase_index.push_back(pattern[j]);
    }
    return r;
}

/// Coefficients at physical height x3 for scale eps, i.e. the phase of the layer containing x3/eps.
inline const Phase& eval_laminate(const LaminateRealization& r, double x3, double eps) {
    if (!(eps > 0.0)) throw ConfigError("laminate: eps must be positive");
    return r.phase_at(x3 / eps);
}

/// (1/t) * integral over [0, t] of q(phase(y)) dy, exact for the piecewise-constant field.
inline double birkhoff_average(const LaminateRealization& r, Quantity q, double t) {
    if (!(t > 0.0)) throw ConfigError("birkhoff: window must be positive");
    if (r.begin() > 0.0 || t > r.end()) throw ConfigError("birkhoff: window exceeds the realization");
    double integral = 0.0;
    std::size_t k = r.layer_at(0.0);
    for (; k < r.layers() && r.breakpoints[k] < t; ++k) {
        const double lo = std::max(0.0, r.breakpoints[k]);
        const double hi = std::min(t, r.breakpoints[k + 1]);
        integral += (hi - lo) * evaluate(q, r.table.phases[r.phase_index[k]]);
    }
    return integral / t;
}

/// Cell-wise coefficient field on a box, extended periodically. Cell (i,j,k) covers
/// offset + h*[i,i+1) x [j,j+1) x [k,k+1).
struct GridField {
    Dims dims;
    double h = 1.0;
    Vec3 offset = Vec3::Zero();
    std::vector<Phase> cells;
    std::vector<std::size_t> phase_index;  // empty when cells did not come from a table
    std::uint64_t seed = 0;

    const Phase& at(std::size_t idx) const { return cells[idx]; }

    /// Coefficients at point y of the periodically extended field.
    const Phase& at_point(const Vec3& y) const {
        std::size_t idx[3];
        for (int d = 0; d < 3; ++d) {
            const double n = static_cast<double>(dims[d]);
            double c = std::floor((y[d] - offset[d]) / h);
            c = c - n * std::floor(c / n);
            idx[d] = std::min(static_cast<std::size_t>(c), dims[d] - 1);
        }
        return cells[dims.index(idx[0], idx[1], idx[2])];
    }

    void validate(const ParameterBounds& bounds) const {
        if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1) throw ConfigError("grid field: dimensions must be >= 1");
        if (!(h > 0.0)) throw ConfigError("grid field: cell size must be positive");
        if (cells.size() != dims.size()) throw ConfigError("grid field: cell count mismatch");
        for (std::size_t i = 0; i < cells.size(); ++i) validate_phase(cells[i], bounds, "cell " + std::to_string(i));
    }

    /// Cell averages (empirical moments).
    Moments empirical_moments() const {
        return weighted_moments(cells, std::vector<double>(cells.size(), 1.0));
    }
};

/// iid phases on a lattice shifted by a uniform offset in [0, cell_size)^3.
inline GridField sample_checkerboard(const PhaseTable& table, double cell_size, Dims dims, std::uint64_t seed) {
    table.validate();
    if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1) throw ConfigError("checkerboard: dimensions must be >= 1");
    if (!(cell_size > 0.0)) throw ConfigError("checkerboard: cell size must be positive");
    Rng rng(seed);
    GridField g;
    g.dims = dims;
    g.h = cell_size;
    g.seed = seed;
    for (int d = 0; d < 3; ++d) g.offset[d] = rng.uniform() * cell_size;
    g.cells.reserve(dims.size());
    g.phase_index.reserve(dims.size());
    for (std::size_t c = 0; c < dims.size(); ++c) {
        const std::size_t i = rng.categorical(table.probabilities);
        g.phase_index.push_back(i);
        g.cells.push_back(table.phases[i]);
    }
    return g;
}

/// Samples a laminate at cell centres of an (nx, ny, nz) box of spacing h in unscaled
/// coordinates; every cell holds a single phase, layers are normal to e3.
inline GridField laminate_to_grid(const LaminateRealization& r, Dims dims, double h) {
    if (!(h > 0.0)) throw ConfigError("laminate grid: spacing must be positive");
    GridField g;
    g.dims = dims;
    g.h = h;
    g.seed = r.seed;
    g.cells.resize(dims.size());
    g.phase_index.resize(dims.size());
    for (std::size_t k = 0; k < dims.nz; ++k) {
        const std::size_t layer = r.layer_at((static_cast<double>(k) + 0.5) * h);
        for (std::size_t i = 0; i < dims.nx; ++i)
            for (std::size_t j = 0; j < dims.ny; ++j) {
                const std::size_t c = dims.index(i, j, k);
                g.phase_index[c] = r.phase_index[layer];
                g.cells[c] = r.table.phases[r.phase_index[layer]];
            }
    }
    return g;
}

}  // namespace chiralhom
