#pragma once

#include "chiralhom/types.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace chiralhom {

/// Uniform bounds on the material coefficients: c_ex <= a <= C_ex, |kappa| <= C_dmi,
/// 0 <= m_sat <= C_sat.
struct ParameterBounds {
    double c_ex = 0.0;
    double C_ex = 0.0;
    double C_dmi = 0.0;
    double C_sat = 0.0;
};

/// Homogeneous material phase. Energy density of the uniaxial anisotropy is
/// k1 * (1 - (s.e)^2) with e the easy axis.
struct Phase {
    double a = 1.0;
    double kappa = 0.0;
    double m_sat = 0.0;
    double k1 = 0.0;
    Vec3 easy_axis = Vec3::UnitZ();

    double anisotropy(const Vec3& s) const {
        const double p = s.dot(easy_axis);
        return k1 * (1.0 - p * p);
    }
};

inline void validate_phase(const Phase& p, const ParameterBounds& b, std::string_view where = "phase") {
    std::ostringstream os;
    os << where << ": ";
    if (!(std::isfinite(p.a) && std::isfinite(p.kappa) && std::isfinite(p.m_sat) && std::isfinite(p.k1)) ||
        !p.easy_axis.allFinite())
        throw ConfigError(os.str() + "non-finite coefficient");
    if (!(b.c_ex > 0.0)) throw ConfigError(os.str() + "lower exchange bound c_ex must be positive");
    if (p.a < b.c_ex || p.a > b.C_ex) {
        os << "exchange coefficient a=" << p.a << " outside [" << b.c_ex << ", " << b.C_ex << "]";
        throw ConfigError(os.str());
    }
    if (std::abs(p.kappa) > b.C_dmi) {
        os << "|kappa|=" << std::abs(p.kappa) << " exceeds C_dmi=" << b.C_dmi;
        throw ConfigError(os.str());
    }
    if (p.m_sat < 0.0 || p.m_sat > b.C_sat) {
        os << "m_sat=" << p.m_sat << " outside [0, " << b.C_sat << "]";
        throw ConfigError(os.str());
    }
    if (p.k1 < 0.0) throw ConfigError(os.str() + "anisotropy strength k1 must be nonnegative");
    if (std::abs(p.easy_axis.norm() - 1.0) > 1e-12) throw ConfigError(os.str() + "easy axis is not a unit vector");
}

/// Tightest bounds admitting every phase in the list.
inline ParameterBounds bounds_for(const std::vector<Phase>& phases) {
    ParameterBounds b;
    if (phases.empty()) return b;
    b.c_ex = phases.front().a;
    for (const auto& p : phases) {
        b.c_ex = std::min(b.c_ex, p.a);
        b.C_ex = std::max(b.C_ex, p.a);
        b.C_dmi = std::max(b.C_dmi, std::abs(p.kappa));
        b.C_sat = std::max(b.C_sat, p.m_sat);
    }
    return b;
}

/// Discrete law of the random coefficients.
struct PhaseTable {
    std::vector<Phase> phases;
    std::vector<double> probabilities;
    ParameterBounds bounds;

    std::size_t size() const { return phases.size(); }

    void validate() const {
        if (phases.empty()) throw ConfigError("phase table is empty");
        if (phases.size() != probabilities.size())
            throw ConfigError("phase table: phases and probabilities differ in length");
        double total = 0.0;
        for (std::size_t i = 0; i < phases.size(); ++i) {
            if (!(probabilities[i] >= 0.0) || !std::isfinite(probabilities[i]))
                throw ConfigError("phase table: probability " + std::to_string(i) + " is negative or non-finite");
            total += probabilities[i];
            validate_phase(phases[i], bounds, "phase " + std::to_string(i));
        }
        if (std::abs(total - 1.0) > 1e-12) {
            std::ostringstream os;
            os.precision(17);
            os << "phase table: probabilities sum to " << total << ", expected 1";
            throw ConfigError(os.str());
        }
    }

    /// Single-phase table with bounds taken from the phase itself.
    static PhaseTable single(const Phase& p) {
        PhaseTable t{{p}, {1.0}, bounds_for({p})};
        t.validate();
        return t;
    }

    static PhaseTable make(std::vector<Phase> phases, std::vector<double> probabilities) {
        PhaseTable t{std::move(phases), std::move(probabilities), {}};
        t.bounds = bounds_for(t.phases);
        t.validate();
        return t;
    }
};

/// Scalar observables tracked by the averaging experiments.
enum class Quantity { A, InvA, Kappa, KappaOverA, KappaSqOverA, M, MSq };

inline constexpr std::array<Quantity, 7> kAllQuantities = {Quantity::A,          Quantity::InvA,
                                                           Quantity::Kappa,      Quantity::KappaOverA,
                                                           Quantity::KappaSqOverA, Quantity::M,
                                                           Quantity::MSq};

inline double evaluate(Quantity q, const Phase& p) {
    switch (q) {
        case Quantity::A: return p.a;
        case Quantity::InvA: return 1.0 / p.a;
        case Quantity::Kappa: return p.kappa;
        case Quantity::KappaOverA: return p.kappa / p.a;
        case Quantity::KappaSqOverA: return p.kappa * p.kappa / p.a;
        case Quantity::M: return p.m_sat;
        case Quantity::MSq: return p.m_sat * p.m_sat;
    }
    return 0.0;
}

inline std::string_view name(Quantity q) {
    switch (q) {
        case Quantity::A: return "a";
        case Quantity::InvA: return "1/a";
        case Quantity::Kappa: return "kappa";
        case Quantity::KappaOverA: return "kappa/a";
        case Quantity::KappaSqOverA: return "kappa^2/a";
        case Quantity::M: return "M";
        case Quantity::MSq: return "M^2";
    }
    return "?";
}

inline std::optional<Quantity> parse_quantity(std::string_view s) {
    for (Quantity q : kAllQuantities)
        if (name(q) == s) return q;
    return std::nullopt;
}

/// Expectations of the coefficient law entering the effective model. The
/// anisotropy expectation is kept as E[k1] - s.E[k1 e(x)e]s.
struct Moments {
    double mean_a = 0.0;
    double mean_inv_a = 0.0;
    double mean_kappa = 0.0;
    double mean_kappa_over_a = 0.0;
    double mean_kappa_sq_over_a = 0.0;
    double mean_m = 0.0;
    double mean_m_sq = 0.0;
    double mean_k1 = 0.0;
    Mat3 mean_k1_ee = Mat3::Zero();

    /// E[1/a]^-1, the Reuss (harmonic) mean.
    double harmonic_a() const { return 1.0 / mean_inv_a; }

    double get(Quantity q) const {
        switch (q) {
            case Quantity::A: return mean_a;
            case Quantity::InvA: return mean_inv_a;
            case Quantity::Kappa: return mean_kappa;
            case Quantity::KappaOverA: return mean_kappa_over_a;
            case Quantity::KappaSqOverA: return mean_kappa_sq_over_a;
            case Quantity::M: return mean_m;
            case Quantity::MSq: return mean_m_sq;
        }
        return 0.0;
    }

    double anisotropy(const Vec3& s) const { return mean_k1 - s.dot(mean_k1_ee * s); }
};

/// Weighted moments of a list of phases; weights need not be normalized.
inline Moments weighted_moments(const std::vector<Phase>& phases, const std::vector<double>& weights) {
    Moments mo;
    double total = 0.0;
    for (std::size_t i = 0; i < phases.size(); ++i) {
        const Phase& p = phases[i];
        const double w = weights[i];
        if (w == 0.0) continue;
        total += w;
        mo.mean_a += w * p.a;
        mo.mean_inv_a += w / p.a;
        mo.mean_kappa += w * p.kappa;
        mo.mean_kappa_over_a += w * p.kappa / p.a;
        mo.mean_kappa_sq_over_a += w * p.kappa * p.kappa / p.a;
        mo.mean_m += w * p.m_sat;
        mo.mean_m_sq += w * p.m_sat * p.m_sat;
        mo.mean_k1 += w * p.k1;
        mo.mean_k1_ee += w * p.k1 * p.easy_axis * p.easy_axis.transpose();
    }
    const double inv = 1.0 / total;
    mo.mean_a *= inv;
    mo.mean_inv_a *= inv;
    mo.mean_kappa *= inv;
    mo.mean_kappa_over_a *= inv;
    mo.mean_kappa_sq_over_a *= inv;
    mo.mean_m *= inv;
    mo.mean_m_sq *= inv;
    mo.mean_k1 *= inv;
    mo.mean_k1_ee *= inv;
    return mo;
}

/// Exact expectations under the per-layer phase law.
inline Moments moments(const PhaseTable& table) {
    table.validate();
    return weighted_moments(table.phases, table.probabilities);
}

/// Variance of a quantity under the phase law.
inline double variance(const PhaseTable& table, Quantity q) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const double v = evaluate(q, table.phases[i]);
        mean += table.probabilities[i] * v;
        sq += table.probabilities[i] * v * v;
    }
    return std::max(0.0, sq - mean * mean);
}

}  // namespace chiralhom
