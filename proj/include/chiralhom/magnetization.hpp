#pragma once

#include "chiralhom/types.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace chiralhom {

/// Unit-vector field on a cell grid with spacing h. Cell (i,j,k) is centred at
/// h * (i + 1/2, j + 1/2, k + 1/2).
class Magnetization {
public:
    Magnetization() = default;
    Magnetization(Dims dims, double h, const Vec3& fill = Vec3::UnitX()) : dims_(dims), h_(h), m_(dims.size(), fill) {
        check_geometry();
        normalize();
    }
    Magnetization(Dims dims, double h, std::vector<Vec3> values) : dims_(dims), h_(h), m_(std::move(values)) {
        check_geometry();
        if (m_.size() != dims_.size()) throw ConfigError("magnetization: value count does not match dimensions");
        normalize();
    }

    const Dims& dims() const { return dims_; }
    double h() const { return h_; }
    double cell_volume() const { return h_ * h_ * h_; }
    std::size_t size() const { return m_.size(); }
    const Vec3& operator[](std::size_t i) const { return m_[i]; }
    const std::vector<Vec3>& values() const { return m_; }

    Vec3 center(std::size_t idx) const {
        std::size_t i, j, k;
        dims_.coords(idx, i, j, k);
        return h_ * Vec3(i + 0.5, j + 0.5, k + 0.5);
    }

    /// Replaces every value, projecting back onto the sphere.
    void assign(std::vector<Vec3> values) {
        if (values.size() != m_.size()) throw ConfigError("magnetization: value count does not match dimensions");
        m_ = std::move(values);
        normalize();
    }

    void set(std::size_t i, const Vec3& v) {
        m_[i] = v;
        normalize_one(i);
    }

    double max_norm_defect() const {
        double e = 0.0;
        for (const auto& v : m_) e = std::max(e, std::abs(v.norm() - 1.0));
        return e;
    }

    static Magnetization random(Dims dims, double h, std::uint64_t seed) {
        Rng rng(seed);
        std::vector<Vec3> v(dims.size());
        for (auto& x : v) x = rng.sphere();
        return Magnetization(dims, h, std::move(v));
    }

    /// In-plane helix cos(theta0 + q x3) e1 + sin(theta0 + q x3) e2 sampled at cell centres.
    static Magnetization helix(Dims dims, double h, double q, double theta0 = 0.0) {
        Magnetization m(dims, h);
        for (std::size_t c = 0; c < m.size(); ++c) {
            const double t = theta0 + q * m.center(c).z();
            m.m_[c] = Vec3(std::cos(t), std::sin(t), 0.0);
        }
        return m;
    }

private:
    void check_geometry() const {
        if (dims_.nx < 1 || dims_.ny < 1 || dims_.nz < 1) throw ConfigError("magnetization: dimensions must be >= 1");
        if (!(h_ > 0.0) || !std::isfinite(h_)) throw ConfigError("magnetization: spacing must be positive");
    }
    void normalize_one(std::size_t i) {
        const double n = m_[i].norm();
        if (!(n > 0.0) || !std::isfinite(n))
            throw NumericalError("magnetization: cannot normalize cell " + std::to_string(i));
        m_[i] /= n;
    }
    void normalize() {
        for (std::size_t i = 0; i < m_.size(); ++i) normalize_one(i);
    }

    Dims dims_;
    double h_ = 1.0;
    std::vector<Vec3> m_;
};

}  // namespace chiralhom
