#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace chiralhom {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Invalid user input: bad configuration, violated preconditions, malformed files.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical procedure failed to deliver (non-convergence, non-finite values).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw ConfigError(message);
}

/// Frobenius product A:B.
inline double frob(const Mat3& a, const Mat3& b) { return (a.array() * b.array()).sum(); }

inline Vec3 unit(int i) { return Vec3::Unit(i); }

/// Deterministic random stream (splitmix64). Distributions are converted by hand so
/// sequences do not depend on the standard library's distribution code.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ^ 0x9E3779B97F4A7C15ULL) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Exponential with the given mean.
    double exponential(double mean) { return -mean * std::log1p(-uniform()); }

    double normal() {
        // Box-Muller; one value per call keeps the stream position simple.
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    /// Index drawn from nonnegative weights (need not be normalized).
    std::size_t categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform() * total;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (u < weights[i]) return i;
            u -= weights[i];
        }
        for (std::size_t i = weights.size(); i-- > 0;)
            if (weights[i] > 0.0) return i;
        return 0;
    }

    /// Uniform direction on the unit sphere.
    Vec3 sphere() {
        const double z = 2.0 * uniform() - 1.0;
        const double phi = 2.0 * M_PI * uniform();
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        return {r * std::cos(phi), r * std::sin(phi), z};
    }

private:
    std::uint64_t state_;
};

/// Dimensions of a cell grid. Cells are stored row-major: z runs fastest.
struct Dims {
    std::size_t nx = 1, ny = 1, nz = 1;

    std::size_t size() const { return nx * ny * nz; }
    std::size_t operator[](int d) const { return d == 0 ? nx : (d == 1 ? ny : nz); }
    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return (i * ny + j) * nz + k; }
    std::size_t stride(int d) const { return d == 0 ? ny * nz : (d == 1 ? nz : 1); }
    void coords(std::size_t idx, std::size_t& i, std::size_t& j, std::size_t& k) const {
        k = idx % nz;
        j = (idx / nz) % ny;
        i = idx / (ny * nz);
    }
    std::size_t coord(std::size_t idx, int d) const {
        std::size_t i, j, k;
        coords(idx, i, j, k);
        return d == 0 ? i : (d == 1 ? j : k);
    }
    bool operator==(const Dims&) const = default;
};

}  // namespace chiralhom
