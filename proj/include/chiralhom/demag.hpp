#pragma once

// Whole-space stray field of a cell-wise constant magnetization density on a box.
//
// The field h_d = -N * (M m) is the discrete convolution with the cell-averaged
// demagnetization tensor of cubic cells (Newell, Williams, Dunlop 1993). The aperiodic
// convolution is carried out by FFT on a zero-padded box, which makes it exact: every
// offset between two cells of the domain fits in the padded box without wrap-around.

#include "chiralhom/types.hpp"

#include <fftw3.h>

#include <array>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <vector>

namespace chiralhom {

namespace newell {

using real = long double;

inline real asinh_ratio(real num, real den2) { return den2 > 0 ? std::asinh(num / std::sqrt(den2)) : 0; }

/// Auxiliary function f of the diagonal tensor entries.
inline real f(real x, real y, real z) {
    x = std::fabs(x);
    y = std::fabs(y);
    z = std::fabs(z);
    const real x2 = x * x, y2 = y * y, z2 = z * z;
    const real r = std::sqrt(x2 + y2 + z2);
    real v = (2 * x2 - y2 - z2) * r / 6;
    if (x2 + z2 > 0) v += y / 2 * (z2 - x2) * asinh_ratio(y, x2 + z2);
    if (x2 + y2 > 0) v += z / 2 * (y2 - x2) * asinh_ratio(z, x2 + y2);
    if (x * r > 0) v -= x * y * z * std::atan(y * z / (x * r));
    return v;
}

/// Auxiliary function g of the off-diagonal tensor entries.
inline real g(real x, real y, real z) {
    real sign = 1;
    if (x < 0) sign = -sign;
    if (y < 0) sign = -sign;
    x = std::fabs(x);
    y = std::fabs(y);
    z = std::fabs(z);
    const real x2 = x * x, y2 = y * y, z2 = z * z;
    const real r = std::sqrt(x2 + y2 + z2);
    real v = -x * y * r / 3;
    if (x2 + y2 > 0) v += x * y * z * asinh_ratio(z, x2 + y2);
    if (y2 + z2 > 0) v += y / 6 * (3 * z2 - y2) * asinh_ratio(x, y2 + z2);
    if (x2 + z2 > 0) v += x / 6 * (3 * z2 - x2) * asinh_ratio(y, x2 + z2);
    if (z * r > 0) v -= z * z2 / 6 * std::atan(x * y / (z * r));
    if (y * r > 0) v -= z * y2 / 2 * std::atan(x * z / (y * r));
    if (x * r > 0) v -= z * x2 / 2 * std::atan(y * z / (x * r));
    return sign * v;
}

/// Point-dipole approximation of the cell tensor, unit cubes: N = (I - 3 r r^T / |r|^2) / (4 pi |r|^3).
inline Mat3 dipole(const Vec3& r) {
    const double d = r.norm();
    return (Mat3::Identity() - 3.0 * r * r.transpose() / (d * d)) / (4.0 * M_PI * d * d * d);
}

inline constexpr double kFarField = 40.0;  // beyond this distance (in cells) use the dipole form

/// Sum over the 27-point second-difference stencil with weights 2 (centre) and -1 (sides).
template <typename Fn>
real stencil(Fn&& fn, long x, long y, long z) {
    static constexpr real w[3] = {-1, 2, -1};
    real s = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) s += w[i] * w[j] * w[k] * fn(x + i - 1, y + j - 1, z + k - 1);
    return s;
}

/// Demagnetization tensor between two unit cubes whose centres differ by (x, y, z).
inline Mat3 tensor(long x, long y, long z) {
    const Vec3 r(static_cast<double>(x), static_cast<double>(y), static_cast<double>(z));
    if (r.norm() > kFarField) return dipole(r);
    const real scale = 1 / (4 * static_cast<real>(M_PI));
    auto fxx = [](long a, long b, long c) { return f(a, b, c); };
    auto fyy = [](long a, long b, long c) { return f(b, a, c); };
    auto fzz = [](long a, long b, long c) { return f(c, b, a); };
    auto gxy = [](long a, long b, long c) { return g(a, b, c); };
    auto gxz = [](long a, long b, long c) { return g(a, c, b); };
    auto gyz = [](long a, long b, long c) { return g(b, c, a); };
    Mat3 n;
    n(0, 0) = static_cast<double>(scale * stencil(fxx, x, y, z));
    n(1, 1) = static_cast<double>(scale * stencil(fyy, x, y, z));
    n(2, 2) = static_cast<double>(scale * stencil(fzz, x, y, z));
    n(0, 1) = n(1, 0) = static_cast<double>(scale * stencil(gxy, x, y, z));
    n(0, 2) = n(2, 0) = static_cast<double>(scale * stencil(gxz, x, y, z));
    n(1, 2) = n(2, 1) = static_cast<double>(scale * stencil(gyz, x, y, z));
    return n;
}

}  // namespace newell

namespace detail {

// FFTW planning is not thread-safe; execution with the new-array interface is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};
template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <typename T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
    auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
    if (!p) throw std::bad_alloc();
    for (std::size_t i = 0; i < n; ++i) new (p + i) T{};
    return FftwBuffer<T>(p);
}

}  // namespace detail

class DemagSolver {
public:
    /// padding >= 2 in every direction with more than one cell.
    DemagSolver(Dims dims, int padding = 2) : dims_(dims) {
        if (padding < 2) throw ConfigError("stray field: padding factor must be at least 2");
        for (int d = 0; d < 3; ++d) padded_[d] = dims[d] == 1 ? 1 : static_cast<std::size_t>(padding) * dims[d];
        real_size_ = padded_[0] * padded_[1] * padded_[2];
        complex_size_ = padded_[0] * padded_[1] * (padded_[2] / 2 + 1);

        auto rbuf = detail::fftw_buffer<double>(real_size_);
        auto cbuf = detail::fftw_buffer<fftw_complex>(complex_size_);
        {
            std::lock_guard lock(detail::fftw_planner_mutex());
            const int n[3] = {static_cast<int>(padded_[0]), static_cast<int>(padded_[1]), static_cast<int>(padded_[2])};
            forward_ = fftw_plan_dft_r2c_3d(n[0], n[1], n[2], rbuf.get(), cbuf.get(), FFTW_ESTIMATE);
            backward_ = fftw_plan_dft_c2r_3d(n[0], n[1], n[2], cbuf.get(), rbuf.get(), FFTW_ESTIMATE);
        }
        if (!forward_ || !backward_) throw NumericalError("stray field: FFT planning failed");

        // Kernel components xx, yy, zz, xy, xz, yz on the padded grid.
        static constexpr int comp[6][2] = {{0, 0}, {1, 1}, {2, 2}, {0, 1}, {0, 2}, {1, 2}};
        std::array<detail::FftwBuffer<double>, 6> spatial;
        for (auto& s : spatial) s = detail::fftw_buffer<double>(real_size_);
        const long nx = static_cast<long>(dims.nx), ny = static_cast<long>(dims.ny), nz = static_cast<long>(dims.nz);
        // Diagonal entries are even in every offset coordinate and entry (i, j) is odd in x_i and
        // x_j, so one octant determines the rest.
        for (long x = 0; x < nx; ++x)
            for (long y = 0; y < ny; ++y)
                for (long z = 0; z < nz; ++z) {
                    const Mat3 t = newell::tensor(x, y, z);
                    for (int sx = 1; sx >= (x ? -1 : 1); sx -= 2)
                        for (int sy = 1; sy >= (y ? -1 : 1); sy -= 2)
                            for (int sz = 1; sz >= (z ? -1 : 1); sz -= 2) {
                                const int sign[3] = {sx, sy, sz};
                                const std::size_t idx = padded_index(sx * x, sy * y, sz * z);
                                for (int c = 0; c < 6; ++c)
                                    spatial[c][idx] = (comp[c][0] == comp[c][1] ? 1 : sign[comp[c][0]] * sign[comp[c][1]]) *
                                                      t(comp[c][0], comp[c][1]);
                            }
                }
        for (int c = 0; c < 6; ++c) {
            kernel_[c] = detail::fftw_buffer<fftw_complex>(complex_size_);
            fftw_execute_dft_r2c(forward_, spatial[c].get(), kernel_[c].get());
        }
    }

    ~DemagSolver() {
        std::lock_guard lock(detail::fftw_planner_mutex());
        if (forward_) fftw_destroy_plan(forward_);
        if (backward_) fftw_destroy_plan(backward_);
    }

    DemagSolver(const DemagSolver&) = delete;
    DemagSolver& operator=(const DemagSolver&) = delete;

    const Dims& dims() const { return dims_; }

    /// Stray field h_d of the magnetization density (M m) given per cell.
    std::vector<Vec3> field(const std::vector<Vec3>& density) const {
        if (density.size() != dims_.size()) throw ConfigError("stray field: input size does not match the grid");
        for (const auto& v : density)
            if (!v.allFinite()) throw NumericalError("stray field: non-finite input");
        std::array<detail::FftwBuffer<fftw_complex>, 3> spectra;
        auto work = detail::fftw_buffer<double>(real_size_);
        for (int d = 0; d < 3; ++d) {
            std::fill(work.get(), work.get() + real_size_, 0.0);
            for (std::size_t c = 0; c < density.size(); ++c) {
                std::size_t i, j, k;
                dims_.coords(c, i, j, k);
                work[(i * padded_[1] + j) * padded_[2] + k] = density[c][d];
            }
            spectra[d] = detail::fftw_buffer<fftw_complex>(complex_size_);
            fftw_execute_dft_r2c(forward_, work.get(), spectra[d].get());
        }
        // h = -N * M in Fourier space; kernel index for (row, col).
        static constexpr int kidx[3][3] = {{0, 3, 4}, {3, 1, 5}, {4, 5, 2}};
        auto out = detail::fftw_buffer<fftw_complex>(complex_size_);
        std::vector<Vec3> h(density.size(), Vec3::Zero());
        const double norm = 1.0 / static_cast<double>(real_size_);
        for (int row = 0; row < 3; ++row) {
            for (std::size_t q = 0; q < complex_size_; ++q) {
                std::complex<double> acc = 0.0;
                for (int col = 0; col < 3; ++col) {
                    const auto& kq = kernel_[kidx[row][col]][q];
                    const auto& mq = spectra[col][q];
                    acc += std::complex<double>(kq[0], kq[1]) * std::complex<double>(mq[0], mq[1]);
                }
                out[q][0] = -acc.real();
                out[q][1] = -acc.imag();
            }
            fftw_execute_dft_c2r(backward_, out.get(), work.get());
            for (std::size_t c = 0; c < density.size(); ++c) {
                std::size_t i, j, k;
                dims_.coords(c, i, j, k);
                h[c][row] = work[(i * padded_[1] + j) * padded_[2] + k] * norm;
            }
        }
        return h;
    }

private:
    std::size_t padded_index(long x, long y, long z) const {
        auto wrap = [](long v, std::size_t n) { return static_cast<std::size_t>(v < 0 ? v + static_cast<long>(n) : v); };
        return (wrap(x, padded_[0]) * padded_[1] + wrap(y, padded_[1])) * padded_[2] + wrap(z, padded_[2]);
    }

    Dims dims_;
    std::array<std::size_t, 3> padded_{};
    std::size_t real_size_ = 0, complex_size_ = 0;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
    std::array<detail::FftwBuffer<fftw_complex>, 6> kernel_;
};

/// Stray field of m weighted by the per-cell saturation magnetization.
inline std::vector<Vec3> stray_field(const std::vector<Vec3>& m, const std::vector<double>& m_sat, const Dims& dims,
                                     int padding = 2) {
    if (m.size() != m_sat.size()) throw ConfigError("stray field: saturation field size mismatch");
    std::vector<Vec3> density(m.size());
    for (std::size_t c = 0; c < m.size(); ++c) density[c] = m_sat[c] * m[c];
    return DemagSolver(dims, padding).field(density);
}

}  // namespace chiralhom
