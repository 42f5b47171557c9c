#pragma once

#include "chiralhom/types.hpp"

namespace chiralhom {

/// Matrix whose i-th row is e_i x s. Gradients use (grad m)_ij = d_i m_j, so that
/// m . curl m = -chi(m) : grad m.
inline Mat3 chi(const Vec3& s) {
    Mat3 c;
    for (int i = 0; i < 3; ++i) c.row(i) = unit(i).cross(s).transpose();
    return c;
}

/// curl m from a gradient tensor in the (d_i m_j) convention.
inline Vec3 curl_from_gradient(const Mat3& g) {
    return {g(1, 2) - g(2, 1), g(2, 0) - g(0, 2), g(0, 1) - g(1, 0)};
}

/// chi(s) : B without forming chi(s).
inline double chi_contract(const Vec3& s, const Mat3& b) {
    double v = 0.0;
    for (int i = 0; i < 3; ++i) v += unit(i).cross(s).dot(b.row(i).transpose());
    return v;
}

/// Gradient of s -> chi(s) : B, which is sum_i B_i x e_i.
inline Vec3 chi_contract_ds(const Mat3& b) {
    Vec3 g = Vec3::Zero();
    for (int i = 0; i < 3; ++i) g += b.row(i).transpose().cross(unit(i));
    return g;
}

/// chi(s) : D chi(s) = tr(D)|s|^2 - s.D s for symmetric D.
inline double chi_quadratic(const Vec3& s, const Mat3& d) {
    return frob(chi(s), d * chi(s));
}

/// Orthogonal projector onto the tangent plane of the sphere at unit s.
inline Mat3 tangent_projector(const Vec3& s) { return Mat3::Identity() - s * s.transpose(); }

}  // namespace chiralhom
