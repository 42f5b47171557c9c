#include "chiralhom/correctors.hpp"
#include "chiralhom/minimize.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace chiralhom;

namespace {

Phase phase(double a, double kappa, double m = 0.0) {
    Phase p;
    p.a = a;
    p.kappa = kappa;
    p.m_sat = m;
    return p;
}

PhaseTable chiral_pair() { return PhaseTable::make({phase(1, 1, 1), phase(2, -1, 1)}, {0.5, 0.5}); }

Magnetization rotate_z(const Magnetization& m, double alpha) {
    const Mat3 r = Eigen::AngleAxisd(alpha, Vec3::UnitZ()).toRotationMatrix();
    std::vector<Vec3> v;
    for (const auto& x : m.values()) v.push_back(r * x);
    return Magnetization(m.dims(), m.h(), std::move(v));
}

}  // namespace

TEST(ProjectTangent, Basics) {
    const Vec3 m = Vec3(1, 2, 2).normalized();
    EXPECT_LE(project_tangent(m, 3.0 * m).norm(), 1e-15);
    const Vec3 g = m.unitOrthogonal() * 2.0;
    EXPECT_LE((project_tangent(m, g) - g).norm(), 1e-15);
    EXPECT_EQ(project_tangent(Vec3::UnitZ(), Vec3(1, 2, 3)), Vec3(1, 2, 0));
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        const Vec3 s = rng.sphere();
        const Vec3 x(rng.normal(), rng.normal(), rng.normal());
        EXPECT_LE(std::abs(project_tangent(s, x).dot(s)), 1e-14);
    }
}

TEST(Minimize, StationaryStartTakesNoSteps) {
    const Dims d{2, 2, 3};
    const EpsEnergy e(MaterialGrid::uniform(phase(1.0, 0.0), d, 1.0), 1.0, Vec3::Zero());
    const Magnetization m0(d, 1.0, Vec3(0, 0.6, 0.8));
    const MinimizeTrace t = minimize_sphere(e.function(), m0);
    EXPECT_EQ(t.iterations, 0u);
    EXPECT_TRUE(t.converged);
    EXPECT_EQ(t.final_state.values(), m0.values());
}

TEST(Minimize, ZeemanDominatedAlignsWithField) {
    const Dims d{3, 3, 3};
    const Vec3 ha(1e4, 0, 0);
    const EpsEnergy e(MaterialGrid::uniform(phase(1.0, 0.5, 1.0), d, 1.0), 1.0, ha);
    MinimizeOptions o;
    o.grad_tol = 1e-6;
    const MinimizeTrace t = minimize_sphere(e.function(), Magnetization::random(d, 1.0, 4), o);
    EXPECT_TRUE(t.converged);
    for (const auto& v : t.final_state.values()) EXPECT_GT(v.x(), 0.9999);
    const double aligned = e.evaluate(std::vector<Vec3>(d.size(), Vec3::UnitX())).total;
    EXPECT_NEAR(t.energy, aligned, 1e-6 * std::abs(aligned));
}

TEST(Minimize, MonotoneDescentAndUnitNorm) {
    const Dims d{1, 1, 64};
    const HomEnergy e(laminate_effective(chiral_pair()), d, 0.25, TermMask::exchange_dmi());
    MinimizeOptions o;
    o.grad_tol = 1e-6;
    const MinimizeTrace t = minimize_sphere(e.function(), Magnetization::random(d, 0.25, 2), o);
    for (std::size_t i = 1; i < t.rows.size(); ++i) EXPECT_LE(t.rows[i].energy, t.rows[i - 1].energy);
    EXPECT_LE(t.final_state.max_norm_defect(), 1e-12);
    // deterministic
    const MinimizeTrace u = minimize_sphere(e.function(), Magnetization::random(d, 0.25, 2), o);
    EXPECT_EQ(t.final_state.values(), u.final_state.values());
}

TEST(Minimize, LaminateColumnConvergesToHelix) {
    const PhaseTable table = chiral_pair();
    const Moments mo = moments(table);
    const EffectiveModel model = laminate_effective(table);
    const double length = 64.0;
    const Dims d{1, 1, 256};
    const double h = length / 256;
    const HomEnergy e(model, d, h, TermMask::exchange_dmi());
    for (bool precondition : {false, true}) {
        MinimizeOptions o;
        o.grad_tol = 1e-6;
        o.precondition = precondition;
        o.sobolev_stiffness = model.a_ex(2, 2);
        o.sobolev_shift = mo.mean_kappa_sq_over_a;
        const MinimizeTrace t = minimize_sphere(e.function(), Magnetization::random(d, h, 6), o);
        EXPECT_TRUE(t.converged);
        const HelixFit fit = fit_helix(t.final_state);
        EXPECT_NEAR(fit.q, 0.25, 0.02 * 0.25);
        EXPECT_NEAR(t.energy / (h * h), -0.375 * length, 0.01 * 0.375 * length);
        EXPECT_LE(fit.max_out_of_plane, 0.02);
    }
}

TEST(Minimize, RotationEquivariance) {
    const Dims d{1, 1, 128};
    const double h = 0.25;
    const HomEnergy e(laminate_effective(chiral_pair()), d, h, TermMask::exchange_dmi());
    MinimizeOptions o;
    o.grad_tol = 1e-7;
    const MinimizeTrace t = minimize_sphere(e.function(), Magnetization::random(d, h, 3), o);
    const HelixFit base = fit_helix(t.final_state);
    for (double alpha : {0.3, 2.0, -1.2}) {
        const Magnetization r = rotate_z(t.final_state, alpha);
        EXPECT_NEAR(e.evaluate(r.values()).total, t.energy, 1e-10 * std::abs(t.energy));
        const HelixFit f = fit_helix(r);
        EXPECT_NEAR(std::remainder(f.theta0 - base.theta0 - alpha, 2 * std::numbers::pi), 0.0, 1e-9);
        EXPECT_NEAR(f.q, base.q, 1e-12);
    }
}

TEST(Minimize, InvalidOptionsRejected) {
    MinimizeOptions o;
    o.armijo = 1.5;
    EXPECT_THROW(o.validate(), ConfigError);
    o = {};
    o.precondition = true;
    o.sobolev_shift = 0.0;
    EXPECT_THROW(o.validate(), ConfigError);
}

TEST(FitHelix, ExactHelix) {
    const Magnetization m = Magnetization::helix({1, 1, 256}, 0.25, 0.25, 0.0);
    const HelixFit f = fit_helix(m);
    EXPECT_NEAR(f.q, 0.25, 1e-12);
    EXPECT_LE(f.rms_residual, 1e-12);
    EXPECT_NEAR(std::remainder(f.theta0, 2 * std::numbers::pi), 0.0, 1e-12);
    EXPECT_GE(f.theta0, 0.0);
    EXPECT_LT(f.theta0, 2 * std::numbers::pi);
}

TEST(FitHelix, TiltedHelix) {
    const Magnetization base = Magnetization::helix({1, 1, 256}, 0.25, 0.4, 5.9);
    std::vector<Vec3> v = base.values();
    for (auto& x : v) x = (x + Vec3(0, 0, 1e-3)).normalized();
    const HelixFit f = fit_helix(Magnetization(base.dims(), 0.25, v));
    EXPECT_NEAR(f.q, 0.4, 1e-3);
    EXPECT_NEAR(f.max_out_of_plane, 1e-3, 1e-6);
}

TEST(FitHelix, ConstantAndFailures) {
    EXPECT_NEAR(fit_helix(Magnetization({1, 1, 10}, 1.0, Vec3(1, 1, 0))).q, 0.0, 1e-14);
    EXPECT_THROW(fit_helix(Magnetization({1, 1, 10}, 1.0, Vec3::UnitZ())), NumericalError);
    EXPECT_THROW(fit_helix(Magnetization({2, 1, 10}, 1.0)), ConfigError);
}
