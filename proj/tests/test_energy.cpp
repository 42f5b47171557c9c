#include "chiralhom/correctors.hpp"
#include "chiralhom/energy.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace chiralhom;

namespace {

Phase phase(double a, double kappa, double m = 0.0, double k1 = 0.0, Vec3 e = Vec3::UnitZ()) {
    Phase p;
    p.a = a;
    p.kappa = kappa;
    p.m_sat = m;
    p.k1 = k1;
    p.easy_axis = e;
    return p;
}

PhaseTable chiral_pair() {
    return PhaseTable::make({phase(1, 1, 1.3, 0.7, Vec3(0, 0.6, 0.8)), phase(2, -1, 0.4, 0.2, Vec3::UnitX())}, {0.5, 0.5});
}

Vec3 helix_at(double q, double z) { return {std::cos(q * z), std::sin(q * z), 0.0}; }

double fd_max_rel_error(const std::function<double(const std::vector<Vec3>&, std::vector<Vec3>*)>& f,
                        const std::vector<Vec3>& m) {
    std::vector<Vec3> g;
    f(m, &g);
    double err = 0.0, scale = 0.0;
    for (std::size_t c = 0; c < m.size(); ++c)
        for (int k = 0; k < 3; ++k) {
            auto mp = m, mm = m;
            mp[c][k] += 1e-5;
            mm[c][k] -= 1e-5;
            const double fd = (f(mp, nullptr) - f(mm, nullptr)) / 2e-5;
            err = std::max(err, std::abs(fd - g[c][k]));
            scale = std::max(scale, std::abs(g[c][k]));
        }
    return scale > 0.0 ? err / scale : err;
}

}  // namespace

TEST(Chi, RowsForE3AndZero) {
    Mat3 expect;
    expect << 0, -1, 0, 1, 0, 0, 0, 0, 0;
    EXPECT_EQ(chi(Vec3::UnitZ()), expect);
    EXPECT_TRUE(chi(Vec3::Zero()).isZero(0.0));
}

TEST(Chi, CurlIdentityForHelixByFiniteDifferences) {
    const double q = 0.8, step = 1e-5;
    Rng rng(5);
    for (int i = 0; i < 10; ++i) {
        const double z = 10.0 * rng.uniform();
        Mat3 g = Mat3::Zero();
        g.row(2) = ((helix_at(q, z + step) - helix_at(q, z - step)) / (2 * step)).transpose();
        const Vec3 m = helix_at(q, z);
        EXPECT_NEAR(frob(chi(m), g), q, 1e-8);
        EXPECT_NEAR(m.dot(curl_from_gradient(g)), -q, 1e-8);
    }
}

TEST(Chi, ContractHelpersMatchDefinition) {
    Rng rng(1);
    for (int i = 0; i < 5; ++i) {
        const Vec3 s = rng.sphere();
        Mat3 b, d;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) b(r, c) = rng.normal(), d(r, c) = rng.normal();
        d = d + d.transpose();
        EXPECT_NEAR(chi_contract(s, b), frob(chi(s), b), 1e-14);
        EXPECT_NEAR(chi_quadratic(s, d), d.trace() - s.dot(d * s), 1e-12);
        const Vec3 ds = chi_contract_ds(b);
        for (int k = 0; k < 3; ++k) {
            Vec3 sp = s, sm = s;
            sp[k] += 1e-6;
            sm[k] -= 1e-6;
            EXPECT_NEAR(ds[k], (chi_contract(sp, b) - chi_contract(sm, b)) / 2e-6, 1e-8);
        }
    }
}

TEST(EpsEnergy, ConstantMagnetizationHasNoGradientEnergy) {
    const GridField f = sample_checkerboard(chiral_pair(), 1.0, {3, 4, 5}, 2);
    const Magnetization m({3, 4, 5}, 1.0, Vec3(1, 2, 2));
    const EnergyBreakdown e = energy_eps(m, MaterialGrid::from_cells(f), 1.0, Vec3::Zero());
    EXPECT_EQ(e.exchange, 0.0);
    EXPECT_EQ(e.dmi, 0.0);
}

TEST(EpsEnergy, HelixDensitiesConvergeQuadratically) {
    const double a = 1.3, kappa = 0.9, q = 0.7, length = 8.0;
    double prev_ex = 0.0, prev_dm = 0.0;
    for (std::size_t n : {32u, 64u, 128u, 256u}) {
        const double h = length / static_cast<double>(n);
        const Dims d{1, 1, n};
        const Magnetization m = Magnetization::helix(d, h, q, 0.3);
        const EnergyBreakdown e =
            energy_eps(m, MaterialGrid::uniform(phase(a, kappa), d, h), 1.0, Vec3::Zero(), TermMask::exchange_dmi());
        const double vol = length * h * h;
        const double err_ex = std::abs(e.exchange / vol - 0.5 * a * q * q);
        const double err_dm = std::abs(e.dmi / vol + kappa * q);
        if (prev_ex > 0.0) {
            EXPECT_GE(std::log2(prev_ex / err_ex), 1.9);
            EXPECT_GE(std::log2(prev_dm / err_dm), 1.9);
        }
        prev_ex = err_ex;
        prev_dm = err_dm;
    }
    EXPECT_LT(prev_ex, 1e-4);
}

TEST(EpsEnergy, LaminateHelixDmiApproachesSpatialMean) {
    const LaminateSpec spec = LaminateSpec::fixed(chiral_pair(), 1.0);
    const LaminateRealization r = sample_laminate(spec, 6, 40.0);
    const double q = 0.5, length = 32.0;
    const double exact = -q * birkhoff_average(r, Quantity::Kappa, length);
    double err = 1.0;
    for (std::size_t n : {256u, 1024u, 4096u}) {
        const double h = length / static_cast<double>(n);
        const Dims d{1, 1, n};
        const EnergyBreakdown e = energy_eps(Magnetization::helix(d, h, q), r, 1.0, 1.0, 1.0, Vec3::Zero(),
                                             TermMask::exchange_dmi());
        const double new_err = std::abs(e.dmi / (length * h * h) - exact);
        EXPECT_LT(new_err, err);
        err = new_err;
    }
    EXPECT_LT(err, 1e-3);
}

TEST(EpsEnergy, ResolutionRuleIsEnforced) {
    const LaminateRealization r = sample_laminate(LaminateSpec::fixed(chiral_pair()), 1, 100.0);
    EXPECT_THROW(MaterialGrid::from_laminate(r, 0.5, {1, 1, 64}, 0.2, 1.0), ConfigError);
    EXPECT_NO_THROW(MaterialGrid::from_laminate(r, 0.5, {1, 1, 64}, 0.125, 1.0));
    const LaminateRealization short_r = sample_laminate(LaminateSpec::fixed(chiral_pair()), 1, 10.0);
    EXPECT_THROW(MaterialGrid::from_laminate(short_r, 0.5, {1, 1, 64}, 0.125, 1.0), ConfigError);
}

TEST(EpsEnergy, IdentitiesOnRandomFields) {
    const Dims d{4, 3, 5};
    const GridField f = sample_checkerboard(chiral_pair(), 1.0, d, 4);
    const EpsEnergy energy(MaterialGrid::from_cells(f), 1.0, Vec3::Zero());
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto m = Magnetization::random(d, 1.0, s).values();
        const EnergyBreakdown e = energy.evaluate(m);
        const double scale = std::abs(e.exchange) + std::abs(e.dmi);
        EXPECT_LE(std::abs(energy.dmi_via_curl(m) - e.dmi), 1e-10 * scale);
        EXPECT_LE(std::abs(energy.completed_square(m) - e.exchange - e.dmi), 1e-10 * scale);
        EXPECT_GE(e.stray, 0.0);
        EXPECT_GE(e.anisotropy, 0.0);
    }
}

TEST(EpsEnergy, GradientsMatchFiniteDifferencesPerTerm) {
    const Dims d{4, 4, 4};
    const GridField f = sample_checkerboard(chiral_pair(), 1.0, d, 7);
    const auto m = Magnetization::random(d, 1.0, 3).values();
    for (const char* term : {"exchange", "dmi", "stray", "anisotropy", "zeeman"}) {
        const EpsEnergy e(MaterialGrid::from_cells(f), 1.1, Vec3(0.3, -0.2, 0.5), TermMask::only(term));
        EXPECT_LE(fd_max_rel_error(e.function(), m), 1e-6) << term;
    }
    const EpsEnergy all(MaterialGrid::from_cells(f), 1.1, Vec3(0.3, -0.2, 0.5));
    EXPECT_LE(fd_max_rel_error(all.function(), m), 1e-6);
}

TEST(EpsEnergy, StationaryAndZeemanGradients) {
    const Dims d{2, 3, 2};
    const EpsEnergy plain(MaterialGrid::uniform(phase(1.5, 0.0), d, 0.5), 1.0, Vec3::Zero());
    std::vector<Vec3> g;
    plain.evaluate(std::vector<Vec3>(d.size(), Vec3::UnitY()), &g);
    for (const auto& v : g) EXPECT_EQ(v.norm(), 0.0);

    const Vec3 ha(0.2, -1.0, 0.4);
    const EpsEnergy z(MaterialGrid::uniform(phase(1.0, 0.5, 0.8), d, 0.5), 1.2, ha, TermMask::only("zeeman"));
    z.evaluate(Magnetization::random(d, 0.5, 1).values(), &g);
    for (const auto& v : g) EXPECT_LE((v + 1.2 * 0.8 * ha * 0.125).norm(), 1e-15);
}

TEST(HomEnergy, SinglePhaseEqualsHeterogeneousEnergy) {
    const Phase p = phase(1.4, -0.6, 0.9, 0.3, Vec3(0, 0.6, 0.8));
    const PhaseTable t = PhaseTable::single(p);
    const Dims d{3, 4, 5};
    const Vec3 ha(0.1, 0.2, -0.3);
    const EffectiveModel model = laminate_effective(t, 1.3, ha);
    const Magnetization m = Magnetization::random(d, 0.7, 8);
    const EnergyBreakdown eps = energy_eps(m, MaterialGrid::uniform(p, d, 0.7), 1.3, ha);
    const HomBreakdown hom = energy_hom(m, model);
    EXPECT_NEAR(hom.hom.total, eps.total, 1e-12 * std::abs(eps.exchange));
    EXPECT_NEAR(hom.hom.exchange, eps.exchange, 1e-12 * std::abs(eps.exchange));
    EXPECT_NEAR(hom.hom.dmi, eps.dmi, 1e-12 * std::abs(eps.exchange));
    EXPECT_NEAR(hom.hom.stray, eps.stray, 1e-12 * std::abs(eps.exchange));
    EXPECT_NEAR(hom.hom.anisotropy, eps.anisotropy, 1e-12 * std::abs(eps.exchange));
}

TEST(HomEnergy, LaminateHelixEnergyFormula) {
    const PhaseTable t = chiral_pair();
    const Moments mo = moments(t);
    const EffectiveModel model = laminate_effective(t);
    const double length = 1.0, H = mo.harmonic_a();
    const std::size_t n = 256;
    const double h = length / n;
    for (double q : {0.1, 0.25, 1.0}) {
        const Magnetization m = Magnetization::helix({1, 1, n}, h, q, 1.1);
        const HomBreakdown e = energy_hom(m, model, TermMask::exchange_dmi());
        const double g = (e.hom.exchange + e.hom.dmi) / (h * h);
        const double expect = length * (0.5 * H * q * q - mo.mean_kappa_over_a * H * q -
                                        0.5 * (mo.mean_kappa_sq_over_a - mo.mean_kappa_over_a * mo.mean_kappa_over_a * H));
        EXPECT_NEAR(g, expect, 1e-4 * std::max(1.0, std::abs(expect)));
    }
    const Magnetization best = Magnetization::helix({1, 1, n}, h, mo.mean_kappa_over_a);
    const HomBreakdown e = energy_hom(best, model, TermMask::exchange_dmi());
    EXPECT_NEAR((e.hom.exchange + e.hom.dmi) / (h * h), -0.375, 1e-5);
}

TEST(HomEnergy, RegroupingAndThomIntegral) {
    const Dims d{3, 3, 4};
    EffectiveModel model = laminate_effective(chiral_pair(), 1.1, Vec3(0.3, -0.2, 0.5));
    model.a_ex(0, 1) = model.a_ex(1, 0) = 0.2;
    model.k_dmi(0, 2) = 0.3;
    model.d_m = 0.1 * Mat3::Identity();
    const HomEnergy energy(model, d, 0.9);
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto m = Magnetization::random(d, 0.9, s).values();
        const HomBreakdown b = energy.evaluate_both(m);
        const double scale = std::abs(b.hom.exchange) + std::abs(b.hom.dmi) + std::abs(b.hom.stray) + std::abs(b.hom.anisotropy);
        EXPECT_LE(std::abs(b.hom.total - b.eff.total), 1e-12 * scale);
        EXPECT_LE(std::abs(integrate_thom(m, d, 0.9, model) - b.hom.exchange - b.hom.dmi), 1e-10 * scale);
    }
}

TEST(HomEnergy, GradientsMatchFiniteDifferences) {
    const Dims d{4, 4, 4};
    EffectiveModel model = laminate_effective(chiral_pair(), 1.1, Vec3(0.3, -0.2, 0.5));
    model.a_ex(0, 1) = model.a_ex(1, 0) = 0.2;
    model.k_dmi(0, 2) = 0.3;
    model.d_m = 0.1 * Mat3::Identity();
    const auto m = Magnetization::random(d, 1.0, 12).values();
    for (const char* term : {"exchange", "dmi", "stray", "anisotropy", "zeeman"}) {
        const HomEnergy e(model, d, 1.0, TermMask::only(term));
        EXPECT_LE(fd_max_rel_error(e.function(), m), 1e-6) << term;
    }
    EXPECT_LE(fd_max_rel_error(HomEnergy(model, d, 1.0).function(), m), 1e-6);
}

TEST(Thom, ZeroForAchiralZeroGradient) {
    const PhaseTable t = PhaseTable::make({phase(1, 0), phase(3, 0)}, {0.3, 0.7});
    const EffectiveModel model = laminate_effective(t);
    Rng rng(2);
    const Vec3 s = rng.sphere();
    EXPECT_EQ(thom_density(s, Mat3::Zero(), model), 0.0);
    for (const Mat3& xi : thom_xi(s, Mat3::Zero(), laminate_correctors(moments(t), t))) EXPECT_TRUE(xi.isZero(0.0));
    EXPECT_THROW(thom_density(Vec3::UnitZ(), Mat3::Identity(), model), ConfigError);
}
