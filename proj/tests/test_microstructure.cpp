#include "chiralhom/microstructure.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace chiralhom;

namespace {

Phase phase(double a, double kappa, double m = 0.0) {
    Phase p;
    p.a = a;
    p.kappa = kappa;
    p.m_sat = m;
    return p;
}

PhaseTable two_phase() { return PhaseTable::make({phase(1, 1, 1), phase(2, -1, 0.5)}, {0.5, 0.5}); }

}  // namespace

TEST(PhaseTable, RejectsProbabilitiesNotSummingToOne) {
    EXPECT_THROW(PhaseTable::make({phase(1, 0), phase(2, 0)}, {0.5, 0.4}), ConfigError);
}

TEST(PhaseTable, RejectsOutOfBoundsCoefficients) {
    PhaseTable t = two_phase();
    t.bounds.C_dmi = 0.5;
    EXPECT_THROW(t.validate(), ConfigError);
    t = two_phase();
    t.phases[0].easy_axis = Vec3(1, 1, 0);
    EXPECT_THROW(t.validate(), ConfigError);
}

TEST(Moments, TwoPointExchange) {
    const Moments mo = moments(PhaseTable::make({phase(1, 0), phase(2, 0)}, {0.5, 0.5}));
    EXPECT_DOUBLE_EQ(mo.mean_a, 1.5);
    EXPECT_DOUBLE_EQ(mo.mean_inv_a, 0.75);
    EXPECT_NEAR(mo.harmonic_a(), 4.0 / 3.0, 1e-15);
}

TEST(Moments, TwoPointChiral) {
    const Moments mo = moments(two_phase());
    EXPECT_DOUBLE_EQ(mo.mean_kappa, 0.0);
    EXPECT_DOUBLE_EQ(mo.mean_kappa_over_a, 0.25);
    EXPECT_DOUBLE_EQ(mo.mean_kappa_sq_over_a, 0.75);
    EXPECT_DOUBLE_EQ(mo.mean_m, 0.75);
    EXPECT_DOUBLE_EQ(mo.mean_m_sq, 0.625);
}

TEST(Moments, SinglePhaseEqualsPhaseValues) {
    Phase p = phase(2.5, -0.7, 0.3);
    p.k1 = 0.4;
    const Moments mo = moments(PhaseTable::single(p));
    EXPECT_DOUBLE_EQ(mo.mean_a, 2.5);
    EXPECT_DOUBLE_EQ(mo.harmonic_a(), 2.5);
    EXPECT_DOUBLE_EQ(mo.mean_kappa, -0.7);
    EXPECT_DOUBLE_EQ(mo.mean_kappa_sq_over_a, 0.49 / 2.5);
    EXPECT_DOUBLE_EQ(mo.mean_m_sq, 0.09);
    EXPECT_DOUBLE_EQ(mo.mean_k1, 0.4);
    for (Quantity q : kAllQuantities) EXPECT_DOUBLE_EQ(variance(PhaseTable::single(p), q), 0.0);
}

TEST(Moments, QuantityNamesRoundTrip) {
    for (Quantity q : kAllQuantities) {
        auto parsed = parse_quantity(name(q));
        ASSERT_TRUE(parsed.has_value());
        EXPECT_EQ(*parsed, q);
    }
    EXPECT_FALSE(parse_quantity("nope").has_value());
}

TEST(Laminate, SinglePhaseIsConstant) {
    const LaminateRealization r = sample_laminate(LaminateSpec::fixed(PhaseTable::single(phase(1, 1))), 3, 10.0);
    EXPECT_LE(r.begin(), 0.0);
    EXPECT_GT(r.end(), 10.0);
    for (double y = 0.0; y < 10.0; y += 0.37) EXPECT_EQ(r.phase_at(y).a, 1.0);
    for (Quantity q : kAllQuantities) EXPECT_EQ(birkhoff_average(r, q, 7.3), evaluate(q, r.table.phases[0]));
}

TEST(Laminate, PhaseFractionWithinBinomialBand) {
    const LaminateSpec spec = LaminateSpec::fixed(two_phase());
    const LaminateRealization r = sample_laminate(spec, 42, 1e4 + 2);
    std::size_t ones = 0, n = 0;
    for (std::size_t k = r.layer_at(0.0); n < 10000; ++k, ++n) ones += r.phase_index[k] == 0;
    EXPECT_LE(std::abs(static_cast<double>(ones) / 1e4 - 0.5), 3.0 * std::sqrt(0.25 / 1e4));
}

TEST(Laminate, SeedsAreDeterministicAndDistinct) {
    const LaminateSpec spec = LaminateSpec::fixed(two_phase());
    const auto a = sample_laminate(spec, 1, 8.0), b = sample_laminate(spec, 1, 8.0), c = sample_laminate(spec, 2, 50.0);
    EXPECT_EQ(a.breakpoints, b.breakpoints);
    EXPECT_EQ(a.phase_index, b.phase_index);
    const auto a50 = sample_laminate(spec, 1, 50.0);
    EXPECT_TRUE(a50.breakpoints != c.breakpoints || a50.phase_index != c.phase_index);
    EXPECT_EQ(c.table.phases.size(), a.table.phases.size());
    EXPECT_EQ(c.table.probabilities, a.table.probabilities);
}

TEST(Laminate, BreakpointBelongsToRightLayer) {
    const LaminateRealization r = periodic_laminate(two_phase(), {0, 1}, {1.0, 1.0}, 4.0);
    EXPECT_EQ(eval_laminate(r, 1.0, 1.0).a, 2.0);
    EXPECT_EQ(eval_laminate(r, 0.999, 1.0).a, 1.0);
    EXPECT_EQ(eval_laminate(r, 2.0, 1.0).a, 1.0);
}

TEST(Laminate, ScalingIdentity) {
    const LaminateRealization r = sample_laminate(LaminateSpec::fixed(two_phase(), 0.7), 9, 40.0);
    for (double x = 0.013; x < 10.0; x += 0.31) EXPECT_EQ(&eval_laminate(r, x, 0.5), &eval_laminate(r, 2 * x, 1.0));
}

TEST(Laminate, ExponentialWidthsAndStationaryOffset) {
    WidthLaw w1{WidthLaw::Kind::Exponential, 1.0}, w2{WidthLaw::Kind::Exponential, 3.0};
    const LaminateSpec spec{two_phase(), {w1, w2}};
    spec.validate();
    EXPECT_DOUBLE_EQ(spec.mean_width(), 2.0);
    const auto pp = spec.point_probabilities();
    EXPECT_NEAR(pp[0], 0.25, 1e-15);
    EXPECT_NEAR(pp[1], 0.75, 1e-15);
    // the phase seen at the origin follows the point law
    std::size_t first = 0;
    for (std::uint64_t s = 0; s < 4000; ++s) first += sample_laminate(spec, s, 1.0).phase_at(0.0).a == 1.0;
    EXPECT_NEAR(first / 4000.0, 0.25, 3.0 * std::sqrt(0.25 * 0.75 / 4000.0));
}

TEST(Birkhoff, ExactOverOnePeriod) {
    const LaminateRealization r = periodic_laminate(two_phase(), {0, 1}, {1.0, 1.0}, 10.0);
    EXPECT_DOUBLE_EQ(birkhoff_average(r, Quantity::A, 2.0), 1.5);
    EXPECT_DOUBLE_EQ(birkhoff_average(r, Quantity::InvA, 4.0), 0.75);
    EXPECT_DOUBLE_EQ(birkhoff_average(r, Quantity::Kappa, 2.0), 0.0);
    EXPECT_DOUBLE_EQ(birkhoff_average(r, Quantity::A, 0.5), 1.0);
    EXPECT_THROW(birkhoff_average(r, Quantity::A, 1e3), ConfigError);
}

TEST(Checkerboard, OnePhaseIsConstant) {
    const GridField f = sample_checkerboard(PhaseTable::single(phase(3, 0.5)), 1.0, {4, 5, 6}, 1);
    for (const auto& p : f.cells) EXPECT_EQ(p.a, 3.0);
}

TEST(Checkerboard, FractionAndDeterminism) {
    const Dims d{64, 64, 64};
    const GridField f = sample_checkerboard(two_phase(), 1.0, d, 11);
    std::size_t ones = 0;
    for (auto i : f.phase_index) ones += i == 0;
    EXPECT_LE(std::abs(static_cast<double>(ones) / d.size() - 0.5), 3.0 * std::sqrt(0.25 / d.size()));
    const GridField g = sample_checkerboard(two_phase(), 1.0, d, 11);
    EXPECT_EQ(f.phase_index, g.phase_index);
}

TEST(Checkerboard, PeriodicPointLookup) {
    const GridField f = sample_checkerboard(two_phase(), 0.5, {2, 3, 4}, 5);
    const Vec3 o = f.offset;
    for (int d = 0; d < 3; ++d) {
        EXPECT_GE(o[d], 0.0);
        EXPECT_LT(o[d], 0.5);
    }
    EXPECT_EQ(&f.at_point(o + Vec3(0.1, 0.1, 0.1)), &f.at(0));
    EXPECT_EQ(&f.at_point(o + Vec3(1.1, 1.6, 2.1)), &f.at(0));
    EXPECT_EQ(&f.at_point(o + Vec3(-0.4, 0.1, 0.6)), &f.at(f.dims.index(1, 0, 1)));
}

TEST(Grid, LaminateToGridSamplesCellCentres) {
    const LaminateRealization r = periodic_laminate(two_phase(), {0, 1}, {1.0, 1.0}, 8.0);
    const GridField g = laminate_to_grid(r, {2, 1, 8}, 0.5);
    for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(g.at(g.dims.index(1, 0, k)).a, (k / 2) % 2 ? 2.0 : 1.0);
}
