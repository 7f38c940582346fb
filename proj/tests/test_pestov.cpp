#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "thermolab/pestov.hpp"

using namespace thermolab;
using tl_test::grid_named;

namespace {

ThermostatTriple titeica(const GridPtr& g) {
    return ThermostatTriple(g, DifferentialM(3, ComplexField(g->chart(), cplx(0.5, 0.5))), OneForm::zero(g->chart()));
}

// f = e^{(m-1)s}, theta = ds solves the twisted dbar equation.
ThermostatTriple twisted_pair(const GridPtr& g, int m, const RealField& s) {
    auto f = map(to_complex(s), [m](cplx v) { return std::exp(double(m - 1) * v); });
    return ThermostatTriple(g, DifferentialM(m, f), OneForm::exact(s));
}

}  // namespace

TEST(PestovIdentity, ConstantUGivesZero) {
    auto g = grid_named("cosx", 16, 16);
    auto t = titeica(g);
    BandLimitedSampler s(1);
    auto rep = pestov_identity_gap(t, FieldSM(g, 2.0), random_field(g, 2, s));
    EXPECT_LT(std::abs(rep.lhs) + std::abs(rep.rhs), 1e-20);
}

TEST(PestovIdentity, GeodesicFlatRandomU) {
    auto g = grid_named("flat");
    auto t = ThermostatTriple::geodesic(g);
    BandLimitedSampler s(2);
    for (int n = 0; n < 3; ++n) {
        auto rep = pestov_identity_gap(t, random_field(g, 4, s), FieldSM(g));
        EXPECT_LT(rep.gap, 1e-8);
        EXPECT_NEAR(rep.curvature, 0.0, 1e-8 * rep.fu_sq);
    }
}

TEST(PestovIdentity, CurvedThermostatRandomLambdaAndC) {
    auto g = grid_named("cosx");
    BandLimitedSampler s(3);
    const auto& c = g->chart();
    for (int n = 0; n < 5; ++n) {
        ThermostatTriple t(g, DifferentialM(3, to_complex(random_planar_field(c, 4, s))),
                           OneForm(random_planar_field(c, 4, s), random_planar_field(c, 4, s)));
        auto rep = pestov_identity_gap(t, random_field(g, 4, s), random_field(g, 4, s));
        EXPECT_LT(rep.gap, 1e-6);
    }
}

TEST(CurvatureSimplification, GeodesicGivesGaussCurvature) {
    auto g = grid_named("cosx_siny");
    auto r = curvature_term_simplification(ThermostatTriple::geodesic(g));
    EXPECT_LT(r.gap, 1e-12);
    EXPECT_LT(max_abs(r.rhs - lift(g, gauss_curvature(g->metric()))), 1e-15);
}

TEST(CurvatureSimplification, TiteicaIsMinusOne) {
    auto g = grid_named("flat");
    auto r = curvature_term_simplification(titeica(g));
    EXPECT_LT(max_abs(r.rhs + 1.0), 1e-14);
    EXPECT_LT(r.gap, 1e-8);
}

TEST(CurvatureSimplification, ExactThetaOnFlatTorus) {
    auto g = grid_named("flat");
    auto h = RealField::sample(g->chart(), [](double x, double y) { return std::sin(x) * std::cos(y) + 0.3 * std::cos(2 * x); });
    ThermostatTriple t(g, DifferentialM::zero(g->chart()), OneForm::exact(h));
    auto r = curvature_term_simplification(t);
    EXPECT_LT(max_abs(r.rhs - lift(g, flat_laplacian(h))), 1e-12);
    EXPECT_LT(r.gap, 1e-8);
}

TEST(CurvatureSimplification, TwistedPairsOnCurvedMetric) {
    auto g = grid_named("cosx", 48, 48);
    auto s = RealField::sample(g->chart(), [](double x, double y) { return 0.2 * std::cos(y) + 0.1 * std::sin(x); });
    for (int m : {3, 4, 5}) EXPECT_LT(curvature_term_simplification(twisted_pair(g, m, s)).gap, 1e-8) << m;
}

TEST(CurvatureSimplification, FailsOffTheTwistedLocus) {
    auto g = grid_named("flat");
    auto f = ComplexField::sample(g->chart(), [](double x, double) { return std::exp(cplx(0, x)); });
    ThermostatTriple t(g, DifferentialM(3, f), OneForm::zero(g->chart()));
    EXPECT_GT(curvature_term_simplification(t).gap, 1e-2);
}

TEST(CurvatureSimplification, HalvingTheBandReachesRoundoff) {
    auto g = grid_named("cosx");
    BandLimitedSampler s(4);
    for (int band : {8, 4}) {
        auto h = random_planar_field(g->chart(), band, s);
        ThermostatTriple t(g, DifferentialM::zero(g->chart()), OneForm::exact(h));
        const double gap = curvature_term_simplification(t).gap;
        if (band == 4) {
            EXPECT_LT(gap, 1e-10);
        }
    }
}

TEST(TwistedDbar, HolomorphicConstant) {
    auto g = grid_named("flat");
    auto r = twisted_dbar_check(titeica(g));
    EXPECT_LT(r.sm_residual, 1e-10);
    EXPECT_LT(r.chart_residual, 1e-14);
}

TEST(TwistedDbar, NonHolomorphicBothPositive) {
    auto g = grid_named("flat");
    auto f = ComplexField::sample(g->chart(), [](double x, double) { return std::exp(cplx(0, x)); });
    auto r = twisted_dbar_check(ThermostatTriple(g, DifferentialM(3, f), OneForm::zero(g->chart())));
    EXPECT_GT(r.sm_residual, 0.1);
    EXPECT_GT(r.chart_residual, 0.1);
}

TEST(TwistedDbar, TwistedPairs) {
    auto g = grid_named("cosx", 48, 48);
    auto s = RealField::sample(g->chart(), [](double, double y) { return 0.3 * std::cos(y); });
    for (int m : {3, 4, 5}) {
        auto r = twisted_dbar_check(twisted_pair(g, m, s));
        EXPECT_LT(r.sm_residual, 1e-8) << m;
        EXPECT_LT(r.chart_residual, 1e-8) << m;
    }
}

TEST(TwistedDbar, BundleFieldIsTheLiftedChartResidual) {
    // X V a - m H a - (m-1)(theta V a - m a V theta) = 2m e^{-(m+1)w} Re(e^{i(m-1)phi} R)
    auto g = grid_named("cosx_siny");
    BandLimitedSampler smp(5);
    const auto& c = g->chart();
    for (int m : {3, 4}) {
        auto re = random_planar_field(c, 4, smp), im = random_planar_field(c, 4, smp);
        ComplexField f(c);
        for (std::size_t b = 0; b < c.size(); ++b) f.values()[b] = cplx(re.values()[b], im.values()[b]);
        ThermostatTriple t(g, DifferentialM(m, f), OneForm(random_planar_field(c, 4, smp), random_planar_field(c, 4, smp)));
        auto r = twisted_dbar_check(t);
        FieldSM expect(g);
        const int np = g->nphi();
        for (std::size_t b = 0; b < c.size(); ++b) {
            const double w = g->metric().conf().values()[b];
            for (int k = 0; k < np; ++k) {
                const cplx e = std::polar(1.0, (m - 1) * g->phi(k));
                expect.values()[b * np + k] = 2.0 * m * std::exp(-(m + 1) * w) * (e * r.chart_field.values()[b]).real();
            }
        }
        EXPECT_LT(l2_norm(r.sm_field - expect), 1e-10 * l2_norm(expect)) << m;
    }
}

TEST(TwistedDbar, PerturbationSweepSlopesAgree) {
    auto g = grid_named("flat");
    auto s = RealField::sample(g->chart(), [](double x, double y) { return 0.3 * std::cos(y) + 0.2 * std::sin(x); });
    auto sweep = twisted_dbar_sweep(g, 3, s, {-1e-1, -1e-2, -1e-3, 0.0, 1e-3, 1e-2, 1e-1});
    EXPECT_LT(sweep.points[3].sm_residual, 1e-10);
    EXPECT_LT(sweep.points[3].chart_residual, 1e-10);
    EXPECT_LT(std::abs(sweep.sm_slope - sweep.chart_slope), 0.05 * std::abs(sweep.chart_slope));
}

TEST(VanishingChain, TrivialTriple) {
    auto g = grid_named("flat", 16, 16);
    auto rep = vanishing_chain_check(ThermostatTriple::geodesic(g), FieldSM(g), OneForm::zero(g->chart()));
    for (const auto& id : rep.identities) {
        EXPECT_EQ(id.lhs, 0.0) << id.name;
        EXPECT_EQ(id.rhs, 0.0) << id.name;
    }
}

TEST(VanishingChain, ExactFormScenario) {
    auto g = grid_named("cosx");
    auto h = RealField::sample(g->chart(), [](double x, double y) { return std::sin(x + y) + 0.2 * std::cos(2 * y); });
    ThermostatTriple t(g, DifferentialM::zero(g->chart()), OneForm::exact(h));
    auto rep = vanishing_chain_check(t, lift(g, h), OneForm::exact(h));
    EXPECT_LT(rep.tau, 1e-10);
    EXPECT_LT(rep.max_exact_gap(), 1e-8);
    EXPECT_LT(rep.max_transport_gap(), 1e-8);
}

TEST(VanishingChain, ExactIdentitiesHoldForAnyU) {
    auto g = grid_named("cosx", 48, 32);
    auto s = RealField::sample(g->chart(), [](double, double y) { return 0.2 * std::cos(y); });
    BandLimitedSampler smp(6);
    for (int m : {3, 4}) {
        auto t = twisted_pair(g, m, s);
        OneForm beta(random_planar_field(g->chart(), 4, smp), random_planar_field(g->chart(), 4, smp));
        auto rep = vanishing_chain_check(t, random_field(g, 4, smp), beta);
        for (const auto& id : rep.identities) {
            if (id.exact) {
                EXPECT_LT(id.gap, 1e-8) << id.name << " m=" << m;
            }
        }
    }
}

TEST(VanishingChain, BetaIsometryForRandomOneForms) {
    auto g = grid_named("cosx_siny");
    BandLimitedSampler smp(7);
    for (int n = 0; n < 5; ++n) {
        OneForm beta(random_planar_field(g->chart(), 8, smp), random_planar_field(g->chart(), 8, smp));
        auto b = lift(g, beta);
        EXPECT_LT(relative_gap(real_inner(b, b), real_inner(op_V(b), op_V(b))), 1e-10);
    }
}
