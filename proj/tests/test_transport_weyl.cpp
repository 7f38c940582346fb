#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "thermolab/transport_weyl.hpp"

using namespace thermolab;
using tl_test::grid_named;

namespace {

HatMetric constant_hat(const TorusChart& c, double a, double b, double d) {
    return HatMetric(RealField(c, a), RealField(c, b), RealField(c, d));
}

ComplexField random_m0(const TorusChart& c, std::uint64_t seed, double amp) {
    BandLimitedSampler s(seed);
    auto re = random_planar_field(c, 3, s), im = random_planar_field(c, 3, s);
    const double scale = amp / std::max(max_abs(re), max_abs(im));
    ComplexField m(c);
    for (std::size_t b = 0; b < c.size(); ++b) m.values()[b] = scale * cplx(re.values()[b], im.values()[b]) / std::sqrt(2.0);
    return m;
}

}  // namespace

TEST(Pqr, BaseMetricAndScaledCopy) {
    auto g = grid_named("cosx", 16, 16);
    auto f = pqr(g, HatMetric::from(g->metric()));
    EXPECT_LT(max_abs(f.p + -1.0) + max_abs(f.q + -1.0) + max_abs(f.r), 1e-13);
    auto f2 = pqr(g, HatMetric::conformal(g->metric().conf(), 1.7));
    EXPECT_LT(max_abs(f2.p + -1.7 * 1.7) + max_abs(f2.q + -1.7 * 1.7) + max_abs(f2.r), 1e-12);
    EXPECT_LT(max_abs(f2.discriminant() / f2.p + -1.7 * 1.7), 1e-12);
}

TEST(Pqr, ConstantDiagonalOnFlatTorus) {
    auto g = grid_named("flat", 8, 16);
    auto f = pqr(g, constant_hat(g->chart(), 2.0, 0.0, 3.0));
    auto p = FieldSM::sample(g, [](double, double, double t) { return 2 * std::pow(std::cos(t), 2) + 3 * std::pow(std::sin(t), 2); });
    auto q = FieldSM::sample(g, [](double, double, double t) { return 2 * std::pow(std::sin(t), 2) + 3 * std::pow(std::cos(t), 2); });
    auto r = FieldSM::sample(g, [](double, double, double t) { return std::sin(t) * std::cos(t); });
    EXPECT_LT(max_abs(f.p - p) + max_abs(f.q - q) + max_abs(f.r - r), 1e-14);
}

TEST(Pqr, LieDerivativeRelationsAndModeZeroInvariants) {
    auto g = grid_named("cosx_siny", 16, 16);
    BandLimitedSampler s(3);
    const auto& c = g->chart();
    HatMetric gh(random_planar_field(c, 3, s) * 0.1 + 2.0, random_planar_field(c, 3, s) * 0.1,
                 random_planar_field(c, 3, s) * 0.1 + 1.5);
    auto f = pqr(g, gh);
    EXPECT_LT(max_abs(op_V(f.p) - f.r * 2.0), 1e-10);
    EXPECT_LT(max_abs(op_V(f.r) - (f.q - f.p)), 1e-10);
    EXPECT_LT(max_abs(op_V(f.q) + f.r * 2.0), 1e-10);
    EXPECT_LT(std::sqrt(mode_energy(f.p + f.q, {0}, true)), 1e-10);
    EXPECT_LT(std::sqrt(mode_energy(f.discriminant(), {0}, true)), 1e-10);
}

TEST(Beltrami, ConformalAndPointExample) {
    auto g = grid_named("flat", 8, 16);
    EXPECT_LT(max_abs(beltrami_mu(pqr(g, HatMetric::conformal(g->metric().conf(), 2.0)))), 1e-15);
    auto mu = beltrami_mu(pqr(g, constant_hat(g->chart(), 2.0, 0.0, 1.0)));
    EXPECT_NEAR(mu(0, 0, 0).real(), 3.0 - 2.0 * std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(mu(0, 0, 0).imag(), 0.0, 1e-15);
}

TEST(Beltrami, DegreeDiscAndReconstruction) {
    auto g = grid_named("cosx", 16, 16);
    BandLimitedSampler s(5);
    const auto& c = g->chart();
    HatMetric gh(random_planar_field(c, 3, s) * 0.05 + 2.0, random_planar_field(c, 3, s) * 0.05,
                 random_planar_field(c, 3, s) * 0.05 + 1.0);
    auto f = pqr(g, gh);
    auto mu = beltrami_mu(f);
    EXPECT_LT(max_abs(mu), 1.0);
    EXPECT_LT(degree_minus_two_defect(mu), 1e-10);
    // (p - q) + 2 i r = 2 mu (p + q) / (1 + |mu|^2)
    auto s2 = f.p + f.q;
    auto rec = mu * s2 * 2.0 / map(mu, [](cplx v) { return cplx(1.0 + std::norm(v)); });
    EXPECT_LT(max_abs(rec.real() - (f.p - f.q)), 1e-10);
    EXPECT_LT(max_abs(rec.imag() - f.r * 2.0), 1e-10);
}

TEST(Beltrami, SingularInputsAreRejectedWithLocation) {
    auto g = grid_named("flat", 8, 16);
    auto g11 = RealField(g->chart(), 1.0);
    HatMetric gh(g11, RealField(g->chart(), 0.999999999999), RealField(g->chart(), 1.0));
    try {
        beltrami_mu(pqr(g, gh));
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("iphi="), std::string::npos) << e.what();
    }
    EXPECT_THROW(hat_metric_from_beltrami(g->metric(), ComplexField(g->chart(), cplx(1.0, 0.0))), DomainError);
}

TEST(TransportU, Examples) {
    auto g = grid_named("cosx", 16, 16);
    EXPECT_LT(max_abs(transport_u(pqr(g, HatMetric::from(g->metric())))), 1e-13);
    auto u = transport_u(pqr(g, HatMetric::conformal(g->metric().conf(), 1.7)));
    EXPECT_LT(max_abs(u + std::log(1.7)), 1e-13);
}

TEST(TransportU, ScaledBeltramiNormalisationGivesProductFormula) {
    auto g = grid_named("cosx_siny", 16, 16);
    auto m0 = random_m0(g->chart(), 6, 0.5);
    auto gh = hat_metric_from_beltrami(g->metric(), m0);
    auto f = pqr(g, gh);
    auto mu = beltrami_from_base(g, m0);
    EXPECT_LT(max_abs(beltrami_mu(f) - mu), 1e-12);
    auto h = map(transport_u(f), [](cplx u) { return std::exp(2.0 * u / 3.0); });
    EXPECT_LT(max_abs(h - (mu + 1.0) * (mu.conj() + 1.0)), 1e-12);
}

TEST(IntegralResidual, FlatConstantPairAndDetection) {
    auto g = grid_named("flat", 16, 32);
    auto t = ThermostatTriple::geodesic(g);
    auto gh = constant_hat(g->chart(), 2.0, 0.4, 1.0);
    EXPECT_LT(integral_residual(t, gh), 1e-10);
    EXPECT_EQ(integral_residual(t, HatMetric::from(g->metric())), 0.0);
    auto bad = HatMetric::conformal(RealField::sample(g->chart(), [](double x, double) { return std::cos(x); }));
    const double floor = integral_residual(t, bad);
    EXPECT_GT(floor, 1e-3);
    // ghat -> c^2 ghat only rescales h
    auto scaled = HatMetric(gh.g11() * 4.0, gh.g12() * 4.0, gh.g22() * 4.0);
    EXPECT_NEAR(integral_residual(t, scaled), integral_residual(t, gh), 1e-12);
}

TEST(ThermostatMatch, IdentityPairAndGeodesicPair) {
    auto g = grid_named("cosx", 16, 16);
    BandLimitedSampler s(4);
    const auto& c = g->chart();
    ThermostatTriple t(g, DifferentialM(3, to_complex(random_planar_field(c, 3, s))),
                       OneForm(random_planar_field(c, 3, s), random_planar_field(c, 3, s)));
    auto f = pqr(g, HatMetric::from(g->metric()));
    EXPECT_LT(max_abs(thermostat_match_residual(t, t.lambda(), f)), 1e-12);

    auto gf = grid_named("flat", 16, 32);
    auto geo = ThermostatTriple::geodesic(gf);
    auto fc = pqr(gf, constant_hat(gf->chart(), 2.0, 0.4, 1.0));
    EXPECT_LT(max_abs(thermostat_match_residual(geo, FieldSM(gf), fc)), 1e-8);
}

TEST(ThermostatMatch, WeylConformalFamilyAgreesWithTransportForm) {
    // ghat = e^{2s} g, A = 0: alpha = theta + ds and u = -s.
    auto g = grid_named("cosx", 32, 32);
    BandLimitedSampler smp(14);
    const auto& c = g->chart();
    auto s = random_planar_field(c, 4, smp) * 0.3;
    OneForm theta(random_planar_field(c, 4, smp), random_planar_field(c, 4, smp));
    ThermostatTriple t(g, DifferentialM::zero(c), theta);
    auto gh = HatMetric::conformal(g->metric().conf() + s);
    auto alpha = theta + OneForm::exact(s);
    auto f = pqr(g, gh);
    auto match = thermostat_match_residual(t, weyl_lambda_pullback(f, lift(g, alpha)), f);
    auto weyl = weyl_transport_residual(t, gh, alpha);
    EXPECT_LT(l2_norm(match), 1e-8);
    EXPECT_LT(l2_norm(weyl), 1e-8);
    EXPECT_LT(max_abs(match - weyl), 1e-10);
}

TEST(WeylTransport, Examples) {
    auto g = grid_named("flat", 32, 32);
    const auto& c = g->chart();
    auto geo = ThermostatTriple::geodesic(g);
    EXPECT_EQ(max_abs(weyl_transport_residual(geo, HatMetric::from(g->metric()), OneForm::zero(c))), 0.0);

    auto h = RealField::sample(c, [](double x, double y) { return std::sin(x) * std::cos(2 * y); });
    ThermostatTriple t(g, DifferentialM::zero(c), OneForm::exact(h));
    EXPECT_LT(max_abs(weyl_transport_residual(t, lift(g, h), lift(g, OneForm::exact(h)))), 1e-10);
    // the same pair realised by ghat = e^{-2h} g
    EXPECT_LT(max_abs(weyl_transport_residual(t, HatMetric::conformal(h * -1.0), OneForm::zero(c))), 1e-10);

    auto fc = constant_hat(c, 2.0, 0.4, 1.0);
    EXPECT_LT(max_abs(weyl_transport_residual(geo, fc, OneForm::zero(c))), 1e-8);
}

TEST(BeltramiPde, ConstantMuOnFlatTorus) {
    auto g = grid_named("flat", 16, 16);
    auto t = ThermostatTriple::geodesic(g);
    auto mu = beltrami_from_base(g, ComplexField(g->chart(), cplx(0.3, -0.2)));
    EXPECT_LT(max_abs(beltrami_pde_residual(t, mu)), 1e-14);
}

TEST(BeltramiPde, ZeroMuLeavesConjugateA3) {
    auto g = grid_named("flat", 16, 16);
    auto t = ThermostatTriple(g, DifferentialM(3, ComplexField(g->chart(), cplx(0.5, 0.5))), OneForm::zero(g->chart()));
    auto r = beltrami_pde_residual(t, FieldSM(g));
    EXPECT_LT(max_abs(r + cubic_a3(t).conj()), 1e-14);
    EXPECT_GT(max_abs(r), 0.5);
    EXPECT_EQ(max_abs(beltrami_pde_residual(ThermostatTriple::geodesic(g), FieldSM(g))), 0.0);
}

TEST(BeltramiPde, ConformalGaugeConstantMu) {
    // g = e^{2w} flat, theta = dw, A = 0: mu = mu0 e^{-2 i phi} solves the system.
    auto g = grid_named("cosx_siny", 32, 32);
    ThermostatTriple t(g, DifferentialM::zero(g->chart()), OneForm::exact(g->metric().conf()));
    auto mu = beltrami_from_base(g, ComplexField(g->chart(), cplx(0.3, 0.25)));
    EXPECT_LT(max_abs(beltrami_pde_residual(t, mu)), 1e-12);
}

TEST(BeltramiPde, DbarGroupingRecomputedFromFrame) {
    auto g = grid_named("cosx", 16, 16);
    BandLimitedSampler s(15);
    const auto& c = g->chart();
    ThermostatTriple t(g, DifferentialM::zero(c), OneForm(random_planar_field(c, 3, s), random_planar_field(c, 3, s)));
    auto mu = beltrami_from_base(g, random_m0(c, 16, 0.4));
    auto d = frame_derivatives(mu);
    const cplx I(0.0, 1.0);
    auto th = t.theta_sm(), vth = t.Vtheta();
    auto th1 = (th - vth * I) * 0.5;
    auto expect = (d.X + d.H * I) * 0.5 - mu * (d.X - d.H * I) * 0.5 + mu * mu * th1 * 2.0 + mu * th1.conj() * 2.0;
    EXPECT_LT(max_abs(beltrami_pde_residual(t, mu) - expect), 1e-12);
}

TEST(BeltramiPde, Preconditions) {
    auto g = grid_named("flat", 16, 16);
    auto t4 = ThermostatTriple::geodesic(g, 4);
    EXPECT_THROW(beltrami_pde_residual(t4, FieldSM(g)), DomainError);
    auto notdeg = FieldSM::sample(g, [](double, double, double p) { return std::exp(cplx(0, 2 * p)); }) * 0.3;
    EXPECT_THROW(beltrami_pde_residual(ThermostatTriple::geodesic(g), notdeg), DomainError);
}

TEST(BeltramiChain, TrivialAndConstantMu) {
    auto g = grid_named("flat", 16, 16);
    auto t = ThermostatTriple::geodesic(g);
    auto r0 = beltrami_chain_check(t, FieldSM(g));
    EXPECT_EQ(r0.leakage, 0.0);
    auto m0 = ComplexField(g->chart(), cplx(0.3, -0.2));
    auto mu = beltrami_from_base(g, m0);
    auto r = beltrami_chain_check(t, mu, hat_metric_from_beltrami(g->metric(), m0));
    EXPECT_LT(max_abs(t.apply(r.u)), 1e-13);
    EXPECT_LT(r.leakage, 1e-10);
    EXPECT_LT(r.h_identity, 1e-12);
}

TEST(BeltramiChain, ConformalGaugeSolutionLandsInModeOne) {
    auto g = grid_named("cosx_siny", 32, 32);
    ThermostatTriple t(g, DifferentialM::zero(g->chart()), OneForm::exact(g->metric().conf()));
    auto m0 = ComplexField(g->chart(), cplx(0.3, 0.25));
    auto r = beltrami_chain_check(t, beltrami_from_base(g, m0), hat_metric_from_beltrami(g->metric(), m0));
    EXPECT_LT(r.relative_leakage, 1e-10);
    EXPECT_LT(r.formula_gap, 1e-10);
    EXPECT_LT(r.h_identity, 1e-12);
}

TEST(BeltramiChain, LeakageIsLinearInThePerturbation) {
    auto g = grid_named("flat", 16, 16);
    auto t = ThermostatTriple::geodesic(g);
    auto bump = RealField::sample(g->chart(), [](double x, double y) { return std::cos(x) + 0.5 * std::sin(2 * y); });
    std::vector<double> eps{1e-2, 1e-3, 1e-4}, leak;
    for (double e : eps) {
        auto m0 = map(to_complex(bump), [e](cplx b) { return cplx(0.3, 0.1) * (1.0 + e * b); });
        auto mu = beltrami_from_base(g, m0);
        EXPECT_LT(max_abs(beltrami_pde_residual(t, mu)), 10 * e);
        leak.push_back(beltrami_chain_check(t, mu).leakage);
    }
    const double slope = std::log(leak[0] / leak[2]) / std::log(eps[0] / eps[2]);
    EXPECT_NEAR(slope, 1.0, 0.05);
}

TEST(LeastSquares, ConsistentSystemIsSolved) {
    auto g = grid_named("flat", 16, 16);
    auto t = ThermostatTriple::geodesic(g);
    auto u0 = FieldSM::sample(g, [](double x, double y, double p) {
        return std::sin(x) * std::cos(p) + 0.3 * std::cos(x + y) + 0.2 * std::sin(2 * p) * std::cos(y);
    });
    auto res = least_squares_transport(t, t.apply(u0));
    EXPECT_TRUE(res.converged);
    EXPECT_LT(res.residual, 1e-8);
    EXPECT_EQ(static_cast<int>(res.history.size()), res.iterations);
}

TEST(LeastSquares, HarmonicOneFormIsNotInTheRange) {
    std::vector<double> floors;
    for (int n : {16, 32}) {
        auto g = grid_named("flat", n, n);
        auto t = ThermostatTriple::geodesic(g);
        OneForm dx(RealField(g->chart(), 1.0), RealField(g->chart(), 0.0));
        auto res = least_squares_transport(t, lift(g, dx), {.max_iterations = 200});
        floors.push_back(res.residual);
    }
    EXPECT_GT(floors[0], 0.5);
    EXPECT_GE(floors[1], floors[0] * (1 - 1e-8));
}

TEST(LeastSquares, RejectsComplexRhs) {
    auto g = grid_named("flat", 8, 16);
    EXPECT_THROW(least_squares_transport(ThermostatTriple::geodesic(g), FieldSM(g, cplx(0.0, 1.0))), DomainError);
}
