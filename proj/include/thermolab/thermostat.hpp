#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <set>

#include "thermolab/circle_bundle.hpp"
#include "thermolab/surface.hpp"

// Thermostat data generated by a triple (g, A, theta) on SM.

namespace thermolab {

/// The SM function a with pi^*A = (Va/m + i a) omega^m. In the chart,
/// omega(v)^m picks up (e^{-w} e^{i phi})^m, so Va/m + i a = f e^{-m w} e^{i m phi}.
inline FieldSM lift_differential(const GridPtr& grid, const DifferentialM& A) {
    if (!(A.chart() == grid->chart())) throw GridMismatch("lift_differential: chart differs from bundle grid");
    const int m = A.degree();
    const int np = grid->nphi();
    FieldSM a(grid);
    const auto& w = grid->metric().conf().values();
    for (std::size_t b = 0; b < grid->base_size(); ++b) {
        const cplx fb = A.coeff().values()[b] * std::exp(-m * w[b]);
        for (int k = 0; k < np; ++k) a.values()[b * np + k] = (fb * std::polar(1.0, m * grid->phi(k))).imag();
    }
    return a;
}

/// (g, A, theta) together with the derived SM fields.
class ThermostatTriple {
public:
    ThermostatTriple(GridPtr grid, DifferentialM A, OneForm theta)
        : grid_(std::move(grid)), A_(std::move(A)), theta_(std::move(theta)),
          a_(lift_differential(grid_, A_)), va_(op_V(a_)), th_(lift(grid_, theta_)), vth_(op_V(th_)),
          lambda_(a_ - vth_) {}

    /// Geodesic flow of g: A = 0, theta = 0.
    static ThermostatTriple geodesic(const GridPtr& grid, int degree = 3) {
        return ThermostatTriple(grid, DifferentialM::zero(grid->chart(), degree), OneForm::zero(grid->chart()));
    }

    const GridPtr& grid() const { return grid_; }
    const BaseMetric& metric() const { return grid_->metric(); }
    const DifferentialM& differential() const { return A_; }
    const OneForm& theta() const { return theta_; }
    int degree() const { return A_.degree(); }

    const FieldSM& a() const { return a_; }
    const FieldSM& Va() const { return va_; }
    const FieldSM& theta_sm() const { return th_; }
    const FieldSM& Vtheta() const { return vth_; }
    const FieldSM& lambda() const { return lambda_; }

    /// (Va)^2/m^2 + a^2, which equals pi^*|A|^2_g.
    FieldSM norm_sq_from_lift() const {
        const double m = degree();
        return va_ * va_ * (1.0 / (m * m)) + a_ * a_;
    }

    /// F u = X u + lambda V u.
    FieldSM apply(const FieldSM& u) const {
        auto d = frame_derivatives(u);
        return d.X + lambda_ * d.V;
    }

    /// Formal L^2(Theta) adjoint F^* u = -F u - (V lambda) u.
    FieldSM adjoint(const FieldSM& u) const { return -apply(u) - op_V(lambda_) * u; }

    /// Div_Theta F = V lambda.
    FieldSM divergence() const { return divergence_theta(FieldSM(grid_, 1.0), FieldSM(grid_), lambda_); }

private:
    GridPtr grid_;
    DifferentialM A_;
    OneForm theta_;
    FieldSM a_, va_, th_, vth_, lambda_;
};

/// The triple for g' = e^{2c} g with A' = e^{2c} A and the same theta.
inline ThermostatTriple rescale_by_constant(const ThermostatTriple& t, double c, int nphi = -1) {
    auto g2 = BundleGrid::create(BaseMetric(t.metric().conf() + c), nphi > 0 ? nphi : t.grid()->nphi());
    DifferentialM A2(t.degree(), t.differential().coeff() * std::exp(2.0 * c));
    return ThermostatTriple(g2, A2, t.theta());
}

// ---------------------------------------------------------------------------
// Projectivity

/// (1/6)(m^2 - 1)(m^2 - 9): the symbol of (3/2) + (5/3) V^2 + (1/6) V^4 on H_m.
constexpr double projectivity_multiplier(int m) {
    const double m2 = static_cast<double>(m) * m;
    return (m2 - 1.0) * (m2 - 9.0) / 6.0;
}

struct ModeEntry {
    double energy = 0.0;      ///< ||lambda_m||^2
    double multiplier = 0.0;  ///< projectivity_multiplier(m)
};

struct ProjectivityReport {
    double defect = 0.0;           ///< ||L lambda||
    double relative_defect = 0.0;  ///< ||L lambda|| / ||lambda||
    std::map<int, ModeEntry> modes;
    bool projective(double tol = 1e-10) const { return relative_defect < tol; }
};

inline FieldSM projectivity_operator(const FieldSM& lambda) {
    return lambda * 1.5 + op_V(lambda, 2) * (5.0 / 3.0) + op_V(lambda, 4) * (1.0 / 6.0);
}

/// Energy below this fraction of the total is left out of the mode table.
inline constexpr double mode_table_floor = 1e-28;

inline ProjectivityReport projectivity_defect(const FieldSM& lambda) {
    ProjectivityReport rep;
    const double norm = l2_norm(lambda);
    rep.defect = l2_norm(projectivity_operator(lambda));
    rep.relative_defect = norm > 0.0 ? rep.defect / norm : rep.defect;
    const auto& g = *lambda.grid();
    const auto spec = vertical_fft(lambda);
    for (const auto& [m, coeff] : spec.modes) {
        double e = 0.0;
        for (std::size_t b = 0; b < g.base_size(); ++b) e += std::norm(coeff.values()[b]) * g.density()[b];
        e *= g.chart().cell_area() * two_pi;
        if (e > mode_table_floor * norm * norm && e > 0.0) rep.modes[m] = {e, projectivity_multiplier(m)};
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Vanishing-theorem hypotheses

struct VanishingHypothesis {
    RealField curvature;    ///< K_g - delta_g theta + (2 - m)|A|^2_g, must be <= 0
    ComplexField dbar;      ///< twisted dbar residual, must vanish
    double curvature_sup() const {
        double m = -INFINITY;
        for (double v : curvature.values()) m = std::max(m, v);
        return m;
    }
};

inline VanishingHypothesis vanishing_hypothesis(const ThermostatTriple& t) {
    const auto& g = t.metric();
    auto field = gauss_curvature(g) - codifferential(g, t.theta()) +
                 differential_norm_sq(g, t.differential()) * static_cast<double>(2 - t.degree());
    return {std::move(field), dbar_twisted_residual(g, t.differential(), t.theta())};
}

}  // namespace thermolab
