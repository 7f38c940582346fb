#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <utility>

#include "thermolab/field.hpp"

// Metrics, one-forms and degree-m differentials on the periodic model
// surface. Orientation is dx ^ dy > 0 and J rotates counter-clockwise.

namespace thermolab {

/// Conformally flat metric g = exp(2 conf) (dx^2 + dy^2).
class BaseMetric {
public:
    explicit BaseMetric(RealField conf) : conf_(std::move(conf)) {
        for (std::size_t k = 0; k < conf_.values().size(); ++k) {
            if (!std::isfinite(conf_.values()[k])) {
                throw DomainError("BaseMetric: conformal factor not finite at " + describe_point(conf_.chart(), k));
            }
        }
    }

    static BaseMetric flat(const TorusChart& chart) { return BaseMetric(RealField(chart, 0.0)); }

    const TorusChart& chart() const { return conf_.chart(); }
    const RealField& conf() const { return conf_; }

    /// Area density exp(2 conf) relative to dx dy.
    RealField area_density() const {
        return map(conf_, [](double w) { return std::exp(2.0 * w); });
    }

private:
    RealField conf_;
};

/// Arbitrary SPD metric field g11 dx^2 + 2 g12 dx dy + g22 dy^2.
class HatMetric {
public:
    HatMetric(RealField g11, RealField g12, RealField g22)
        : g11_(std::move(g11)), g12_(std::move(g12)), g22_(std::move(g22)) {
        g11_.require_same_grid(g12_);
        g11_.require_same_grid(g22_);
        double worst = INFINITY;
        std::size_t at = 0;
        for (std::size_t k = 0; k < g11_.values().size(); ++k) {
            const double a = g11_.values()[k];
            const double det = a * g22_.values()[k] - g12_.values()[k] * g12_.values()[k];
            const double m = std::min(a, det);
            if (!(m >= worst)) {
                worst = m;
                at = k;
            }
        }
        if (!(worst > 0.0)) {
            throw DomainError("HatMetric: not positive definite (min(g11, det) = " + std::to_string(worst) + ") at " +
                              describe_point(g11_.chart(), at));
        }
    }

    /// c^2 * exp(2 conf) (dx^2 + dy^2), i.e. a metric conformal to the base.
    static HatMetric conformal(const RealField& conf, double scale = 1.0) {
        auto d = map(conf, [scale](double w) { return scale * scale * std::exp(2.0 * w); });
        return HatMetric(d, RealField(conf.chart(), 0.0), d);
    }

    static HatMetric from(const BaseMetric& g) { return conformal(g.conf()); }

    const TorusChart& chart() const { return g11_.chart(); }
    const RealField& g11() const { return g11_; }
    const RealField& g12() const { return g12_; }
    const RealField& g22() const { return g22_; }

private:
    RealField g11_, g12_, g22_;
};

/// theta = cx dx + cy dy.
class OneForm {
public:
    OneForm(RealField cx, RealField cy) : cx_(std::move(cx)), cy_(std::move(cy)) { cx_.require_same_grid(cy_); }

    static OneForm zero(const TorusChart& chart) { return OneForm(RealField(chart, 0.0), RealField(chart, 0.0)); }

    /// The exact form dh.
    static OneForm exact(const RealField& h) { return OneForm(partial(h, 1, 0), partial(h, 0, 1)); }

    const TorusChart& chart() const { return cx_.chart(); }
    const RealField& cx() const { return cx_; }
    const RealField& cy() const { return cy_; }

    OneForm operator+(const OneForm& o) const { return OneForm(cx_ + o.cx_, cy_ + o.cy_); }
    OneForm operator-(const OneForm& o) const { return OneForm(cx_ - o.cx_, cy_ - o.cy_); }
    OneForm operator*(double s) const { return OneForm(cx_ * s, cy_ * s); }

private:
    RealField cx_, cy_;
};

/// A = f(z) dz^m, a section of K^m in the chart coordinate z = x + i y.
///
/// The chart coefficient f also represents Phi = A / d(sigma) on the unit
/// circle bundle, where d(sigma) is the constant 1; the two only differ by the
/// conformal weight exp(-m conf) carried by the frame.
class DifferentialM {
public:
    DifferentialM(int degree, ComplexField coeff) : degree_(degree), coeff_(std::move(coeff)) {
        if (degree_ < 3) throw DomainError("DifferentialM: degree must be >= 3");
        for (std::size_t k = 0; k < coeff_.values().size(); ++k) {
            const auto v = coeff_.values()[k];
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
                throw DomainError("DifferentialM: coefficient not finite at " + describe_point(coeff_.chart(), k));
            }
        }
    }

    static DifferentialM zero(const TorusChart& chart, int degree = 3) {
        return DifferentialM(degree, ComplexField(chart, cplx(0.0)));
    }

    int degree() const { return degree_; }
    const ComplexField& coeff() const { return coeff_; }
    const TorusChart& chart() const { return coeff_.chart(); }

private:
    int degree_;
    ComplexField coeff_;
};

// ---------------------------------------------------------------------------
// Operations

/// K_g = -exp(-2 conf) * Laplacian(conf).
inline RealField gauss_curvature(const BaseMetric& g) {
    auto lap = flat_laplacian(g.conf());
    auto out = lap;
    for (std::size_t k = 0; k < out.values().size(); ++k) {
        out.values()[k] = -std::exp(-2.0 * g.conf().values()[k]) * lap.values()[k];
    }
    return out;
}

/// delta_g theta = -exp(-2 conf) (d_x cx + d_y cy); formal adjoint of d.
inline RealField codifferential(const BaseMetric& g, const OneForm& theta) {
    if (!(g.chart() == theta.chart())) throw GridMismatch("codifferential: charts differ");
    auto div = partial(theta.cx(), 1, 0) + partial(theta.cy(), 0, 1);
    for (std::size_t k = 0; k < div.values().size(); ++k) {
        div.values()[k] *= -std::exp(-2.0 * g.conf().values()[k]);
    }
    return div;
}

/// Hodge star on 1-forms: *dx = dy, *dy = -dx. Conformally invariant.
inline OneForm hodge_star(const BaseMetric&, const OneForm& theta) { return OneForm(-theta.cy(), theta.cx()); }

/// g-inner product of 1-forms integrated against the area form:
/// <a, b>_g = int (a_x b_x + a_y b_y) dx dy (the conformal weights cancel).
inline double l2_inner_oneform(const BaseMetric&, const OneForm& a, const OneForm& b) {
    return integrate_flat(a.cx() * b.cx() + a.cy() * b.cy());
}

/// <f, h>_g = int f h exp(2 conf) dx dy for real functions.
inline double l2_inner_function(const BaseMetric& g, const RealField& f, const RealField& h) {
    return integrate_flat(f * h * g.area_density());
}

struct DivFreeProjection {
    OneForm form;  ///< beta + dh, divergence free
    RealField h;   ///< mean-zero potential
};

/// Adds the exact form dh that removes the divergence of beta.
inline DivFreeProjection hodge_project_divfree(const BaseMetric& g, const OneForm& beta) {
    // delta_g(beta + dh) = 0 reduces to the flat Poisson problem
    // Laplacian(h) = -(d_x beta_x + d_y beta_y) because the conformal weight factors out.
    (void)g;
    auto div = partial(beta.cx(), 1, 0) + partial(beta.cy(), 0, 1);
    auto h = solve_flat_poisson(-div);
    return {beta + OneForm::exact(h), h};
}

/// Residual of dbar A = ((m-1)/2)(theta - i*theta) (x) A in the chart:
/// d_zbar f - ((m-1)/2)(cx + i cy) f, using theta - i*theta = (cx + i cy) dzbar.
inline ComplexField dbar_twisted_residual(const BaseMetric& g, const DifferentialM& A, const OneForm& theta) {
    (void)g;
    const auto& f = A.coeff();
    auto dbar = (partial(f, 1, 0) + partial(f, 0, 1) * cplx(0.0, 1.0)) * 0.5;
    const double k = 0.5 * (A.degree() - 1);
    auto out = dbar;
    for (std::size_t i = 0; i < out.values().size(); ++i) {
        const cplx t(theta.cx().values()[i], theta.cy().values()[i]);
        out.values()[i] -= k * t * f.values()[i];
    }
    return out;
}

/// |A|^2_g = |f|^2 exp(-2 m conf).
inline RealField differential_norm_sq(const BaseMetric& g, const DifferentialM& A) {
    RealField out(g.chart());
    const int m = A.degree();
    for (std::size_t k = 0; k < out.values().size(); ++k) {
        out.values()[k] = std::norm(A.coeff().values()[k]) * std::exp(-2.0 * m * g.conf().values()[k]);
    }
    return out;
}

/// Wang equation residual K_g + 1 - 2|A|^2_g for cubic differentials.
inline RealField wang_residual(const BaseMetric& g, const DifferentialM& A) {
    if (A.degree() != 3) throw DomainError("wang_residual: requires a cubic differential (degree 3)");
    return gauss_curvature(g) + 1.0 - differential_norm_sq(g, A) * 2.0;
}

}  // namespace thermolab
