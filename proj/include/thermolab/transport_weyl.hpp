#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "thermolab/circle_bundle.hpp"
#include "thermolab/surface.hpp"
#include "thermolab/thermostat.hpp"

// A second metric g_hat seen from SM through p, q, r, its Beltrami
// coefficient, and the transport equation F u = V a + beta that relates the
// two projective structures.

namespace thermolab {

inline constexpr double spd_epsilon = 1e-12;
inline constexpr double beltrami_margin = 1e-9;

inline std::string describe_point(const BundleGrid& g, std::size_t flat) {
    const std::size_t np = static_cast<std::size_t>(g.nphi());
    const auto b = flat / np;
    const int k = static_cast<int>(flat % np);
    std::ostringstream os;
    const std::string base = describe_point(g.chart(), b);
    os << base.substr(0, base.size() - 1) << ", iphi=" << k << ", phi=" << g.phi(k) << ")";
    return os.str();
}

/// p = g_hat(v, v), r = g_hat(v, Jv), q = g_hat(Jv, Jv) on the unit vectors of g.
struct PQRFields {
    FieldSM p, q, r;

    /// pq - r^2 = exp(-4w) det(g_hat), independent of phi.
    FieldSM discriminant() const { return p * q - r * r; }
};

inline PQRFields pqr(const GridPtr& grid, const HatMetric& gh) {
    if (!(gh.chart() == grid->chart())) throw GridMismatch("pqr: chart differs from bundle grid");
    FieldSM p(grid), q(grid), r(grid);
    const int np = grid->nphi();
    for (std::size_t b = 0; b < grid->base_size(); ++b) {
        const double e = grid->inv_scale()[b] * grid->inv_scale()[b];
        const double a = gh.g11().values()[b], h = gh.g12().values()[b], d = gh.g22().values()[b];
        for (int k = 0; k < np; ++k) {
            const double c = grid->cos_phi()[k], s = grid->sin_phi()[k];
            const std::size_t at = b * np + k;
            p.values()[at] = e * (a * c * c + 2.0 * h * c * s + d * s * s);
            q.values()[at] = e * (a * s * s - 2.0 * h * c * s + d * c * c);
            r.values()[at] = e * ((d - a) * c * s + h * (c * c - s * s));
        }
    }
    return {std::move(p), std::move(q), std::move(r)};
}

namespace detail {

inline void require_nondegenerate(const PQRFields& f, const char* where) {
    const auto& g = *f.p.grid();
    double worst = INFINITY;
    std::size_t at = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double p = f.p.values()[k].real();
        const double disc = p * f.q.values()[k].real() - std::norm(f.r.values()[k]);
        const double m = std::min(p, disc);
        if (!(m >= worst)) {
            worst = m;
            at = k;
        }
    }
    if (!(worst >= spd_epsilon)) {
        throw DomainError(std::string(where) + ": pq - r^2 (or p) below " + std::to_string(spd_epsilon) + " (" +
                          std::to_string(worst) + ") at " + describe_point(g, at));
    }
}

inline void require_inside_disc(const FieldSM& mu, const char* where) {
    double worst = 0.0;
    std::size_t at = 0;
    for (std::size_t k = 0; k < mu.values().size(); ++k) {
        const double a = std::abs(mu.values()[k]);
        if (!(a <= worst)) {
            worst = a;
            at = k;
        }
    }
    if (!(worst < 1.0 - beltrami_margin)) {
        throw DomainError(std::string(where) + ": |mu| = " + std::to_string(worst) + " too close to 1 at " +
                          describe_point(*mu.grid(), at));
    }
}

}  // namespace detail

/// mu = ((p - q) + 2 i r) / (p + q + 2 sqrt(pq - r^2)), of vertical degree -2.
inline FieldSM beltrami_mu(const PQRFields& f) {
    detail::require_nondegenerate(f, "beltrami_mu");
    FieldSM mu(f.p.grid());
    for (std::size_t k = 0; k < mu.values().size(); ++k) {
        const double p = f.p.values()[k].real(), q = f.q.values()[k].real(), r = f.r.values()[k].real();
        mu.values()[k] = cplx(p - q, 2.0 * r) / (p + q + 2.0 * std::sqrt(p * q - r * r));
    }
    return mu;
}

/// u = (3/2) log(p / (pq - r^2)^{2/3}).
inline FieldSM transport_u(const PQRFields& f) {
    detail::require_nondegenerate(f, "transport_u");
    FieldSM u(f.p.grid());
    for (std::size_t k = 0; k < u.values().size(); ++k) {
        const double p = f.p.values()[k].real();
        const double disc = p * f.q.values()[k].real() - std::norm(f.r.values()[k]);
        u.values()[k] = 1.5 * std::log(p) - std::log(disc);
    }
    return u;
}

/// h = p / (pq - r^2)^{2/3} = e^{2u/3}.
inline FieldSM projective_integral(const PQRFields& f) {
    return map(transport_u(f), [](cplx u) { return std::exp(u.real() * (2.0 / 3.0)); });
}

/// The metric in [g_hat] fixed by the normalisation (p + q)/2 = (1 + |mu|^2)/(1 - |mu|^2)^4,
/// given the base representative m0 of mu = m0 e^{-2 i phi}. With it,
/// p / (pq - r^2)^{2/3} = (1 + mu)(1 + conj(mu)).
inline HatMetric hat_metric_from_beltrami(const BaseMetric& g, const ComplexField& m0) {
    if (!(g.chart() == m0.chart())) throw GridMismatch("hat_metric_from_beltrami: charts differ");
    RealField g11(g.chart()), g12(g.chart()), g22(g.chart());
    for (std::size_t b = 0; b < g.chart().size(); ++b) {
        const cplx m = m0.values()[b];
        const double n2 = std::norm(m);
        if (!(n2 < (1.0 - beltrami_margin) * (1.0 - beltrami_margin))) {
            throw DomainError("hat_metric_from_beltrami: |mu| too close to 1 at " + describe_point(g.chart(), b));
        }
        const double e = std::exp(2.0 * g.conf().values()[b]) / std::pow(1.0 - n2, 4);
        const double trace = 2.0 * e * (1.0 + n2);
        const double diff = 4.0 * e * m.real();
        g11.values()[b] = 0.5 * (trace + diff);
        g22.values()[b] = 0.5 * (trace - diff);
        g12.values()[b] = 2.0 * e * m.imag();
    }
    return HatMetric(g11, g12, g22);
}

/// mu_0 e^{-2 i phi} on SM.
inline FieldSM beltrami_from_base(const GridPtr& grid, const ComplexField& m0) {
    auto mu = lift(grid, m0);
    const int np = grid->nphi();
    for (std::size_t b = 0; b < grid->base_size(); ++b)
        for (int k = 0; k < np; ++k) mu.values()[b * np + k] *= std::polar(1.0, -2.0 * grid->phi(k));
    return mu;
}

// ---------------------------------------------------------------------------
// Residuals of the projective correspondence

/// ||F h|| / ||h|| for h = p/(pq - r^2)^{2/3}; F = X when lambda = 0.
inline double integral_residual(const ThermostatTriple& t, const HatMetric& gh) {
    const auto h = projective_integral(pqr(t.grid(), gh));
    return l2_norm(t.apply(h)) / l2_norm(h);
}

/// lambda_hat o ell for the Weyl thermostat of (g_hat, alpha): -V_hat alpha_hat pulled
/// back with ell^* V_hat = (p / sqrt(pq - r^2)) V and alpha_hat o ell = alpha / sqrt(p).
inline FieldSM weyl_lambda_pullback(const PQRFields& f, const FieldSM& alpha) {
    detail::require_nondegenerate(f, "weyl_lambda_pullback");
    const auto sp = map(f.p, [](cplx v) { return cplx(std::sqrt(v.real())); });
    const auto factor = f.p / map(f.discriminant(), [](cplx v) { return cplx(std::sqrt(v.real())); });
    return -(factor * op_V(alpha / sp));
}

/// sqrt(p) (p / sqrt(pq - r^2)) V(lambda_hat o ell) - F log((pq - r^2)/p^{3/2}) - V lambda.
inline FieldSM thermostat_match_residual(const ThermostatTriple& t, const FieldSM& lambda_hat_pullback,
                                         const PQRFields& f) {
    detail::require_nondegenerate(f, "thermostat_match_residual");
    FieldSM coef(t.grid()), logterm(t.grid());
    for (std::size_t k = 0; k < coef.values().size(); ++k) {
        const double p = f.p.values()[k].real();
        const double disc = p * f.q.values()[k].real() - std::norm(f.r.values()[k]);
        coef.values()[k] = std::sqrt(p) * p / std::sqrt(disc);
        logterm.values()[k] = std::log(disc) - 1.5 * std::log(p);
    }
    return coef * op_V(lambda_hat_pullback) - t.apply(logterm) - op_V(t.lambda());
}

/// F u - V a - beta.
inline FieldSM weyl_transport_residual(const ThermostatTriple& t, const FieldSM& u, const FieldSM& beta) {
    return t.apply(u) - t.Va() - beta;
}

/// F u - V a - beta with u from g_hat and beta = theta - alpha.
inline FieldSM weyl_transport_residual(const ThermostatTriple& t, const HatMetric& gh, const OneForm& alpha) {
    const auto u = transport_u(pqr(t.grid(), gh));
    return weyl_transport_residual(t, u, lift(t.grid(), t.theta() - alpha));
}

// ---------------------------------------------------------------------------
// Beltrami PDE on SM

/// theta_1 = (theta - i V theta)/2, the H_1 part of the lifted one-form.
inline FieldSM theta_one(const ThermostatTriple& t) { return (t.theta_sm() - t.Vtheta() * cplx(0.0, 1.0)) * 0.5; }

/// a_3 = Va/3 + i a.
inline FieldSM cubic_a3(const ThermostatTriple& t) { return t.Va() * (1.0 / 3.0) + t.a() * cplx(0.0, 1.0); }

/// Vertical degree check: ||V mu + 2 i mu|| / ||mu||.
inline double degree_minus_two_defect(const FieldSM& mu) {
    const double n = l2_norm(mu);
    return n > 0.0 ? l2_norm(op_V(mu) + mu * cplx(0.0, 2.0)) / n : 0.0;
}

/// eta_- mu - mu eta_+ mu - (a3 mu^3 - 2 mu^2 theta_1 - 2 mu conj(theta_1) + conj(a3)).
inline FieldSM beltrami_pde_residual(const ThermostatTriple& t, const FieldSM& mu) {
    if (t.degree() != 3) throw DomainError("beltrami_pde_residual: requires a cubic differential (degree 3)");
    if (!t.grid()->same_as(*mu.grid())) throw GridMismatch("beltrami_pde_residual: grids differ");
    if (degree_minus_two_defect(mu) > 1e-8) {
        throw DomainError("beltrami_pde_residual: mu is not of vertical degree -2 (defect " +
                          std::to_string(degree_minus_two_defect(mu)) + ")");
    }
    const auto a3 = cubic_a3(t);
    const auto th1 = theta_one(t);
    const auto rhs = a3 * mu * mu * mu - mu * mu * th1 * 2.0 - mu * th1.conj() * 2.0 + a3.conj();
    return eta_minus(mu) - mu * eta_plus(mu) - rhs;
}

struct BeltramiChainReport {
    double leakage = 0.0;           ///< ||(Fu - Va) outside H_{+-1}||
    double relative_leakage = 0.0;  ///< leakage / (||Xu|| + ||lambda Vu|| + ||Va||)
    double formula_gap = 0.0;       ///< ||(Fu - Va) - 3 Re(a3 mu^2 - conj(mu a3) - 2 conj(mu theta_1) + eta_+ mu)||
    double h_identity = 0.0;        ///< sup |e^{2u/3} - (1 + mu)(1 + conj mu)|, when g_hat is supplied
    FieldSM u;
};

/// u = (3/2) log h with h = (1 + mu)(1 + conj(mu)), and the mode content of F u - V a.
inline BeltramiChainReport beltrami_chain_check(const ThermostatTriple& t, const FieldSM& mu) {
    detail::require_inside_disc(mu, "beltrami_chain_check");
    const auto h = map((mu + 1.0) * (mu.conj() + 1.0), [](cplx v) { return cplx(v.real()); });
    BeltramiChainReport rep{0.0, 0.0, 0.0, 0.0, map(h, [](cplx v) { return cplx(1.5 * std::log(v.real())); })};
    const auto d = frame_derivatives(rep.u);
    const auto e = d.X + t.lambda() * d.V - t.Va();
    rep.leakage = std::sqrt(mode_energy(e, {-1, 1}, true));
    // the terms of F u - V a can cancel exactly, so scale by their sizes
    const double scale = l2_norm(d.X) + l2_norm(t.lambda() * d.V) + l2_norm(t.Va());
    rep.relative_leakage = scale > 0.0 ? rep.leakage / scale : rep.leakage;
    if (t.degree() == 3) {
        const auto a3 = cubic_a3(t);
        const auto th1 = theta_one(t);
        const auto inner = a3 * mu * mu - (mu * a3).conj() - (mu * th1).conj() * 2.0 + eta_plus(mu);
        rep.formula_gap = l2_norm(e - inner.real() * 3.0);
    }
    return rep;
}

/// Adds the h identity check for a g_hat built from mu's base representative.
inline BeltramiChainReport beltrami_chain_check(const ThermostatTriple& t, const FieldSM& mu, const HatMetric& gh) {
    auto rep = beltrami_chain_check(t, mu);
    const auto h_pqr = projective_integral(pqr(t.grid(), gh));
    const auto h_mu = (mu + 1.0) * (mu.conj() + 1.0);
    rep.h_identity = max_abs(h_pqr - h_mu);
    return rep;
}

// ---------------------------------------------------------------------------
// Least squares for F u = rhs

struct LeastSquaresOptions {
    int band = -1;  ///< per-axis band limit of u; default is a quarter of the smallest axis
    int max_iterations = 4000;
    double tolerance = 1e-12;  ///< on ||A^*(Au - b)|| / ||A^* b||
};

struct LeastSquaresResult {
    FieldSM u;
    double residual = 0.0;  ///< ||F u - rhs|| / ||rhs||
    int iterations = 0;
    bool converged = false;
    std::vector<double> history;  ///< relative residual after each iteration
};

/// CGLS on min ||F P u - rhs||_Theta, where P keeps real, band-limited, mean-zero
/// fields. The unknown carries the flat quadrature inner product so that P is
/// an orthogonal projection; the adjoint is then P(e^{2w} F^* .).
inline LeastSquaresResult least_squares_transport(const ThermostatTriple& t, const FieldSM& rhs,
                                                  LeastSquaresOptions opt = {}) {
    const auto& grid = t.grid();
    rhs.require_same_grid(FieldSM(grid));
    if (rhs.imag_sup() > 1e-12 * (max_abs(rhs) + 1.0)) throw DomainError("least_squares_transport: rhs must be real");
    const int band = opt.band > 0 ? opt.band : default_band(*grid);
    const auto density = lift(grid, to_complex(grid->metric().area_density()));

    auto project = [&](const FieldSM& v) { return band_limit(v.real(), band, true); };
    auto forward = [&](const FieldSM& v) { return t.apply(v); };
    auto adjoint = [&](const FieldSM& v) { return project(density * t.adjoint(v)); };
    auto flat_norm2 = [&](const FieldSM& v) {
        double s = 0.0;
        for (const auto& z : v.values()) s += std::norm(z);
        return s * grid->cell_volume();
    };
    auto theta_norm2 = [](const FieldSM& v) { return l2_inner(v, v).real(); };

    const double bnorm = std::sqrt(theta_norm2(rhs));
    LeastSquaresResult res{FieldSM(grid), 1.0, 0, false, {}};
    if (bnorm == 0.0) {
        res.residual = 0.0;
        res.converged = true;
        return res;
    }
    // Bound on ||A|| from the largest retained frequencies; used to decide when
    // A^* r is zero up to roundoff.
    double wx = 0.0, wy = 0.0, emax = 0.0;
    for (std::size_t b = 0; b < grid->base_size(); ++b) {
        wx = std::max(wx, std::abs(grid->conf_dx()[b]));
        wy = std::max(wy, std::abs(grid->conf_dy()[b]));
        emax = std::max(emax, grid->inv_scale()[b]);
    }
    const double kx = two_pi / grid->chart().lx() * band, ky = two_pi / grid->chart().ly() * band;
    const double op_bound = emax * (kx + ky + (wx + wy) * band) + max_abs(t.lambda()) * band + 1.0;
    const double noise = 1e-13 * op_bound * bnorm;

    FieldSM r = rhs.real();
    FieldSM s = adjoint(r);
    FieldSM p = s;
    double gamma = flat_norm2(s);
    const double gamma0 = gamma;
    if (std::sqrt(gamma0) <= noise) {
        res.converged = true;
        res.residual = std::sqrt(theta_norm2(r)) / bnorm;
        return res;
    }
    for (int it = 1; it <= opt.max_iterations; ++it) {
        const auto q = forward(p);
        const double qq = theta_norm2(q);
        if (qq == 0.0) break;
        const double alpha = gamma / qq;
        res.u = res.u + p * alpha;
        r = r - q * alpha;
        s = adjoint(r);
        const double gnew = flat_norm2(s);
        res.iterations = it;
        res.history.push_back(std::sqrt(theta_norm2(r)) / bnorm);
        if (std::sqrt(gnew) <= std::max(opt.tolerance * std::sqrt(gamma0), noise) ||
            res.history.back() <= opt.tolerance) {
            res.converged = true;
            break;
        }
        p = s + p * (gnew / gamma);
        gamma = gnew;
    }
    // recompute from scratch so the reported residual is not the recursion's
    res.residual = std::sqrt(theta_norm2(forward(res.u) - rhs.real())) / bnorm;
    return res;
}

}  // namespace thermolab
