#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "thermolab/field.hpp"
#include "thermolab/surface.hpp"

// The unit circle bundle SM of a conformally flat torus metric, sampled on a
// periodic (x, y, phi) grid. A sample (x, y, phi) is the unit vector
// v = exp(-conf) (cos phi d_x + sin phi d_y).
//
// In these coordinates the frame dual to (omega_1, omega_2, psi) is
//
//   X = e^{-w} ( cos phi d_x + sin phi d_y + (-w_x sin phi + w_y cos phi) d_phi )
//   H = e^{-w} (-sin phi d_x + cos phi d_y - ( w_x cos phi + w_y sin phi) d_phi )
//   V = d_phi
//
// with w the conformal factor, and Theta = exp(2w) dx dy dphi.

namespace thermolab {

/// SM grid: chart x fibre samples, plus the precomputed metric coefficients.
class BundleGrid {
public:
    static std::shared_ptr<const BundleGrid> create(BaseMetric metric, int nphi) {
        return std::shared_ptr<const BundleGrid>(new BundleGrid(std::move(metric), nphi));
    }

    const TorusChart& chart() const { return metric_.chart(); }
    const BaseMetric& metric() const { return metric_; }
    int nx() const { return chart().nx(); }
    int ny() const { return chart().ny(); }
    int nphi() const { return nphi_; }
    double phi(int k) const { return two_pi * k / nphi_; }
    std::size_t base_size() const { return chart().size(); }
    std::size_t size() const { return base_size() * static_cast<std::size_t>(nphi_); }
    std::size_t index(int i, int j, int k) const { return chart().index(i, j) * nphi_ + k; }
    const FftPlan& fft() const { return *fft3_; }
    const FftPlan& fiber_fft() const { return *fft1_; }

    /// Quadrature weight of one sample against Theta.
    double cell_volume() const { return chart().cell_area() * two_pi / nphi_; }

    // Precomputed base coefficients (indexed by the base flat index).
    const std::vector<double>& inv_scale() const { return inv_scale_; }   // e^{-w}
    const std::vector<double>& density() const { return density_; }       // e^{2w}
    const std::vector<double>& conf_dx() const { return wx_; }
    const std::vector<double>& conf_dy() const { return wy_; }
    const std::vector<double>& cos_phi() const { return cos_; }
    const std::vector<double>& sin_phi() const { return sin_; }

    bool same_as(const BundleGrid& o) const {
        return this == &o ||
               (chart() == o.chart() && nphi_ == o.nphi_ && metric_.conf().values() == o.metric_.conf().values());
    }

private:
    BundleGrid(BaseMetric metric, int nphi) : metric_(std::move(metric)), nphi_(nphi) {
        if (nphi < 16 || nphi % 2 != 0) throw std::invalid_argument("BundleGrid: nphi must be even and >= 16");
        fft3_ = std::make_shared<const FftPlan>(std::vector<int>{nx(), ny(), nphi_});
        fft1_ = std::make_shared<const FftPlan>(std::vector<int>{nphi_});
        const auto& w = metric_.conf();
        auto wx = partial(w, 1, 0);
        auto wy = partial(w, 0, 1);
        const std::size_t nb = base_size();
        inv_scale_.resize(nb);
        density_.resize(nb);
        for (std::size_t b = 0; b < nb; ++b) {
            inv_scale_[b] = std::exp(-w.values()[b]);
            density_[b] = std::exp(2.0 * w.values()[b]);
        }
        wx_ = wx.values();
        wy_ = wy.values();
        cos_.resize(nphi_);
        sin_.resize(nphi_);
        for (int k = 0; k < nphi_; ++k) {
            cos_[k] = std::cos(phi(k));
            sin_[k] = std::sin(phi(k));
        }
    }

    BaseMetric metric_;
    int nphi_;
    std::shared_ptr<const FftPlan> fft3_, fft1_;
    std::vector<double> inv_scale_, density_, wx_, wy_, cos_, sin_;
};

using GridPtr = std::shared_ptr<const BundleGrid>;

/// Complex function on SM (real fields carry a zero imaginary part).
class FieldSM {
public:
    using value_type = cplx;

    explicit FieldSM(GridPtr grid, cplx fill = 0.0) : grid_(std::move(grid)), v_(grid_->size(), fill) {}
    FieldSM(GridPtr grid, std::vector<cplx> values) : grid_(std::move(grid)), v_(std::move(values)) {
        if (v_.size() != grid_->size()) throw GridMismatch("FieldSM: sample count does not match grid");
    }

    /// Samples fn(x, y, phi).
    template <class Fn>
    static FieldSM sample(const GridPtr& grid, Fn&& fn) {
        FieldSM f(grid);
        const auto& c = grid->chart();
        for (int i = 0; i < c.nx(); ++i)
            for (int j = 0; j < c.ny(); ++j)
                for (int k = 0; k < grid->nphi(); ++k)
                    f.v_[grid->index(i, j, k)] = static_cast<cplx>(fn(c.x(i), c.y(j), grid->phi(k)));
        return f;
    }

    const GridPtr& grid() const { return grid_; }
    std::vector<cplx>& values() { return v_; }
    const std::vector<cplx>& values() const { return v_; }
    cplx& operator()(int i, int j, int k) { return v_[grid_->index(i, j, k)]; }
    const cplx& operator()(int i, int j, int k) const { return v_[grid_->index(i, j, k)]; }

    void require_same_grid(const FieldSM& o) const {
        if (!grid_->same_as(*o.grid_)) throw GridMismatch("FieldSM: fields live on different bundle grids");
    }

    FieldSM conj() const {
        FieldSM c = *this;
        for (auto& v : c.v_) v = std::conj(v);
        return c;
    }
    FieldSM real() const {
        FieldSM c = *this;
        for (auto& v : c.v_) v = v.real();
        return c;
    }
    FieldSM imag() const {
        FieldSM c = *this;
        for (auto& v : c.v_) v = v.imag();
        return c;
    }
    /// Largest |Im| over the grid.
    double imag_sup() const {
        double m = 0.0;
        for (const auto& v : v_) m = std::max(m, std::abs(v.imag()));
        return m;
    }

private:
    GridPtr grid_;
    std::vector<cplx> v_;
};

// ---------------------------------------------------------------------------
// Lifts from the base surface

/// pi^* h: the phi-independent lift of a base function.
template <class T>
FieldSM lift(const GridPtr& grid, const PlanarField<T>& h) {
    if (!(h.chart() == grid->chart())) throw GridMismatch("lift: chart differs from bundle grid");
    FieldSM f(grid);
    const int np = grid->nphi();
    for (std::size_t b = 0; b < grid->base_size(); ++b)
        for (int k = 0; k < np; ++k) f.values()[b * np + k] = h.values()[b];
    return f;
}

/// theta(x, v) for v the unit vector at angle phi: mode (+-1) function.
inline FieldSM lift(const GridPtr& grid, const OneForm& theta) {
    if (!(theta.chart() == grid->chart())) throw GridMismatch("lift: chart differs from bundle grid");
    FieldSM f(grid);
    const int np = grid->nphi();
    for (std::size_t b = 0; b < grid->base_size(); ++b) {
        const double e = grid->inv_scale()[b];
        const double cx = theta.cx().values()[b], cy = theta.cy().values()[b];
        for (int k = 0; k < np; ++k) f.values()[b * np + k] = e * (cx * grid->cos_phi()[k] + cy * grid->sin_phi()[k]);
    }
    return f;
}

/// Average over the fibre (the H_0 coefficient) as a base field.
inline ComplexField fiber_mean(const FieldSM& f) {
    const auto& g = *f.grid();
    ComplexField out(g.chart());
    const int np = g.nphi();
    for (std::size_t b = 0; b < g.base_size(); ++b) {
        cplx s = 0.0;
        for (int k = 0; k < np; ++k) s += f.values()[b * np + k];
        out.values()[b] = s / static_cast<double>(np);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Spectral derivatives and the frame

struct Gradient {
    FieldSM dx, dy, dphi;
};

/// Coordinate derivatives (d_x, d_y, d_phi) from one forward transform.
inline Gradient coordinate_gradient(const FieldSM& f) {
    const auto& g = *f.grid();
    const auto& c = g.chart();
    const auto hat = g.fft().forward(f.values());
    auto apply = [&](int ox, int oy, int op) {
        std::vector<cplx> h(hat.size());
        for (int i = 0; i < c.nx(); ++i) {
            const cplx sx = derivative_symbol(i, c.nx(), c.lx(), ox);
            for (int j = 0; j < c.ny(); ++j) {
                const cplx sxy = sx * derivative_symbol(j, c.ny(), c.ly(), oy);
                for (int k = 0; k < g.nphi(); ++k) {
                    const std::size_t at = g.index(i, j, k);
                    h[at] = hat[at] * sxy * derivative_symbol(k, g.nphi(), two_pi, op);
                }
            }
        }
        return FieldSM(f.grid(), g.fft().backward(h));
    };
    return {apply(1, 0, 0), apply(0, 1, 0), apply(0, 0, 1)};
}

/// V^order f, computed along the fibre.
inline FieldSM op_V(const FieldSM& f, int order = 1) {
    const auto& g = *f.grid();
    const int np = g.nphi();
    FieldSM out(f.grid());
    std::vector<cplx> col(np);
    for (std::size_t b = 0; b < g.base_size(); ++b) {
        std::copy_n(f.values().begin() + static_cast<std::ptrdiff_t>(b * np), np, col.begin());
        auto hat = g.fiber_fft().forward(col);
        for (int k = 0; k < np; ++k) hat[k] *= derivative_symbol(k, np, two_pi, order);
        auto back = g.fiber_fft().backward(hat);
        std::copy(back.begin(), back.end(), out.values().begin() + static_cast<std::ptrdiff_t>(b * np));
    }
    return out;
}

struct FrameDerivatives {
    FieldSM X, H, V;
};

/// (Xf, Hf, Vf) sharing a single gradient evaluation.
inline FrameDerivatives frame_derivatives(const FieldSM& f) {
    const auto& g = *f.grid();
    auto grad = coordinate_gradient(f);
    FieldSM xf(f.grid()), hf(f.grid());
    const int np = g.nphi();
    for (std::size_t b = 0; b < g.base_size(); ++b) {
        const double e = g.inv_scale()[b], wx = g.conf_dx()[b], wy = g.conf_dy()[b];
        for (int k = 0; k < np; ++k) {
            const std::size_t at = b * np + k;
            const double cs = g.cos_phi()[k], sn = g.sin_phi()[k];
            const cplx fx = grad.dx.values()[at], fy = grad.dy.values()[at], fp = grad.dphi.values()[at];
            xf.values()[at] = e * (cs * fx + sn * fy + (-wx * sn + wy * cs) * fp);
            hf.values()[at] = e * (-sn * fx + cs * fy - (wx * cs + wy * sn) * fp);
        }
    }
    return {std::move(xf), std::move(hf), std::move(grad.dphi)};
}

inline FieldSM op_X(const FieldSM& f) { return frame_derivatives(f).X; }
inline FieldSM op_H(const FieldSM& f) { return frame_derivatives(f).H; }

/// eta_+ f = (Xf - iHf)/2.
inline FieldSM eta_plus(const FieldSM& f) {
    auto d = frame_derivatives(f);
    return (d.X - d.H * cplx(0.0, 1.0)) * 0.5;
}

/// eta_- f = (Xf + iHf)/2.
inline FieldSM eta_minus(const FieldSM& f) {
    auto d = frame_derivatives(f);
    return (d.X + d.H * cplx(0.0, 1.0)) * 0.5;
}

/// Div_Theta(wX X + wH H + wV V) = X wX + H wH + V wV, since X, H, V preserve Theta.
inline FieldSM divergence_theta(const FieldSM& wX, const FieldSM& wH, const FieldSM& wV) {
    return op_X(wX) + op_H(wH) + op_V(wV);
}

// ---------------------------------------------------------------------------
// L^2(SM, Theta)

/// <f, h> = int f conj(h) Theta (trapezoid rule).
inline cplx l2_inner(const FieldSM& f, const FieldSM& h) {
    f.require_same_grid(h);
    const auto& g = *f.grid();
    const int np = g.nphi();
    cplx s = 0.0;
    for (std::size_t b = 0; b < g.base_size(); ++b) {
        cplx sb = 0.0;
        for (int k = 0; k < np; ++k) sb += f.values()[b * np + k] * std::conj(h.values()[b * np + k]);
        s += sb * g.density()[b];
    }
    return s * g.cell_volume();
}

inline double l2_norm(const FieldSM& f) { return std::sqrt(std::max(0.0, l2_inner(f, f).real())); }

/// Integral of f against Theta.
inline cplx integrate(const FieldSM& f) { return l2_inner(f, FieldSM(f.grid(), 1.0)); }

// ---------------------------------------------------------------------------
// Vertical Fourier analysis

/// Coefficients of e^{i m phi}: f = sum_m modes[m](x, y) e^{i m phi}.
struct VerticalSpectrum {
    GridPtr grid;
    std::map<int, ComplexField> modes;
};

inline VerticalSpectrum vertical_fft(const FieldSM& f) {
    const auto& g = *f.grid();
    const int np = g.nphi();
    VerticalSpectrum s{f.grid(), {}};
    std::vector<std::vector<cplx>> cols(np, std::vector<cplx>(g.base_size()));
    std::vector<cplx> col(np);
    for (std::size_t b = 0; b < g.base_size(); ++b) {
        std::copy_n(f.values().begin() + static_cast<std::ptrdiff_t>(b * np), np, col.begin());
        auto hat = g.fiber_fft().forward(col);
        for (int k = 0; k < np; ++k) cols[k][b] = hat[k] / static_cast<double>(np);
    }
    for (int k = 0; k < np; ++k) {
        s.modes.emplace(signed_index(k, np), ComplexField(g.chart(), std::move(cols[k])));
    }
    return s;
}

inline FieldSM vertical_ifft(const VerticalSpectrum& s) {
    const auto& g = *s.grid;
    const int np = g.nphi();
    FieldSM out(s.grid);
    std::vector<cplx> hat(np);
    for (std::size_t b = 0; b < g.base_size(); ++b) {
        std::fill(hat.begin(), hat.end(), cplx(0.0));
        for (const auto& [m, coeff] : s.modes) {
            const int k = ((m % np) + np) % np;
            hat[k] += coeff.values()[b] * static_cast<double>(np);
        }
        auto back = g.fiber_fft().backward(hat);
        std::copy(back.begin(), back.end(), out.values().begin() + static_cast<std::ptrdiff_t>(b * np));
    }
    return out;
}

/// L^2(Theta) energy of the vertical modes listed in `keep` (or all others when
/// `complement` is true). Uses Parseval: ||h e^{im phi}||^2 = 2 pi int |h|^2 e^{2w}.
inline double mode_energy(const FieldSM& f, const std::set<int>& keep, bool complement = false) {
    const auto spec = vertical_fft(f);
    const auto& g = *f.grid();
    double e = 0.0;
    for (const auto& [m, coeff] : spec.modes) {
        if (keep.contains(m) == complement) continue;
        double s = 0.0;
        for (std::size_t b = 0; b < g.base_size(); ++b) s += std::norm(coeff.values()[b]) * g.density()[b];
        e += s * g.chart().cell_area() * two_pi;
    }
    return e;
}

/// Keeps only vertical modes in `keep`.
inline FieldSM project_modes(const FieldSM& f, const std::set<int>& keep) {
    auto spec = vertical_fft(f);
    for (auto& [m, coeff] : spec.modes) {
        if (!keep.contains(m)) coeff = ComplexField(coeff.chart(), cplx(0.0));
    }
    return vertical_ifft(spec);
}

/// Sets every Fourier coefficient with |index| > band on any axis (and the
/// Nyquist bins) to zero; optionally drops the global mean.
inline FieldSM band_limit(const FieldSM& f, int band, bool drop_mean = false) {
    const auto& g = *f.grid();
    auto hat = g.fft().forward(f.values());
    for (int i = 0; i < g.nx(); ++i)
        for (int j = 0; j < g.ny(); ++j)
            for (int k = 0; k < g.nphi(); ++k) {
                const bool out = std::abs(signed_index(i, g.nx())) > band || std::abs(signed_index(j, g.ny())) > band ||
                                 std::abs(signed_index(k, g.nphi())) > band || is_nyquist(i, g.nx()) ||
                                 is_nyquist(j, g.ny()) || is_nyquist(k, g.nphi());
                if (out || (drop_mean && i == 0 && j == 0 && k == 0)) hat[g.index(i, j, k)] = 0.0;
            }
    return FieldSM(f.grid(), g.fft().backward(hat));
}

/// Largest band a random test field may use on this grid (quarter of the
/// smallest axis).
inline int default_band(const BundleGrid& g) { return std::min({g.nx(), g.ny(), g.nphi()}) / 4; }

/// Random real field with |index| <= band on each axis.
inline FieldSM random_field(const GridPtr& grid, int band, BandLimitedSampler& sampler) {
    const int shape[3] = {grid->nx(), grid->ny(), grid->nphi()};
    const int bands[3] = {band, band, band};
    auto spec = sampler.spectrum(shape, bands);
    auto vals = grid->fft().backward(spec);
    FieldSM f(grid);
    const double scale = static_cast<double>(grid->size());
    for (std::size_t k = 0; k < vals.size(); ++k) f.values()[k] = vals[k].real() * scale;
    return f;
}

/// Random real field supported on the listed vertical modes (and their
/// negatives), band-limited in x, y.
inline FieldSM random_modal_field(const GridPtr& grid, const std::set<int>& modes, int band,
                                  BandLimitedSampler& sampler) {
    VerticalSpectrum s{grid, {}};
    for (int m : modes) {
        if (m < 0) continue;
        auto re = random_planar_field(grid->chart(), band, sampler);
        auto im = random_planar_field(grid->chart(), band, sampler);
        ComplexField c(grid->chart());
        for (std::size_t b = 0; b < c.values().size(); ++b) c.values()[b] = cplx(re.values()[b], im.values()[b]);
        if (m == 0) {
            s.modes.insert_or_assign(0, to_complex(re));
            continue;
        }
        ComplexField cc(grid->chart());
        for (std::size_t b = 0; b < c.values().size(); ++b) cc.values()[b] = std::conj(c.values()[b]);
        s.modes.insert_or_assign(m, c);
        s.modes.insert_or_assign(-m, cc);
    }
    return vertical_ifft(s).real();
}

// ---------------------------------------------------------------------------
// Commutator battery

struct CommutatorResiduals {
    double vx_minus_h = 0.0;   ///< max_f ||([V,X] - H) f|| / ||f||_H1
    double vh_plus_x = 0.0;    ///< max_f ||([V,H] + X) f|| / ||f||_H1
    double xh_minus_kv = 0.0;  ///< max_f ||([X,H] - K V) f|| / ||f||_H1
};

/// H^1-type normalisation ||f|| + ||Xf|| + ||Hf|| + ||Vf|| used to make the
/// commutator residuals relative.
inline double h1_proxy(const FieldSM& f) {
    auto d = frame_derivatives(f);
    return l2_norm(f) + l2_norm(d.X) + l2_norm(d.H) + l2_norm(d.V);
}

inline CommutatorResiduals commutator_residuals_for(const FieldSM& f) {
    const auto K = lift(f.grid(), gauss_curvature(f.grid()->metric()));
    auto d = frame_derivatives(f);
    auto dX = frame_derivatives(d.X);
    auto dH = frame_derivatives(d.H);
    auto dV = frame_derivatives(d.V);
    const double scale = l2_norm(f) + l2_norm(d.X) + l2_norm(d.H) + l2_norm(d.V) + 1e-300;
    CommutatorResiduals r;
    r.vx_minus_h = l2_norm(dX.V - dV.X - d.H) / scale;
    r.vh_plus_x = l2_norm(dH.V - dV.H + d.X) / scale;
    r.xh_minus_kv = l2_norm(dH.X - dX.H - K * d.V) / scale;
    return r;
}

/// Applies all three structure relations to `count` seeded random fields and
/// returns the worst relative residual of each.
inline CommutatorResiduals commutator_residuals(const GridPtr& grid, int count = 10, std::uint64_t seed = 1,
                                                int band = -1) {
    BandLimitedSampler sampler(seed);
    if (band < 0) band = default_band(*grid);
    CommutatorResiduals worst;
    for (int n = 0; n < count; ++n) {
        auto r = commutator_residuals_for(random_field(grid, band, sampler));
        worst.vx_minus_h = std::max(worst.vx_minus_h, r.vx_minus_h);
        worst.vh_plus_x = std::max(worst.vh_plus_x, r.vh_plus_x);
        worst.xh_minus_kv = std::max(worst.xh_minus_kv, r.xh_minus_kv);
    }
    return worst;
}

}  // namespace thermolab
