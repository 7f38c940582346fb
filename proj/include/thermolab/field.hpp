#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstddef>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "thermolab/spectral.hpp"

namespace thermolab {

/// Raised when two fields live on different grids.
class GridMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an input violates a domain restriction (SPD metric, |mu| < 1,
/// unsupported degree, ...). The message names the worst offending sample.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// The periodic model chart [0, Lx) x [0, Ly) sampled on an nx x ny grid.
class TorusChart {
public:
    TorusChart(int nx, int ny, double lx = two_pi, double ly = two_pi)
        : nx_(nx), ny_(ny), lx_(lx), ly_(ly) {
        if (nx < 8 || ny < 8 || nx % 2 != 0 || ny % 2 != 0) {
            throw std::invalid_argument("TorusChart: nx, ny must be even and >= 8");
        }
        if (!(lx > 0.0) || !(ly > 0.0)) throw std::invalid_argument("TorusChart: periods must be positive");
        fft_ = std::make_shared<const FftPlan>(std::vector<int>{nx, ny});
    }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double lx() const { return lx_; }
    double ly() const { return ly_; }
    std::size_t size() const { return static_cast<std::size_t>(nx_) * ny_; }
    double x(int i) const { return lx_ * i / nx_; }
    double y(int j) const { return ly_ * j / ny_; }
    double cell_area() const { return lx_ * ly_ / static_cast<double>(size()); }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * ny_ + j; }
    const FftPlan& fft() const { return *fft_; }

    bool operator==(const TorusChart& o) const {
        return nx_ == o.nx_ && ny_ == o.ny_ && lx_ == o.lx_ && ly_ == o.ly_;
    }

private:
    int nx_, ny_;
    double lx_, ly_;
    std::shared_ptr<const FftPlan> fft_;
};

/// Element-wise arithmetic shared by every sampled field type. A field
/// exposes values(), a compatibility check, and copy semantics.
template <class F>
concept SampledField = requires(F f, const F& g) {
    { f.values() } -> std::same_as<std::vector<typename F::value_type>&>;
    { g.values() } -> std::same_as<const std::vector<typename F::value_type>&>;
    g.require_same_grid(g);
};

template <SampledField F>
F operator+(F a, const F& b) {
    a.require_same_grid(b);
    auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) av[i] += bv[i];
    return a;
}

template <SampledField F>
F operator-(F a, const F& b) {
    a.require_same_grid(b);
    auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) av[i] -= bv[i];
    return a;
}

template <SampledField F>
F operator*(F a, const F& b) {
    a.require_same_grid(b);
    auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) av[i] *= bv[i];
    return a;
}

template <SampledField F>
F operator/(F a, const F& b) {
    a.require_same_grid(b);
    auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) av[i] /= bv[i];
    return a;
}

template <SampledField F>
F operator-(F a) {
    for (auto& v : a.values()) v = -v;
    return a;
}

template <SampledField F, class S>
    requires std::is_arithmetic_v<S> || std::same_as<S, cplx>
F operator*(F a, S s) {
    for (auto& v : a.values()) v *= typename F::value_type(s);
    return a;
}

template <SampledField F, class S>
    requires std::is_arithmetic_v<S> || std::same_as<S, cplx>
F operator*(S s, F a) {
    return std::move(a) * s;
}

template <SampledField F, class S>
    requires std::is_arithmetic_v<S> || std::same_as<S, cplx>
F operator+(F a, S s) {
    for (auto& v : a.values()) v += typename F::value_type(s);
    return a;
}

template <SampledField F, class Fn>
F map(F a, Fn&& fn) {
    for (auto& v : a.values()) v = fn(v);
    return a;
}

template <SampledField F>
double max_abs(const F& f) {
    double m = 0.0;
    for (const auto& v : f.values()) m = std::max(m, std::abs(v));
    return m;
}

/// A real or complex function sampled on the torus chart.
template <class T>
class PlanarField {
public:
    using value_type = T;

    explicit PlanarField(TorusChart chart, T fill = T{})
        : chart_(std::move(chart)), v_(chart_.size(), fill) {}

    PlanarField(TorusChart chart, std::vector<T> values) : chart_(std::move(chart)), v_(std::move(values)) {
        if (v_.size() != chart_.size()) throw GridMismatch("PlanarField: sample count does not match chart");
    }

    /// Samples fn(x, y) on the grid.
    template <class Fn>
    static PlanarField sample(const TorusChart& chart, Fn&& fn) {
        PlanarField f(chart);
        for (int i = 0; i < chart.nx(); ++i)
            for (int j = 0; j < chart.ny(); ++j) f.v_[chart.index(i, j)] = static_cast<T>(fn(chart.x(i), chart.y(j)));
        return f;
    }

    const TorusChart& chart() const { return chart_; }
    std::vector<T>& values() { return v_; }
    const std::vector<T>& values() const { return v_; }
    T& operator()(int i, int j) { return v_[chart_.index(i, j)]; }
    const T& operator()(int i, int j) const { return v_[chart_.index(i, j)]; }

    void require_same_grid(const PlanarField& o) const {
        if (!(chart_ == o.chart_)) throw GridMismatch("PlanarField: charts differ");
    }

private:
    TorusChart chart_;
    std::vector<T> v_;
};

using RealField = PlanarField<double>;
using ComplexField = PlanarField<cplx>;

inline ComplexField to_complex(const RealField& f) {
    ComplexField c(f.chart());
    for (std::size_t i = 0; i < f.values().size(); ++i) c.values()[i] = f.values()[i];
    return c;
}

inline RealField real_part(const ComplexField& f) {
    RealField r(f.chart());
    for (std::size_t i = 0; i < f.values().size(); ++i) r.values()[i] = f.values()[i].real();
    return r;
}

inline RealField imag_part(const ComplexField& f) {
    RealField r(f.chart());
    for (std::size_t i = 0; i < f.values().size(); ++i) r.values()[i] = f.values()[i].imag();
    return r;
}

/// Spectral partial derivative d^ox/dx^ox d^oy/dy^oy of a planar field.
template <class T>
PlanarField<T> partial(const PlanarField<T>& f, int ox, int oy) {
    const auto& c = f.chart();
    std::vector<cplx> data(f.values().begin(), f.values().end());
    auto hat = c.fft().forward(data);
    for (int i = 0; i < c.nx(); ++i) {
        const cplx sx = derivative_symbol(i, c.nx(), c.lx(), ox);
        for (int j = 0; j < c.ny(); ++j) hat[c.index(i, j)] *= sx * derivative_symbol(j, c.ny(), c.ly(), oy);
    }
    auto back = c.fft().backward(hat);
    PlanarField<T> out(c);
    for (std::size_t k = 0; k < back.size(); ++k) {
        if constexpr (std::is_same_v<T, double>) {
            out.values()[k] = back[k].real();
        } else {
            out.values()[k] = back[k];
        }
    }
    return out;
}

template <class T>
PlanarField<T> flat_laplacian(const PlanarField<T>& f) {
    return partial(f, 2, 0) + partial(f, 0, 2);
}

/// Mean-zero solution h of the flat Poisson equation (d_xx + d_yy) h = rhs.
/// The mean of rhs is discarded (it is the solvability obstruction).
inline RealField solve_flat_poisson(const RealField& rhs) {
    const auto& c = rhs.chart();
    std::vector<cplx> data(rhs.values().begin(), rhs.values().end());
    auto hat = c.fft().forward(data);
    for (int i = 0; i < c.nx(); ++i) {
        const double kx = two_pi / c.lx() * signed_index(i, c.nx());
        for (int j = 0; j < c.ny(); ++j) {
            const double ky = two_pi / c.ly() * signed_index(j, c.ny());
            const double k2 = kx * kx + ky * ky;
            auto& h = hat[c.index(i, j)];
            h = (i == 0 && j == 0) ? cplx(0.0) : -h / k2;
        }
    }
    auto back = c.fft().backward(hat);
    RealField out(c);
    for (std::size_t k = 0; k < back.size(); ++k) out.values()[k] = back[k].real();
    return out;
}

/// Trapezoid (spectrally accurate) integral against dx dy.
template <class T>
T integrate_flat(const PlanarField<T>& f) {
    T s = std::accumulate(f.values().begin(), f.values().end(), T{});
    return s * f.chart().cell_area();
}

/// Random real field with Fourier support |kx|, |ky| <= band.
inline RealField random_planar_field(const TorusChart& chart, int band, BandLimitedSampler& sampler) {
    const int shape[2] = {chart.nx(), chart.ny()};
    const int bands[2] = {band, band};
    auto spec = sampler.spectrum(shape, bands);
    auto vals = chart.fft().backward(spec);
    RealField f(chart);
    const double scale = static_cast<double>(chart.size());
    for (std::size_t k = 0; k < vals.size(); ++k) f.values()[k] = vals[k].real() * scale;
    return f;
}

inline std::string describe_point(const TorusChart& c, std::size_t flat) {
    std::ostringstream os;
    const int i = static_cast<int>(flat / static_cast<std::size_t>(c.ny()));
    const int j = static_cast<int>(flat % static_cast<std::size_t>(c.ny()));
    os << "(ix=" << i << ", iy=" << j << ", x=" << c.x(i) << ", y=" << c.y(j) << ")";
    return os.str();
}

}  // namespace thermolab
