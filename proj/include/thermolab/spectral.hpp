#pragma once

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace thermolab {

using cplx = std::complex<double>;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

namespace detail {

// The FFTW planner keeps global state and must not run concurrently.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace detail

/// Signed frequency index of DFT bin j on an axis of length n.
/// The Nyquist bin (n even, j == n/2) maps to +n/2.
constexpr int signed_index(int j, int n) { return j <= n / 2 ? j : j - n; }

constexpr bool is_nyquist(int j, int n) { return n % 2 == 0 && j == n / 2; }

/// Complex-to-complex DFT of a fixed row-major shape (rank 1..3).
///
/// Plans are created with FFTW_ESTIMATE | FFTW_UNALIGNED, so they can be
/// executed on any std::complex<double> buffer of the right size through the
/// new-array interface, which FFTW documents as thread-safe.
class FftPlan {
public:
    explicit FftPlan(std::vector<int> shape) : shape_(std::move(shape)) {
        if (shape_.empty() || shape_.size() > 3) {
            throw std::invalid_argument("FftPlan: rank must be 1, 2 or 3");
        }
        size_ = 1;
        for (int n : shape_) {
            if (n <= 0) throw std::invalid_argument("FftPlan: non-positive extent");
            size_ *= static_cast<std::size_t>(n);
        }
        std::lock_guard lock(detail::fftw_planner_mutex());
        auto* in = fftw_alloc_complex(size_);
        auto* out = fftw_alloc_complex(size_);
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        const int rank = static_cast<int>(shape_.size());
        fwd_ = fftw_plan_dft(rank, shape_.data(), in, out, FFTW_FORWARD, flags);
        bwd_ = fftw_plan_dft(rank, shape_.data(), in, out, FFTW_BACKWARD, flags);
        fftw_free(in);
        fftw_free(out);
        if (fwd_ == nullptr || bwd_ == nullptr) throw std::runtime_error("FftPlan: planning failed");
    }

    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;

    ~FftPlan() {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
    }

    std::size_t size() const { return size_; }
    const std::vector<int>& shape() const { return shape_; }

    /// Unnormalised forward transform (e^{-i k x} kernel).
    std::vector<cplx> forward(std::span<const cplx> in) const {
        return execute(fwd_, in, 1.0);
    }

    /// Inverse transform, normalised so backward(forward(f)) == f.
    std::vector<cplx> backward(std::span<const cplx> in) const {
        return execute(bwd_, in, 1.0 / static_cast<double>(size_));
    }

private:
    std::vector<cplx> execute(fftw_plan plan, std::span<const cplx> in, double scale) const {
        if (in.size() != size_) throw std::invalid_argument("FftPlan: buffer size mismatch");
        std::vector<cplx> src(in.begin(), in.end());
        std::vector<cplx> out(size_);
        fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(src.data()),
                         reinterpret_cast<fftw_complex*>(out.data()));
        if (scale != 1.0) {
            for (auto& c : out) c *= scale;
        }
        return out;
    }

    std::vector<int> shape_;
    std::size_t size_ = 0;
    fftw_plan fwd_ = nullptr;
    fftw_plan bwd_ = nullptr;
};

/// Multiplier of the spectral derivative of the given order on one axis.
/// Odd-order derivatives drop the Nyquist bin so real data stays real.
inline cplx derivative_symbol(int j, int n, double period, int order) {
    if (order == 0) return 1.0;
    if (order % 2 == 1 && is_nyquist(j, n)) return 0.0;
    const double k = two_pi / period * signed_index(j, n);
    cplx s = 1.0;
    for (int p = 0; p < order; ++p) s *= cplx(0.0, k);
    return s;
}

/// Seeded generator for random band-limited spectra. Coefficients are
/// standard normal, damped by 1/(1 + |k|^2), and nonzero only for
/// |signed index| <= band on every axis.
class BandLimitedSampler {
public:
    explicit BandLimitedSampler(std::uint64_t seed) : rng_(seed) {}

    std::vector<cplx> spectrum(std::span<const int> shape, std::span<const int> band) {
        std::size_t total = 1;
        for (int n : shape) total *= static_cast<std::size_t>(n);
        std::vector<cplx> coeffs(total, 0.0);
        std::normal_distribution<double> normal(0.0, 1.0);
        const int rank = static_cast<int>(shape.size());
        std::vector<int> idx(rank, 0);
        for (std::size_t flat = 0; flat < total; ++flat) {
            std::size_t rem = flat;
            for (int d = rank - 1; d >= 0; --d) {
                idx[d] = static_cast<int>(rem % static_cast<std::size_t>(shape[d]));
                rem /= static_cast<std::size_t>(shape[d]);
            }
            bool inside = true;
            double k2 = 0.0;
            for (int d = 0; d < rank; ++d) {
                const int s = signed_index(idx[d], shape[d]);
                if (std::abs(s) > band[d] || is_nyquist(idx[d], shape[d])) inside = false;
                k2 += static_cast<double>(s) * s;
            }
            // Draw unconditionally so the stream does not depend on the band.
            const double re = normal(rng_);
            const double im = normal(rng_);
            if (inside) coeffs[flat] = cplx(re, im) / (1.0 + k2);
        }
        return coeffs;
    }

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng_);
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

}  // namespace thermolab
