#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "thermolab/circle_bundle.hpp"

// Field files.
//
// Binary layout (little endian):
//   char[4]  "TLFD"
//   uint32   version (1)
//   uint32   nx, ny, nphi      (nphi = 1 for fields on the surface)
//   uint32   dtype             (0 = float64, 1 = complex128 as re, im pairs)
//   float64  lx, ly
//   data     row-major, index (i * ny + j) * nphi + k
//
// CSV has a header row and one sample per line: x,y[,phi],value or x,y[,phi],re,im.

namespace thermolab::io {

static_assert(std::endian::native == std::endian::little, "field files assume a little-endian host");

inline constexpr char magic[4] = {'T', 'L', 'F', 'D'};
inline constexpr std::uint32_t format_version = 1;

enum class DType : std::uint32_t { f64 = 0, c128 = 1 };

struct RawField {
    std::uint32_t nx = 0, ny = 0, nphi = 1;
    DType dtype = DType::f64;
    double lx = two_pi, ly = two_pi;
    std::vector<cplx> data;

    TorusChart chart() const { return TorusChart(static_cast<int>(nx), static_cast<int>(ny), lx, ly); }
};

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void write_binary(const std::filesystem::path& path, const RawField& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    auto put32 = [&](std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
    auto put64 = [&](double v) { os.write(reinterpret_cast<const char*>(&v), 8); };
    os.write(magic, 4);
    put32(format_version);
    put32(f.nx);
    put32(f.ny);
    put32(f.nphi);
    put32(static_cast<std::uint32_t>(f.dtype));
    put64(f.lx);
    put64(f.ly);
    for (const auto& v : f.data) {
        put64(v.real());
        if (f.dtype == DType::c128) put64(v.imag());
    }
    if (!os) throw std::runtime_error("write failed for " + path.string());
}

inline RawField read_binary(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open field file " + path.string());
    char m[4];
    is.read(m, 4);
    if (!is || std::memcmp(m, magic, 4) != 0) throw FormatError(path.string() + ": not a field file (bad magic)");
    auto get32 = [&]() {
        std::uint32_t v = 0;
        is.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    auto get64 = [&]() {
        double v = 0;
        is.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    const auto version = get32();
    if (version != format_version) throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
    RawField f;
    f.nx = get32();
    f.ny = get32();
    f.nphi = get32();
    const auto dt = get32();
    if (dt > 1) throw FormatError(path.string() + ": unknown dtype " + std::to_string(dt));
    f.dtype = static_cast<DType>(dt);
    f.lx = get64();
    f.ly = get64();
    if (!is) throw FormatError(path.string() + ": truncated header");
    const std::size_t n = static_cast<std::size_t>(f.nx) * f.ny * f.nphi;
    f.data.resize(n);
    for (auto& v : f.data) {
        const double re = get64();
        const double im = f.dtype == DType::c128 ? get64() : 0.0;
        v = cplx(re, im);
    }
    if (!is) throw FormatError(path.string() + ": truncated data (expected " + std::to_string(n) + " samples)");
    return f;
}

template <class T>
RawField to_raw(const PlanarField<T>& f) {
    const auto& c = f.chart();
    RawField r{static_cast<std::uint32_t>(c.nx()), static_cast<std::uint32_t>(c.ny()), 1,
               std::is_same_v<T, double> ? DType::f64 : DType::c128, c.lx(), c.ly(), {}};
    r.data.assign(f.values().begin(), f.values().end());
    return r;
}

inline RawField to_raw(const FieldSM& f, bool real = false) {
    const auto& g = *f.grid();
    return {static_cast<std::uint32_t>(g.nx()), static_cast<std::uint32_t>(g.ny()), static_cast<std::uint32_t>(g.nphi()),
            real ? DType::f64 : DType::c128, g.chart().lx(), g.chart().ly(), f.values()};
}

/// Surface field from a file; the file must match the chart.
inline ComplexField planar_from_raw(const RawField& r, const TorusChart& chart) {
    if (r.nphi != 1 || !(r.chart() == chart)) {
        throw GridMismatch("field file grid " + std::to_string(r.nx) + "x" + std::to_string(r.ny) + "x" +
                           std::to_string(r.nphi) + " does not match the chart " + std::to_string(chart.nx()) + "x" +
                           std::to_string(chart.ny()));
    }
    return ComplexField(chart, r.data);
}

inline FieldSM bundle_from_raw(const RawField& r, const GridPtr& grid) {
    if (static_cast<int>(r.nx) != grid->nx() || static_cast<int>(r.ny) != grid->ny() ||
        static_cast<int>(r.nphi) != grid->nphi()) {
        throw GridMismatch("field file grid does not match the bundle grid");
    }
    return FieldSM(grid, r.data);
}

inline void write_csv(const std::filesystem::path& path, const RawField& f) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os << std::setprecision(17);
    const bool bundle = f.nphi > 1;
    const bool cx = f.dtype == DType::c128;
    os << "x,y" << (bundle ? ",phi" : "") << (cx ? ",re,im" : ",value") << "\n";
    for (std::uint32_t i = 0; i < f.nx; ++i)
        for (std::uint32_t j = 0; j < f.ny; ++j)
            for (std::uint32_t k = 0; k < f.nphi; ++k) {
                const auto& v = f.data[(static_cast<std::size_t>(i) * f.ny + j) * f.nphi + k];
                os << f.lx * i / f.nx << "," << f.ly * j / f.ny;
                if (bundle) os << "," << two_pi * k / f.nphi;
                os << "," << v.real();
                if (cx) os << "," << v.imag();
                os << "\n";
            }
}

/// Writes one binary file per vertical mode and a JSON index
/// {"modes": {"m": "file"}, "nx": .., "ny": .., "nphi": ..}.
inline nlohmann::json write_spectrum(const std::filesystem::path& dir, const std::string& stem, const FieldSM& f) {
    std::filesystem::create_directories(dir);
    const auto spec = vertical_fft(f);
    nlohmann::json index{{"field", stem}, {"nx", f.grid()->nx()}, {"ny", f.grid()->ny()}, {"nphi", f.grid()->nphi()}};
    nlohmann::json modes = nlohmann::json::object();
    for (const auto& [m, coeff] : spec.modes) {
        const std::string file = stem + "_mode" + std::to_string(m) + ".tlf";
        write_binary(dir / file, to_raw(coeff));
        modes[std::to_string(m)] = file;
    }
    index["modes"] = modes;
    std::ofstream(dir / (stem + "_spectrum.json")) << index.dump(2) << "\n";
    return index;
}

}  // namespace thermolab::io
