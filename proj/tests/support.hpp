#pragma once

#include <cmath>
#include <string>

#include "thermolab/circle_bundle.hpp"
#include "thermolab/surface.hpp"

namespace tl_test {

using namespace thermolab;

inline BaseMetric metric_named(const TorusChart& c, const std::string& name) {
    if (name == "flat") return BaseMetric::flat(c);
    if (name == "cosx") return BaseMetric(RealField::sample(c, [](double x, double) { return 0.1 * std::cos(x); }));
    if (name == "cosx_siny") {
        return BaseMetric(
            RealField::sample(c, [](double x, double y) { return 0.1 * std::cos(x) + 0.07 * std::sin(y); }));
    }
    throw std::invalid_argument("unknown test metric " + name);
}

inline GridPtr grid_named(const std::string& name, int n = 32, int nphi = 32) {
    return BundleGrid::create(metric_named(TorusChart(n, n), name), nphi);
}

inline double rel_gap(double a, double b) { return std::abs(a - b) / (std::abs(a) + std::abs(b) + 1e-300); }

}  // namespace tl_test
