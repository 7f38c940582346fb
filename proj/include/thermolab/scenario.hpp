#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "thermolab/circle_bundle.hpp"
#include "thermolab/expression.hpp"
#include "thermolab/field_io.hpp"
#include "thermolab/pestov.hpp"
#include "thermolab/surface.hpp"
#include "thermolab/thermostat.hpp"
#include "thermolab/transport_weyl.hpp"

// Scenario files: a grid, a seed, member fields given by expression or data
// file, and a list of checks with tolerances. See docs/scenario-format.md.

namespace thermolab::scenario {

using nlohmann::json;

/// Invalid scenario content (schema, members, expressions).
class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GridSpec {
    int nx = 32, ny = 32, nphi = 32;
    double lx = two_pi, ly = two_pi;

    GridSpec with_resolution(int n) const {
        GridSpec g = *this;
        g.nx = g.ny = g.nphi = n;
        return g;
    }
};

enum class Expect { below, above, non_decreasing };

inline std::string to_string(Expect e) {
    switch (e) {
        case Expect::below: return "below";
        case Expect::above: return "above";
        case Expect::non_decreasing: return "non_decreasing";
    }
    return "?";
}

struct OpSpec {
    std::string op;
    double tol = 0.0;
    Expect expect = Expect::below;
    std::vector<int> grids;  ///< run at each resolution n (nx = ny = nphi = n) instead of the scenario grid
    json params = json::object();
    json members = json::object();  ///< per-op member overrides
};

struct Scenario {
    std::string name;
    std::string description;
    GridSpec grid;
    std::uint64_t seed = 1;
    json members = json::object();
    std::vector<OpSpec> ops;
    std::filesystem::path dir;  ///< base for relative data-file paths
};

struct RunRecord {
    std::string scenario;
    std::string op;
    std::string quantity;
    GridSpec grid;
    std::uint64_t seed = 0;
    double value = 0.0;
    double tol = 0.0;
    Expect expect = Expect::below;
    bool pass = false;
    double runtime_s = 0.0;
    json detail = json::object();
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k < std::min(byte, text.size()); ++k) {
        if (text[k] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

inline const std::vector<std::string>& known_ops() {
    static const std::vector<std::string> ops = {
        "commutator_residuals", "skew_adjointness", "codifferential_lift", "gauss_bonnet",
        "hodge_projection",     "wang_residual",    "vanishing_hypothesis", "projectivity_multipliers",
        "projectivity_defect",  "pestov_battery",   "pestov_identity",      "curvature_simplification",
        "twisted_dbar",              "twisted_dbar_sweep",    "integral_residual",    "weyl_transport",
        "thermostat_match",     "beltrami_pde",     "beltrami_chain",       "least_squares",
        "vanishing_chain"};
    return ops;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace detail

inline Scenario parse(const std::string& text, const std::string& origin = "<string>",
                      const std::filesystem::path& dir = ".") {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
        std::string what = e.what();
        if (auto cut = what.find(": "); cut != std::string::npos) what = what.substr(cut + 2);
        throw ScenarioError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what);
    }
    auto where = [&](const std::string& path) { return origin + ": " + path; };
    try {
        if (!j.is_object()) throw ScenarioError(where("top level must be an object"));
        Scenario s;
        s.dir = dir;
        if (!j.contains("name") || !j["name"].is_string()) throw ScenarioError(where("'name' (string) is required"));
        s.name = j["name"];
        s.description = detail::get_or<std::string>(j, "description", "");
        s.seed = detail::get_or<std::uint64_t>(j, "seed", 1);
        if (j.contains("grid")) {
            const auto& g = j["grid"];
            s.grid.nx = detail::get_or<int>(g, "nx", 32);
            s.grid.ny = detail::get_or<int>(g, "ny", s.grid.nx);
            s.grid.nphi = detail::get_or<int>(g, "nphi", s.grid.nx);
            s.grid.lx = detail::get_or<double>(g, "lx", two_pi);
            s.grid.ly = detail::get_or<double>(g, "ly", two_pi);
        }
        if (j.contains("members")) {
            if (!j["members"].is_object()) throw ScenarioError(where("'members' must be an object"));
            s.members = j["members"];
        }
        if (!j.contains("ops") || !j["ops"].is_array() || j["ops"].empty()) {
            throw ScenarioError(where("'ops' must be a non-empty array"));
        }
        for (std::size_t k = 0; k < j["ops"].size(); ++k) {
            const auto& o = j["ops"][k];
            const std::string at = "ops[" + std::to_string(k) + "]";
            if (!o.is_object() || !o.contains("op")) throw ScenarioError(where(at + " needs an 'op' name"));
            OpSpec op;
            op.op = o["op"];
            const auto& known = detail::known_ops();
            if (std::find(known.begin(), known.end(), op.op) == known.end()) {
                throw ScenarioError(where(at + ": unknown op '" + op.op + "'"));
            }
            if (!o.contains("tol") || !o["tol"].is_number()) throw ScenarioError(where(at + ": 'tol' (number) is required"));
            op.tol = o["tol"];
            if (!(op.tol > 0.0)) throw ScenarioError(where(at + ": 'tol' must be positive"));
            const auto ex = detail::get_or<std::string>(o, "expect", "below");
            if (ex == "below") op.expect = Expect::below;
            else if (ex == "above") op.expect = Expect::above;
            else if (ex == "non_decreasing") op.expect = Expect::non_decreasing;
            else throw ScenarioError(where(at + ": 'expect' must be below, above or non_decreasing"));
            if (o.contains("grids")) op.grids = o["grids"].get<std::vector<int>>();
            if (op.expect == Expect::non_decreasing && op.grids.size() < 2) {
                throw ScenarioError(where(at + ": non_decreasing needs at least two 'grids'"));
            }
            if (o.contains("params")) op.params = o["params"];
            if (o.contains("members")) op.members = o["members"];
            s.ops.push_back(std::move(op));
        }
        return s;
    } catch (const json::exception& e) {
        throw ScenarioError(where(std::string("schema error: ") + e.what()));
    }
}

inline Scenario load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ScenarioError("cannot open scenario file " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str(), path.string(), path.parent_path());
}

// ---------------------------------------------------------------------------
// Members

/// Builds member fields for one (scenario, op, grid).
class Context {
public:
    Context(const Scenario& s, const OpSpec& op, const GridSpec& g, std::uint64_t seed)
        : scenario_(s), members_(s.members), seed_(seed) {
        for (const auto& [k, v] : op.members.items()) members_[k] = v;
        TorusChart chart(g.nx, g.ny, g.lx, g.ly);
        try {
            grid_ = BundleGrid::create(metric_from(chart), g.nphi);
        } catch (const std::invalid_argument& e) {
            throw ScenarioError(s.name + ": invalid grid: " + e.what());
        }
    }

    const GridPtr& grid() const { return grid_; }
    const TorusChart& chart() const { return grid_->chart(); }
    std::uint64_t seed() const { return seed_; }
    bool has(const std::string& key) const { return members_.contains(key); }

    /// A field value: number, expression string, or {"file": path}.
    ComplexField planar(const json& v, const std::string& what) const { return planar_on(chart(), v, what); }

    RealField planar_real(const json& v, const std::string& what) const { return planar_real_on(chart(), v, what); }

    FieldSM bundle(const json& v, const std::string& what) const {
        if (v.is_string()) {
            const auto e = parse_expr(v.get<std::string>(), what);
            return FieldSM::sample(grid_, [&](double x, double y, double p) { return e(x, y, p); });
        }
        if (v.is_object() && v.contains("file")) {
            const auto raw = io::read_binary(resolve(v["file"]));
            if (raw.nphi == 1) return lift(grid_, io::planar_from_raw(raw, chart()));
            return io::bundle_from_raw(raw, grid_);
        }
        return lift(grid_, planar(v, what));
    }

    OneForm one_form(const std::string& key) const {
        if (!has(key)) return OneForm::zero(chart());
        const auto& m = members_.at(key);
        if (m.contains("exact")) return OneForm::exact(planar_real(m["exact"], key + ".exact"));
        return OneForm(planar_real(m.value("cx", json(0.0)), key + ".cx"), planar_real(m.value("cy", json(0.0)), key + ".cy"));
    }

    DifferentialM differential() const {
        if (!has("A")) return DifferentialM::zero(chart(), 3);
        const auto& m = members_.at("A");
        const int degree = m.value("degree", 3);
        try {
            return DifferentialM(degree, m.contains("coeff") ? planar(m["coeff"], "A.coeff") : ComplexField(chart()));
        } catch (const DomainError& e) {
            throw ScenarioError(scenario_.name + ": A: " + e.what());
        }
    }

    ThermostatTriple triple() const { return ThermostatTriple(grid_, differential(), one_form("theta")); }

    HatMetric ghat() const {
        const auto& m = require("ghat");
        if (m.contains("conformal")) {
            return HatMetric::conformal(grid_->metric().conf() + planar_real(m["conformal"], "ghat.conformal"),
                                        m.value("scale", 1.0));
        }
        if (m.contains("beltrami")) return hat_metric_from_beltrami(grid_->metric(), planar(m["beltrami"], "ghat.beltrami"));
        if (m.value("base", false)) return HatMetric::from(grid_->metric());
        return HatMetric(planar_real(m.at("g11"), "ghat.g11"), planar_real(m.value("g12", json(0.0)), "ghat.g12"),
                         planar_real(m.at("g22"), "ghat.g22"));
    }

    /// mu = mu_0 e^{-2 i phi} from "mu": {"base": value}.
    FieldSM mu() const {
        const auto& m = require("mu");
        return beltrami_from_base(grid_, planar(m.at("base"), "mu.base"));
    }

    ComplexField mu_base() const { return planar(require("mu").at("base"), "mu.base"); }

    FieldSM u() const { return bundle(require("u"), "u"); }

    const json& require(const std::string& key) const {
        if (!has(key)) throw ScenarioError(scenario_.name + ": member '" + key + "' is required by this op");
        return members_.at(key);
    }

private:
    BaseMetric metric_from(const TorusChart& chart) const {
        if (!members_.contains("metric")) return BaseMetric::flat(chart);
        const auto& m = members_.at("metric");
        auto conf = m.contains("conf") ? planar_real_on(chart, m["conf"], "metric.conf") : RealField(chart, 0.0);
        try {
            return BaseMetric(conf);
        } catch (const DomainError& e) {
            throw ScenarioError(scenario_.name + ": metric: " + e.what());
        }
    }

    ComplexField planar_on(const TorusChart& chart, const json& v, const std::string& what) const {
        if (v.is_number()) return ComplexField(chart, cplx(v.get<double>()));
        if (v.is_string()) {
            const auto e = parse_expr(v.get<std::string>(), what);
            if (e.uses_phi()) throw ScenarioError(scenario_.name + ": " + what + ": 'phi' is not allowed in a surface field");
            return ComplexField::sample(chart, [&](double x, double y) { return e(x, y); });
        }
        if (v.is_object() && v.contains("file")) {
            return io::planar_from_raw(io::read_binary(resolve(v["file"])), chart);
        }
        throw ScenarioError(scenario_.name + ": " + what + ": expected a number, an expression or {\"file\": ...}");
    }

    RealField planar_real_on(const TorusChart& chart, const json& v, const std::string& what) const {
        auto c = planar_on(chart, v, what);
        for (std::size_t k = 0; k < c.values().size(); ++k) {
            if (std::abs(c.values()[k].imag()) > 1e-12 * (1.0 + std::abs(c.values()[k]))) {
                throw ScenarioError(scenario_.name + ": " + what + " must be real (imaginary part at " +
                                    describe_point(chart, k) + ")");
            }
        }
        return real_part(c);
    }

    expr::Expression parse_expr(const std::string& text, const std::string& what) const {
        try {
            return expr::parse(text);
        } catch (const expr::ParseError& e) {
            throw ScenarioError(scenario_.name + ": " + what + ": " + e.what() + " in \"" + text + "\"");
        }
    }

    std::filesystem::path resolve(const json& file) const {
        std::filesystem::path p = file.get<std::string>();
        if (p.is_relative()) p = scenario_.dir / p;
        if (!std::filesystem::exists(p)) throw ScenarioError(scenario_.name + ": data file not found: " + p.string());
        return p;
    }

    const Scenario& scenario_;
    json members_;
    std::uint64_t seed_;
    GridPtr grid_;
};

// ---------------------------------------------------------------------------
// Ops

struct Measurement {
    std::string quantity;
    double value = 0.0;
    json detail = json::object();
};

namespace detail {

inline RealField random_surface(const Context& cx, int band, BandLimitedSampler& s, double amp = 1.0) {
    return random_planar_field(cx.chart(), band, s) * amp;
}

inline int battery_band(const Context& cx, const json& p) {
    return p.value("band", std::min({cx.chart().nx(), cx.chart().ny(), cx.grid()->nphi()}) / 8);
}

inline double sup(const FieldSM& f) { return max_abs(f); }

inline std::vector<Measurement> evaluate(const OpSpec& op, const Context& cx) {
    const auto& p = op.params;
    const auto& g = cx.grid();
    BandLimitedSampler smp(cx.seed());
    std::vector<Measurement> out;
    const std::string& name = op.op;

    if (name == "commutator_residuals") {
        auto r = commutator_residuals(g, p.value("count", 10), cx.seed(), p.value("band", -1));
        out.push_back({"vx_minus_h", r.vx_minus_h});
        out.push_back({"vh_plus_x", r.vh_plus_x});
        out.push_back({"xh_minus_kv", r.xh_minus_kv});
    } else if (name == "skew_adjointness") {
        double wx = 0, wh = 0, wv = 0;
        for (int n = 0; n < p.value("count", 5); ++n) {
            auto f = random_field(g, default_band(*g), smp), h = random_field(g, default_band(*g), smp);
            auto df = frame_derivatives(f), dh = frame_derivatives(h);
            const double sc = l2_norm(f) * l2_norm(h);
            wx = std::max(wx, std::abs(l2_inner(df.X, h) + l2_inner(f, dh.X)) / sc);
            wh = std::max(wh, std::abs(l2_inner(df.H, h) + l2_inner(f, dh.H)) / sc);
            wv = std::max(wv, std::abs(l2_inner(df.V, h) + l2_inner(f, dh.V)) / sc);
        }
        out.push_back({"X", wx});
        out.push_back({"H", wh});
        out.push_back({"V", wv});
    } else if (name == "codifferential_lift") {
        const int band = battery_band(cx, p);
        OneForm th(random_surface(cx, band, smp), random_surface(cx, band, smp));
        auto t = lift(g, th);
        auto base = lift(g, codifferential(g->metric(), th));
        out.push_back({"relative_error", l2_norm(-(op_X(t) + op_H(op_V(t))) - base) / l2_norm(base)});
    } else if (name == "gauss_bonnet") {
        const auto& m = g->metric();
        out.push_back({"integral", std::abs(integrate_flat(gauss_curvature(m) * m.area_density()))});
    } else if (name == "hodge_projection") {
        double div = 0, iso = 0;
        const int band = battery_band(cx, p);
        for (int n = 0; n < p.value("draws", 5); ++n) {
            OneForm beta(random_surface(cx, band, smp), random_surface(cx, band, smp));
            auto pr = hodge_project_divfree(g->metric(), beta);
            auto d = codifferential(g->metric(), pr.form);
            div = std::max(div, std::sqrt(l2_inner_function(g->metric(), d, d)));
            auto b = lift(g, beta);
            iso = std::max(iso, relative_gap(real_inner(b, b), real_inner(op_V(b), op_V(b))));
        }
        out.push_back({"divergence", div});
        out.push_back({"isometry_gap", iso});
    } else if (name == "wang_residual") {
        out.push_back({"sup", max_abs(wang_residual(g->metric(), cx.differential()))});
    } else if (name == "vanishing_hypothesis") {
        auto h = vanishing_hypothesis(cx.triple());
        out.push_back({"curvature_sup", h.curvature_sup()});
        out.push_back({"dbar_sup", max_abs(h.dbar)});
    } else if (name == "projectivity_multipliers") {
        // residual relative to the size of the three terms of the operator on mode m
        for (int m = 0; m <= p.value("max_mode", 3); ++m) {
            auto f = FieldSM::sample(g, [m](double x, double y, double ph) {
                return (1.0 + 0.5 * std::sin(x) * std::cos(y)) * std::cos(m * ph);
            });
            const double mult = projectivity_multiplier(m);
            const double scale = 1.5 + 5.0 * m * m / 3.0 + std::pow(m, 4) / 6.0;
            out.push_back({"mode_" + std::to_string(m), max_abs(projectivity_operator(f) - f * mult) / (scale * max_abs(f)),
                           {{"multiplier", mult}}});
        }
    } else if (name == "projectivity_defect") {
        auto t = cx.triple();
        auto lam = t.lambda();
        if (p.value("contaminate", 0.0) != 0.0) lam = lam + random_modal_field(g, {2}, 4, smp) * p["contaminate"].get<double>();
        auto r = projectivity_defect(lam);
        json modes = json::object();
        for (const auto& [m, e] : r.modes) modes[std::to_string(m)] = {{"energy", e.energy}, {"multiplier", e.multiplier}};
        out.push_back({"relative_defect", r.relative_defect, {{"modes", modes}}});
    } else if (name == "pestov_battery" || name == "pestov_identity") {
        const int band = battery_band(cx, p);
        const int draws = name == "pestov_identity" ? 1 : p.value("draws", 20);
        const std::string lam_kind = p.value("lambda", std::string("triple"));
        const std::string c_kind = p.value("c", std::string("random"));
        for (int n = 0; n < draws; ++n) {
            auto base = cx.triple();
            ThermostatTriple t = base;
            if (lam_kind == "zero") {
                t = ThermostatTriple::geodesic(g, base.degree());
            } else if (lam_kind == "random") {
                // lambda in H_{+-1} + H_{+-3}: a random cubic differential and a random one-form
                ComplexField f(cx.chart());
                auto re = random_surface(cx, band, smp), im = random_surface(cx, band, smp);
                for (std::size_t b = 0; b < f.values().size(); ++b) f.values()[b] = cplx(re.values()[b], im.values()[b]);
                t = ThermostatTriple(g, DifferentialM(3, f), OneForm(random_surface(cx, band, smp), random_surface(cx, band, smp)));
            } else if (lam_kind != "triple") {
                throw ScenarioError("pestov: params.lambda must be zero, triple or random");
            }
            FieldSM c(g);
            if (c_kind == "canonical") c = canonical_c(t);
            else if (c_kind == "random") c = random_field(g, band, smp);
            else if (c_kind != "zero") throw ScenarioError("pestov: params.c must be zero, canonical or random");
            FieldSM u = cx.has("u") && name == "pestov_identity" ? cx.u() : random_field(g, band, smp);
            auto r = pestov_identity_gap(t, u, c);
            out.push_back({draws == 1 ? std::string("gap") : "gap[" + std::to_string(n) + "]", r.gap,
                           {{"lhs", r.lhs}, {"rhs", r.rhs}, {"fu_sq", r.fu_sq}, {"hcu_sq", r.hcu_sq}, {"curvature", r.curvature}}});
        }
    } else if (name == "curvature_simplification") {
        out.push_back({"sup_gap", curvature_term_simplification(cx.triple()).gap});
    } else if (name == "twisted_dbar") {
        auto r = twisted_dbar_check(cx.triple());
        out.push_back({"bundle_residual", r.sm_residual});
        out.push_back({"chart_residual", r.chart_residual});
    } else if (name == "twisted_dbar_sweep") {
        auto s = cx.planar_real(p.value("s", json("0.3*cos(y)")), "params.s");
        auto eps = p.value("eps", std::vector<double>{-1e-1, -1e-2, -1e-3, 0.0, 1e-3, 1e-2, 1e-1});
        auto r = twisted_dbar_sweep(g, p.value("degree", 3), s, eps);
        json pts = json::array();
        double at_zero = 0.0;
        for (const auto& q : r.points) {
            pts.push_back({{"eps", q.eps}, {"bundle", q.sm_residual}, {"chart", q.chart_residual}});
            if (q.eps == 0.0) at_zero = std::max(q.sm_residual, q.chart_residual);
        }
        out.push_back({"slope_mismatch", std::abs(r.sm_slope - r.chart_slope) / std::abs(r.chart_slope),
                       {{"bundle_slope", r.sm_slope}, {"chart_slope", r.chart_slope}, {"points", pts}}});
        out.push_back({"residual_at_zero", at_zero});
    } else if (name == "integral_residual") {
        out.push_back({"relative", integral_residual(cx.triple(), cx.ghat())});
    } else if (name == "weyl_transport") {
        auto t = cx.triple();
        FieldSM r = cx.has("ghat") ? weyl_transport_residual(t, cx.ghat(), cx.one_form("alpha"))
                                   : weyl_transport_residual(t, cx.u(), lift(g, cx.one_form("beta")));
        out.push_back({"sup", sup(r)});
    } else if (name == "thermostat_match") {
        auto t = cx.triple();
        auto gh = cx.ghat();
        auto f = pqr(g, gh);
        auto alpha = lift(g, cx.one_form("alpha"));
        auto match = thermostat_match_residual(t, weyl_lambda_pullback(f, alpha), f);
        out.push_back({"sup", sup(match)});
        out.push_back({"agreement_with_transport", sup(match - weyl_transport_residual(t, gh, cx.one_form("alpha")))});
    } else if (name == "beltrami_pde") {
        out.push_back({"sup", sup(beltrami_pde_residual(cx.triple(), cx.mu()))});
    } else if (name == "beltrami_chain") {
        auto t = cx.triple();
        auto r = beltrami_chain_check(t, cx.mu(), hat_metric_from_beltrami(g->metric(), cx.mu_base()));
        out.push_back({"relative_leakage", r.relative_leakage, {{"absolute", r.leakage}}});
        out.push_back({"h_identity", r.h_identity});
        out.push_back({"formula_gap", r.formula_gap});
    } else if (name == "least_squares") {
        auto t = cx.triple();
        const std::string rhs_kind = p.value("rhs", std::string("Va"));
        FieldSM rhs(g);
        if (rhs_kind == "Va") rhs = t.Va();
        else if (rhs_kind == "Fu") rhs = t.apply(cx.u());
        else if (rhs_kind == "beta") rhs = lift(g, cx.one_form("beta"));
        else throw ScenarioError("least_squares: params.rhs must be Va, Fu or beta");
        LeastSquaresOptions o;
        o.max_iterations = p.value("max_iterations", o.max_iterations);
        o.band = p.value("band", o.band);
        auto r = least_squares_transport(t, rhs, o);
        out.push_back({"relative_residual", r.residual,
                       {{"iterations", r.iterations}, {"converged", r.converged}, {"band", o.band > 0 ? o.band : default_band(*g)}}});
    } else if (name == "vanishing_chain") {
        auto t = cx.triple();
        auto r = vanishing_chain_check(t, cx.has("u") ? cx.u() : FieldSM(g), cx.one_form("beta"));
        json ids = json::array();
        for (const auto& i : r.identities)
            ids.push_back({{"name", i.name}, {"lhs", i.lhs}, {"rhs", i.rhs}, {"gap", i.gap}, {"exact", i.exact}});
        out.push_back({"max_exact_gap", r.max_exact_gap(), {{"tau", r.tau}, {"identities", ids}}});
        out.push_back({"max_transport_gap", r.max_transport_gap(), {{"tau", r.tau}}});
    } else {
        throw ScenarioError("op '" + name + "' is not implemented");
    }
    if (p.contains("quantity")) {
        // keep only the named quantities
        std::vector<std::string> keep = p["quantity"].is_array() ? p["quantity"].get<std::vector<std::string>>()
                                                                 : std::vector<std::string>{p["quantity"].get<std::string>()};
        std::vector<Measurement> kept;
        for (auto& m : out)
            if (std::find(keep.begin(), keep.end(), m.quantity) != keep.end()) kept.push_back(std::move(m));
        if (kept.size() != keep.size()) throw ScenarioError("op '" + name + "': params.quantity names an unknown quantity");
        out = std::move(kept);
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Running

struct RunOptions {
    std::optional<std::uint64_t> seed;
    std::optional<int> resolution;  ///< overrides the scenario grid and per-op grids
};

inline std::vector<RunRecord> run(const Scenario& s, const RunOptions& opt = {}) {
    std::vector<RunRecord> records;
    const std::uint64_t seed = opt.seed.value_or(s.seed);
    for (std::size_t k = 0; k < s.ops.size(); ++k) {
        const auto& op = s.ops[k];
        std::vector<GridSpec> grids;
        if (opt.resolution) grids.push_back(s.grid.with_resolution(*opt.resolution));
        else if (op.grids.empty()) grids.push_back(s.grid);
        else
            for (int n : op.grids) grids.push_back(s.grid.with_resolution(n));

        std::map<std::string, double> previous;  // for non_decreasing
        for (const auto& gs : grids) {
            const auto t0 = std::chrono::steady_clock::now();
            const std::uint64_t op_seed = seed * 1000003ULL + k;
            std::vector<Measurement> ms;
            try {
                Context cx(s, op, gs, op_seed);
                ms = detail::evaluate(op, cx);
            } catch (const ScenarioError&) {
                throw;
            } catch (const std::exception& e) {
                throw ScenarioError(s.name + ": op '" + op.op + "' failed: " + e.what());
            }
            const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            for (auto& m : ms) {
                RunRecord r{s.name, op.op, m.quantity, gs, seed, m.value, op.tol, op.expect, false, dt / ms.size(), m.detail};
                switch (op.expect) {
                    case Expect::below: r.pass = m.value < op.tol; break;
                    case Expect::above: r.pass = m.value > op.tol; break;
                    case Expect::non_decreasing: {
                        // above the floor, and no lower than the previous resolution (up to roundoff)
                        r.pass = m.value > op.tol;
                        if (auto it = previous.find(m.quantity); it != previous.end()) {
                            r.pass = r.pass && m.value >= it->second * (1.0 - 1e-8);
                            r.detail["previous"] = it->second;
                        }
                        previous[m.quantity] = m.value;
                        break;
                    }
                }
                if (!std::isfinite(m.value)) r.pass = false;
                records.push_back(std::move(r));
            }
        }
    }
    return records;
}

inline json to_json(const RunRecord& r) {
    json j{{"scenario", r.scenario},
           {"op", r.op},
           {"quantity", r.quantity},
           {"grid", {{"nx", r.grid.nx}, {"ny", r.grid.ny}, {"nphi", r.grid.nphi}}},
           {"seed", r.seed},
           {"value", r.value},
           {"tol", r.tol},
           {"expect", to_string(r.expect)},
           {"pass", r.pass},
           {"runtime_s", r.runtime_s}};
    if (!r.detail.empty()) j["detail"] = r.detail;
    return j;
}

inline std::string csv_header() { return "scenario,op,quantity,nx,ny,nphi,seed,value,tol,expect,pass,runtime_s"; }

inline std::string to_csv(const RunRecord& r) {
    // shortest round-trip form for doubles
    auto num = [](double v) { return json(v).dump(); };
    std::ostringstream os;
    os << r.scenario << "," << r.op << "," << r.quantity << "," << r.grid.nx << "," << r.grid.ny << "," << r.grid.nphi
       << "," << r.seed << "," << num(r.value) << "," << num(r.tol) << "," << to_string(r.expect) << ","
       << (r.pass ? "true" : "false") << "," << num(r.runtime_s);
    return os.str();
}

/// One row per (op, quantity, resolution) with the observed decay order
/// log(v_prev / v) / log(n / n_prev) against the previous resolution.
inline std::string convergence_table(const Scenario& s, const std::vector<int>& resolutions, const RunOptions& base = {}) {
    std::map<std::pair<std::string, std::string>, std::vector<std::pair<int, double>>> series;
    std::vector<std::pair<std::string, std::string>> order;
    for (int n : resolutions) {
        RunOptions o = base;
        o.resolution = n;
        for (const auto& r : run(s, o)) {
            auto key = std::make_pair(r.op, r.quantity);
            if (!series.contains(key)) order.push_back(key);
            series[key].push_back({n, r.value});
        }
    }
    std::ostringstream os;
    os << std::setprecision(10) << "scenario,op,quantity,n,value,observed_order\n";
    for (const auto& key : order) {
        const auto& pts = series[key];
        for (std::size_t k = 0; k < pts.size(); ++k) {
            os << s.name << "," << key.first << "," << key.second << "," << pts[k].first << "," << pts[k].second << ",";
            if (k > 0 && pts[k].second > 0.0 && pts[k - 1].second > 0.0) {
                os << std::log(pts[k - 1].second / pts[k].second) /
                          std::log(static_cast<double>(pts[k].first) / pts[k - 1].first);
            }
            os << "\n";
        }
    }
    return os.str();
}

/// Scenario files (*.json) in a directory, sorted by name.
inline std::vector<std::filesystem::path> list_scenarios(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> out;
    if (!std::filesystem::is_directory(dir)) return out;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.path().extension() == ".json") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace thermolab::scenario
