#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <thermolab.hpp>

namespace fs = std::filesystem;
namespace sc = thermolab::scenario;
namespace io = thermolab::io;

#ifndef THERMOLAB_SCENARIO_DIR
#define THERMOLAB_SCENARIO_DIR "scenarios"
#endif

namespace {

constexpr int exit_failed = 1;
constexpr int exit_error = 2;

fs::path resolve_scenario(const std::string& arg, const fs::path& dir) {
    if (fs::exists(arg)) return arg;
    fs::path named = dir / (arg + ".json");
    if (fs::exists(named)) return named;
    throw sc::ScenarioError("no scenario '" + arg + "' (looked for " + arg + " and " + named.string() + ")");
}

struct Outcome {
    std::string name;
    std::vector<sc::RunRecord> records;
    std::string error;
};

Outcome run_one(const fs::path& path, const sc::RunOptions& opt) {
    Outcome o{path.stem().string(), {}, {}};
    try {
        auto s = sc::load(path);
        o.name = s.name;
        o.records = sc::run(s, opt);
    } catch (const std::exception& e) {
        o.error = e.what();
    }
    return o;
}

void emit(std::ostream& os, const std::vector<sc::RunRecord>& records, const std::string& format, bool header) {
    if (format == "csv") {
        if (header) os << sc::csv_header() << "\n";
        for (const auto& r : records) os << sc::to_csv(r) << "\n";
    } else {
        for (const auto& r : records) os << sc::to_json(r).dump() << "\n";
    }
}

void write_raw(const fs::path& out, const std::string& stem, const io::RawField& raw, const std::string& format) {
    fs::create_directories(out);
    const fs::path p = out / (stem + (format == "csv" ? ".csv" : ".tlf"));
    if (format == "csv") io::write_csv(p, raw);
    else io::write_binary(p, raw);
    std::cout << p.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"thermolab: numerical checks for thermostat flows on the unit tangent bundle of a flat torus chart"};
    app.require_subcommand(1);

    std::string scenario_dir = THERMOLAB_SCENARIO_DIR;
    app.add_option("--scenario-dir", scenario_dir, "Directory searched for named scenarios")->capture_default_str();

    std::vector<std::string> run_names;
    std::uint64_t seed = 0;
    std::string out_dir;
    std::string format = "json";
    bool parallel = false;
    auto* run = app.add_subcommand("run", "Run scenarios and print one record per checked quantity");
    run->add_option("scenario", run_names, "Scenario name or path")->required();
    auto* seed_opt = run->add_option("--seed", seed, "Override the scenario seed");
    run->add_option("--out-dir", out_dir, "Also write <name>.jsonl / <name>.csv here");
    run->add_option("--format", format, "Record format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
    run->add_flag("--parallel", parallel, "Run scenarios concurrently");

    std::string sweep_name;
    std::vector<int> grids = {16, 32, 64};
    auto* sweep = app.add_subcommand("sweep", "Convergence table (CSV) over resolutions");
    sweep->add_option("scenario", sweep_name, "Scenario name or path")->required();
    sweep->add_option("--grids", grids, "Resolutions n (nx = ny = nphi = n)")->delimiter(',')->capture_default_str();
    auto* sweep_seed = sweep->add_option("--seed", seed, "Override the scenario seed");
    sweep->add_option("--out-dir", out_dir, "Also write <name>_convergence.csv here");

    auto* list = app.add_subcommand("list-scenarios", "List scenarios in the scenario directory");

    std::string dump_name, member;
    int dump_n = 0;
    std::string dump_format = "bin";
    bool spectrum = false;
    auto* dump = app.add_subcommand("dump-field", "Write a scenario member field to disk");
    dump->add_option("scenario", dump_name, "Scenario name or path")->required();
    dump->add_option("--member", member,
                     "conf, curvature, A, theta, alpha, beta, mu, u, a, Va, lambda")
        ->required();
    dump->add_option("--grid", dump_n, "Resolution override");
    dump->add_option("--format", dump_format, "bin or csv")->check(CLI::IsMember({"bin", "csv"}))->capture_default_str();
    dump->add_flag("--spectrum", spectrum, "Bundle fields: one file per vertical mode plus a JSON index");
    dump->add_option("--out-dir", out_dir, "Output directory (default .)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            sc::RunOptions opt;
            if (*seed_opt) opt.seed = seed;
            std::vector<fs::path> paths;
            for (const auto& n : run_names) paths.push_back(resolve_scenario(n, scenario_dir));

            std::vector<Outcome> outcomes;
            if (parallel) {
                std::vector<std::future<Outcome>> jobs;
                for (const auto& p : paths) jobs.push_back(std::async(std::launch::async, run_one, p, opt));
                for (auto& j : jobs) outcomes.push_back(j.get());
            } else {
                for (const auto& p : paths) outcomes.push_back(run_one(p, opt));
            }

            bool failed = false, errored = false, header = true;
            for (const auto& o : outcomes) {
                if (!o.error.empty()) {
                    std::cerr << "error: " << o.error << "\n";
                    errored = true;
                    continue;
                }
                emit(std::cout, o.records, format, header);
                header = false;
                std::size_t passed = 0;
                for (const auto& r : o.records) passed += r.pass;
                failed = failed || passed != o.records.size();
                std::cerr << o.name << ": " << passed << "/" << o.records.size() << " pass\n";
                if (!out_dir.empty()) {
                    fs::create_directories(out_dir);
                    std::ofstream f(fs::path(out_dir) / (o.name + (format == "csv" ? ".csv" : ".jsonl")));
                    emit(f, o.records, format, true);
                }
            }
            return errored ? exit_error : failed ? exit_failed : 0;
        }

        if (*sweep) {
            sc::RunOptions opt;
            if (*sweep_seed) opt.seed = seed;
            auto s = sc::load(resolve_scenario(sweep_name, scenario_dir));
            const auto table = sc::convergence_table(s, grids, opt);
            std::cout << table;
            if (!out_dir.empty()) {
                fs::create_directories(out_dir);
                std::ofstream(fs::path(out_dir) / (s.name + "_convergence.csv")) << table;
            }
            return 0;
        }

        if (*list) {
            for (const auto& p : sc::list_scenarios(scenario_dir)) {
                try {
                    auto s = sc::load(p);
                    std::cout << s.name << "\t" << s.description << "\n";
                } catch (const std::exception& e) {
                    std::cout << p.stem().string() << "\t(invalid: " << e.what() << ")\n";
                }
            }
            return 0;
        }

        if (*dump) {
            auto s = sc::load(resolve_scenario(dump_name, scenario_dir));
            sc::GridSpec gs = dump_n > 0 ? s.grid.with_resolution(dump_n) : s.grid;
            sc::OpSpec none;
            sc::Context cx(s, none, gs, s.seed);
            const fs::path out = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
            const std::string fmt = dump_format == "csv" ? "csv" : "bin";
            const std::string stem = s.name + "_" + member;

            auto bundle = [&](const thermolab::FieldSM& f) {
                if (spectrum) {
                    io::write_spectrum(out, stem, f);
                    std::cout << (out / (stem + "_spectrum.json")).string() << "\n";
                } else {
                    write_raw(out, stem, io::to_raw(f), fmt);
                }
            };
            auto form = [&](const thermolab::OneForm& w) {
                write_raw(out, stem + "_cx", io::to_raw(w.cx()), fmt);
                write_raw(out, stem + "_cy", io::to_raw(w.cy()), fmt);
            };

            if (member == "conf") write_raw(out, stem, io::to_raw(cx.grid()->metric().conf()), fmt);
            else if (member == "curvature") write_raw(out, stem, io::to_raw(thermolab::gauss_curvature(cx.grid()->metric())), fmt);
            else if (member == "A") write_raw(out, stem, io::to_raw(cx.differential().coeff()), fmt);
            else if (member == "theta" || member == "alpha" || member == "beta") form(cx.one_form(member));
            else if (member == "mu") bundle(cx.mu());
            else if (member == "u") bundle(cx.u());
            else if (member == "a") bundle(cx.triple().a());
            else if (member == "Va") bundle(cx.triple().Va());
            else if (member == "lambda") bundle(cx.triple().lambda());
            else throw sc::ScenarioError("unknown member '" + member + "'");
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_error;
    }
    return 0;
}
