// kml: command-line front end for the Kirchhoff minimization lab.
//
//   kml <subcommand> [--config FILE] [overrides...] [--out PREFIX]
//
// With --out (or "output" in the config) the table goes to PREFIX.csv and the
// summary to PREFIX.json; otherwise the CSV is printed on stdout and the JSON
// summary on stderr. Exit status: 0 success, 1 a check failed or the run
// aborted, 2 usage or configuration error.

#include "kml/config.hpp"
#include "kml/csv.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace {

struct Overrides {
    std::string config;
    std::optional<int> N;
    std::optional<double> p, a, b, c;
    std::string c_geom, c_list, potential, geometry, init, out, cache_dir, t_geom;
    std::optional<double> extent, tol, step0, floor, width;
    std::optional<std::size_t> n;
    std::optional<long> max_iter;
    std::optional<std::uint64_t> seed;
    std::optional<int> fields;
    bool allow_outside = false;
    bool fault_injection = false;
};

std::vector<double> split_numbers(const std::string& s, char sep)
{
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(kml::parse_decimal(item));
    return out;
}

kml::json geom_json(const std::string& spec, const char* flag)
{
    const auto v = split_numbers(spec, ':');
    if (v.size() != 3) throw kml::invalid_argument(std::string(flag) + " expects start:stop:count");
    return {{"geom", {v[0], v[1], static_cast<int>(v[2])}}};
}

kml::json potential_json(const std::string& spec)
{
    // zero | harmonic[:omega] | power:s[:kappa] | table:PATH
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (kind == "zero") return {{"kind", "zero"}};
    if (kind == "harmonic") return {{"kind", "harmonic"}, {"omega", rest.empty() ? 1.0 : kml::parse_decimal(rest)}};
    if (kind == "power") {
        const auto v = split_numbers(rest, ':');
        if (v.empty() || v.size() > 2) throw kml::invalid_argument("--potential power:s[:kappa]");
        return {{"kind", "power"}, {"s", v[0]}, {"kappa", v.size() > 1 ? v[1] : 1.0}};
    }
    if (kind == "table") return {{"kind", "tabulated"}, {"path", rest}};
    throw kml::invalid_argument("unknown --potential '" + spec + "'");
}

kml::json build_config(const std::string& experiment, const Overrides& o, std::filesystem::path& base_dir)
{
    kml::json j = kml::default_config(experiment);
    if (!o.config.empty()) {
        std::ifstream in(o.config);
        if (!in) throw kml::invalid_argument("cannot read config " + o.config);
        kml::json file;
        try {
            file = kml::json::parse(in);
        } catch (const kml::json::exception& e) {
            throw kml::invalid_argument("config " + o.config + ": " + e.what());
        }
        if (file.contains("experiment") && file["experiment"] != experiment)
            throw kml::invalid_argument("config is for experiment '" + file["experiment"].get<std::string>()
                                        + "', not '" + experiment + "'");
        j.merge_patch(file);
        base_dir = std::filesystem::path(o.config).parent_path();
        if (base_dir.empty()) base_dir = ".";
    }
    if (o.N) j["params"]["N"] = *o.N;
    if (o.p) j["params"]["p"] = *o.p;
    if (o.a) j["params"]["a"] = *o.a;
    if (o.b) j["params"]["b"] = *o.b;
    if (o.c) j["c"] = *o.c;
    if (!o.c_geom.empty()) j["c"] = geom_json(o.c_geom, "--c-geom");
    if (!o.c_list.empty()) j["c"] = split_numbers(o.c_list, ',');
    if (!o.potential.empty()) j["potential"] = potential_json(o.potential);
    if (!o.geometry.empty() || o.extent || o.n) {
        if (!j.contains("grid") || j["grid"].is_null()) j["grid"] = kml::json::object();
        if (!o.geometry.empty()) j["grid"]["geometry"] = o.geometry;
        if (o.extent) j["grid"]["extent"] = *o.extent;
        if (o.n) j["grid"]["n"] = *o.n;
    }
    if (o.tol) j["flow"]["tol"] = *o.tol;
    if (o.step0) j["flow"]["step0"] = *o.step0;
    if (o.max_iter) j["flow"]["max_iter"] = *o.max_iter;
    if (!o.init.empty()) j["flow"]["init"] = o.init;
    if (o.width) j["flow"]["width"] = *o.width;
    if (o.allow_outside) j["flow"]["allow_outside"] = true;
    if (!o.out.empty()) j["output"] = o.out;
    if (!o.cache_dir.empty()) j["cache_dir"] = o.cache_dir;
    if (o.seed) j["seed"] = *o.seed;
    if (o.fields) j["fields"] = *o.fields;
    if (!o.t_geom.empty()) j["t"] = geom_json(o.t_geom, "--t-geom");
    if (o.floor) j["floor"] = *o.floor;
    if (o.fault_injection) j["fault_injection"] = true;
    return j;
}

void add_common(CLI::App* sub, Overrides& o)
{
    sub->add_option("--config", o.config, "JSON configuration file");
    sub->add_option("--N", o.N, "spatial dimension (1, 2 or 3)");
    sub->add_option("--p", o.p, "nonlinearity exponent");
    sub->add_option("--a", o.a, "coefficient a > 0");
    sub->add_option("--b", o.b, "coefficient b > 0");
    sub->add_option("--c", o.c, "single mass");
    sub->add_option("--c-geom", o.c_geom, "geometric mass list start:stop:count");
    sub->add_option("--c-list", o.c_list, "comma-separated masses");
    sub->add_option("--potential", o.potential, "zero | harmonic[:omega] | power:s[:kappa] | table:PATH");
    sub->add_option("--geometry", o.geometry, "line | radial");
    sub->add_option("--extent", o.extent, "grid half-width or radius");
    sub->add_option("--n", o.n, "grid nodes");
    sub->add_option("--tol", o.tol, "flow tolerance");
    sub->add_option("--step0", o.step0, "flow initial step");
    sub->add_option("--max-iter", o.max_iter, "flow iteration cap");
    sub->add_option("--init", o.init, "gaussian | theory_profile");
    sub->add_option("--width", o.width, "Gaussian initial width (0 = theory scale)");
    sub->add_flag("--allow-outside", o.allow_outside, "run outside the existence region (flagged exploratory)");
    sub->add_option("--out", o.out, "output prefix for PREFIX.csv and PREFIX.json");
    sub->add_option("--cache-dir", o.cache_dir, "ground-state cache directory");
    sub->add_option("--seed", o.seed, "random seed");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Kirchhoff mass-constrained minimization lab"};
    app.require_subcommand(1);
    Overrides o;
    const std::vector<std::pair<std::string, std::string>> subs = {
        {"ground-state", "compute Q_p and its invariants"},
        {"theory-table", "closed-form m_c, i0, mu_c over a mass list"},
        {"minimize", "constrained minimization at one mass"},
        {"sweep", "continuation over an ascending mass list"},
        {"concentrate", "large-mass concentration study with a trapping potential"},
        {"blowup", "energy along the blow-up family u_t"},
        {"small-mass", "energies as the mass tends to zero"},
        {"verify", "full invariant suite"},
        {"gn-check", "sharp Gagliardo-Nirenberg fuzz test"},
    };
    for (const auto& [name, help] : subs) {
        auto* sub = app.add_subcommand(name, help);
        add_common(sub, o);
        if (name == "blowup") {
            sub->add_option("--t-geom", o.t_geom, "t values start:stop:count");
            sub->add_option("--floor", o.floor, "energy floor to reach at the largest t");
        }
        if (name == "verify") sub->add_flag("--fault-injection", o.fault_injection, "store a corrupted cache entry");
        if (name == "verify" || name == "gn-check") sub->add_option("--fields", o.fields, "random fields per case");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    std::string experiment = app.get_subcommands().front()->get_name();
    std::replace(experiment.begin(), experiment.end(), '-', '_');

    kml::RunConfig rc;
    try {
        std::filesystem::path base_dir = ".";
        rc = kml::parse_config(build_config(experiment, o, base_dir), base_dir);
    } catch (const std::exception& e) {
        std::cerr << "kml: " << e.what() << "\n";
        return 2;
    }

    kml::ExperimentResult result;
    try {
        result = kml::run_experiment(rc);
    } catch (const kml::invalid_argument& e) {
        std::cerr << "kml: " << e.what() << "\n";
        return 2;
    } catch (const kml::outside_existence_region& e) {
        std::cerr << "kml: " << e.what() << "\n";
        return 2;
    } catch (const kml::flow_diverged& e) {
        std::cerr << "kml: " << e.what() << " at iteration " << e.iteration << "; last iterate:\n";
        for (std::size_t i = 0; i < e.last_iterate.size(); ++i)
            std::cerr << e.last_iterate.grid().node(i) << "," << kml::to_decimal(e.last_iterate[i]) << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "kml: " << e.what() << "\n";
        return 1;
    }

    const auto summary = kml::summary_json(rc, result).dump(2);
    if (rc.output.empty()) {
        kml::write_csv(std::cout, result.table);
        std::cerr << summary << "\n";
    } else {
        std::ofstream csv(rc.output + ".csv"), js(rc.output + ".json");
        if (!csv || !js) {
            std::cerr << "kml: cannot write " << rc.output << ".{csv,json}\n";
            return 2;
        }
        kml::write_csv(csv, result.table);
        js << summary << "\n";
        for (const auto& c : result.report.checks)
            std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "  value=" << kml::to_decimal(c.value) << "\n";
    }
    return result.report.all_passed() ? 0 : 1;
}
