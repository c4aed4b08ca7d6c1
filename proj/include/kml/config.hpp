#pragma once

// JSON run configuration.
//
//   {
//     "experiment": "concentrate",
//     "params":    {"a": 1, "b": 1, "p": 3, "N": 1},
//     "c":         5  |  [2, 5, 10]  |  {"geom": [1, 64, 7]},
//     "potential": {"kind": "harmonic", "omega": 1}   (zero | harmonic | power | tabulated)
//     "grid":      {"geometry": "line", "extent": 20, "n": 8001},
//     "flow":      {"step0": 1e6, "shrink": 0.5, "tol": 1e-8, "max_iter": 200000,
//                   "init": "gaussian" | "theory_profile", "width": 1, "allow_outside": false},
//     "output":    "results/conc",
//     "seed":      20240601,
//     "cache_dir": ".kml-cache"
//   }
//
// Experiment-specific keys: "t" (blowup), "floor", "limits" (concentrate),
// "cases" and "fields" (gn_check), "fault_injection" (verify),
// "magnitude" and "by_c" (theory_table trend checks).

#include "kml/error.hpp"
#include "kml/experiments.hpp"
#include "kml/potential.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace kml {

using json = nlohmann::json;

inline const std::vector<std::string>& experiment_names()
{
    static const std::vector<std::string> names = {"ground_state", "theory_table", "minimize", "sweep",     "concentrate",
                                                   "blowup",       "small_mass",   "verify",   "gn_check"};
    return names;
}

/// Defaults per experiment; they reproduce the reference runs.
inline json default_config(const std::string& experiment)
{
    json j = {{"experiment", experiment},
              {"params", {{"a", 1.0}, {"b", 1.0}, {"p", 3.0}, {"N", 1}}},
              {"c", 1.0},
              {"potential", {{"kind", "zero"}}},
              {"flow", json::object()},
              {"seed", 20240601},
              {"cache_dir", ""}};
    if (experiment == "theory_table") j["c"] = {{"geom", {1.0, 64.0, 7}}};
    if (experiment == "sweep") j["c"] = {1.0, 2.0, 5.0};
    if (experiment == "concentrate") {
        j["c"] = {2.0, 5.0, 10.0, 20.0, 50.0};
        j["potential"] = {{"kind", "harmonic"}, {"omega", 1.0}};
    }
    if (experiment == "small_mass") {
        j["c"] = {1.0, 0.5, 0.25, 0.1};
        j["potential"] = {{"kind", "harmonic"}, {"omega", 1.0}};
    }
    if (experiment == "blowup") {
        j["params"] = {{"a", 1.0}, {"b", 1.0}, {"p", 5.0}, {"N", 3}};
        j["potential"] = {{"kind", "harmonic"}, {"omega", 1.0}};
        j["t"] = {{"geom", {1.0, 256.0, 9}}};
        j["floor"] = -1e6;
    }
    return j;
}

inline std::vector<double> parse_values(const json& j, const char* what)
{
    std::vector<double> out;
    if (j.is_number()) {
        out.push_back(j.get<double>());
    } else if (j.is_array()) {
        for (const auto& v : j) {
            if (!v.is_number()) throw invalid_argument(std::string(what) + ": list entries must be numbers");
            out.push_back(v.get<double>());
        }
    } else if (j.is_object() && j.contains("geom")) {
        const auto& g = j["geom"];
        if (!g.is_array() || g.size() != 3) throw invalid_argument(std::string(what) + ": geom needs [start, stop, count]");
        out = geometric_sweep(g[0].get<double>(), g[1].get<double>(), g[2].get<int>());
    } else {
        throw invalid_argument(std::string(what) + ": expected a number, a list or {\"geom\": [start, stop, count]}");
    }
    if (out.empty()) throw invalid_argument(std::string(what) + ": no values");
    for (double v : out)
        if (!(v > 0.0) || !std::isfinite(v)) throw invalid_argument(std::string(what) + ": values must be positive");
    return out;
}

inline PotentialSpec parse_potential(const json& j, const std::filesystem::path& base_dir)
{
    const std::string kind = j.value("kind", "zero");
    if (kind == "zero") return PotentialSpec::zero();
    if (kind == "harmonic") return PotentialSpec::harmonic(j.value("omega", 1.0));
    if (kind == "power") return PotentialSpec::power(j.value("s", 2.0), j.value("kappa", 1.0));
    if (kind == "tabulated") {
        if (!j.contains("path")) throw invalid_argument("tabulated potential needs a path");
        std::filesystem::path p = j["path"].get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        if (!std::filesystem::exists(p)) throw invalid_argument("potential table not found: " + p.string());
        return PotentialSpec::from_file(p);
    }
    throw invalid_argument("unknown potential kind '" + kind + "'");
}

struct RunConfig {
    std::string experiment;
    ProblemParams params;
    std::vector<double> cs;
    PotentialSpec potential;
    std::optional<GridSpec> grid;
    FlowConfig flow;
    bool theory_init = false;
    std::string output;
    std::uint64_t seed = 20240601;
    std::filesystem::path cache_dir;
    json raw; ///< the merged configuration, echoed in the summary
};

inline RunConfig parse_config(const json& j, const std::filesystem::path& base_dir = ".")
{
    RunConfig rc;
    rc.raw = j;
    rc.experiment = j.value("experiment", "");
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), rc.experiment) == names.end())
        throw invalid_argument("unknown experiment '" + rc.experiment + "'");

    try {
        const json& P = j.at("params");
        rc.params.a = P.value("a", 1.0);
        rc.params.b = P.value("b", 1.0);
        rc.params.p = P.value("p", 3.0);
        rc.params.dim = P.value("N", 1);
        rc.cs = parse_values(j.at("c"), "c");
        rc.params.c = rc.cs.front();
        if (!(rc.params.a > 0.0) || !(rc.params.b > 0.0)) throw invalid_argument("params: a and b must be positive");
        if (rc.params.dim < 1 || rc.params.dim > 3) throw invalid_argument("params: N must be 1, 2 or 3");
        require_exponent(rc.params.dim, rc.params.p);

        rc.potential = parse_potential(j.value("potential", json::object()), base_dir);

        if (j.contains("grid") && !j["grid"].is_null()) {
            const json& G = j["grid"];
            GridSpec g;
            g.dim = rc.params.dim;
            g.geometry = geometry_from_string(G.value("geometry", rc.params.dim == 1 ? "line" : "radial"));
            g.extent = G.value("extent", 20.0);
            g.n = G.value("n", std::size_t{8001});
            Grid check(g); // validates
            rc.grid = g;
        }

        const json F = j.value("flow", json::object());
        rc.flow.step0 = F.value("step0", rc.flow.step0);
        rc.flow.shrink = F.value("shrink", rc.flow.shrink);
        rc.flow.tol = F.value("tol", rc.flow.tol);
        rc.flow.max_iter = F.value("max_iter", rc.flow.max_iter);
        rc.flow.grow_after = F.value("grow_after", rc.flow.grow_after);
        rc.flow.allow_outside = F.value("allow_outside", false);
        const std::string init = F.value("init", "gaussian");
        if (init == "gaussian") {
            // width 0 means: pick the theory length scale c/m_c when known
            rc.flow.init = GaussianInit{F.value("width", 0.0)};
        } else if (init == "theory_profile") {
            rc.theory_init = true;
        } else {
            throw invalid_argument("flow.init must be 'gaussian' or 'theory_profile'");
        }
        rc.flow.validate();

        rc.output = j.value("output", "");
        rc.seed = j.value("seed", std::uint64_t{20240601});
        rc.cache_dir = j.value("cache_dir", "");
    } catch (const json::exception& e) {
        throw invalid_argument(std::string("config: ") + e.what());
    }
    if (!rc.output.empty()) {
        const auto parent = std::filesystem::absolute(rc.output).parent_path();
        std::error_code ec;
        std::filesystem::create_directories(parent, ec);
        if (!std::filesystem::is_directory(parent)) throw invalid_argument("output directory not writable: " + parent.string());
    }
    return rc;
}

inline MinimizeSetup minimize_setup(const RunConfig& rc)
{
    MinimizeSetup s;
    s.params = rc.params;
    s.potential = rc.potential;
    s.grid = rc.grid;
    s.flow = rc.flow;
    s.theory_init = rc.theory_init;
    return s;
}

/// Dispatches to the experiment named in the config.
inline ExperimentResult run_experiment(const RunConfig& rc)
{
    GroundStateStore store(rc.cache_dir);
    const json& j = rc.raw;
    const std::string& e = rc.experiment;
    if (e == "ground_state") return run_ground_state(store, rc.params.dim, rc.params.p, rc.grid);
    if (e == "theory_table") {
        ProblemParams P = rc.params;
        P.qp_mass = store.get(P.dim, P.p)->mass();
        auto r = run_theory_table(P, rc.cs);
        if (rc.cs.back() >= j.value("by_c", 1e3) || j.contains("magnitude"))
            r.report.append(theory_trends(P, rc.cs, j.value("magnitude", 1e3), j.value("by_c", 1e3)));
        return r;
    }
    if (e == "minimize") return run_minimize(store, minimize_setup(rc));
    if (e == "sweep") return run_sweep(store, minimize_setup(rc), rc.cs);
    if (e == "concentrate") {
        ConcentrateSetup s;
        s.base = minimize_setup(rc);
        s.cs = rc.cs;
        if (j.contains("limits")) {
            const json& L = j["limits"];
            s.limits.dist_frac = L.value("dist_frac", s.limits.dist_frac);
            s.limits.ratio_tol = L.value("ratio_tol", s.limits.ratio_tol);
            s.limits.rho_scaled_tol = L.value("rho_scaled_tol", s.limits.rho_scaled_tol);
            s.limits.rho_mu_tol = L.value("rho_mu_tol", s.limits.rho_mu_tol);
            s.limits.g_tol = L.value("g_tol", s.limits.g_tol);
            s.limits.potential_frac = L.value("potential_frac", s.limits.potential_frac);
        }
        return run_concentrate(store, s);
    }
    if (e == "blowup") {
        BlowupSetup s;
        s.params = rc.params;
        s.potential = rc.potential;
        s.ts = parse_values(j.value("t", json{{"geom", {1.0, 256.0, 9}}}), "t");
        s.floor = j.value("floor", -1e6);
        s.A_tol = j.value("A_tol", 1e-3);
        return run_blowup(store, s);
    }
    if (e == "small_mass") {
        SmallMassSetup s;
        s.base = minimize_setup(rc);
        s.cs = rc.cs;
        return run_small_mass(store, s);
    }
    if (e == "verify") {
        VerifySetup s;
        s.a = rc.params.a;
        s.b = rc.params.b;
        s.seed = rc.seed;
        s.gn_fields = j.value("fields", 200);
        s.fault_injection = j.value("fault_injection", false);
        return run_verify(store, s);
    }
    if (e == "gn_check") {
        GnCheckSetup s;
        s.seed = rc.seed;
        s.fields = j.value("fields", 200);
        if (j.contains("cases")) {
            s.cases.clear();
            for (const auto& c : j["cases"]) s.cases.emplace_back(c.at(0).get<int>(), c.at(1).get<double>());
        }
        return run_gn_check(store, s);
    }
    throw invalid_argument("unknown experiment '" + e + "'");
}

inline json summary_json(const RunConfig& rc, const ExperimentResult& r)
{
    json s;
    s["experiment"] = rc.experiment;
    s["passed"] = r.report.all_passed();
    s["checks"] = json::array();
    for (const auto& c : r.report.checks)
        s["checks"].push_back(
            {{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"threshold", c.threshold}, {"detail", c.detail}});
    s["facts"] = json::object();
    for (const auto& [k, v] : r.facts) s["facts"][k] = v;
    s["notes"] = json::object();
    for (const auto& [k, v] : r.notes) s["notes"][k] = v;
    s["rows"] = r.table.rows.size();
    s["config"] = rc.raw;
    return s;
}

} // namespace kml
