#pragma once

// Experiment drivers behind the command-line tool. Each returns a Table
// (written as CSV), a list of pass/fail checks with measured values, and a
// few scalar facts for the JSON summary.

#include "kml/cache.hpp"
#include "kml/csv.hpp"
#include "kml/energy.hpp"
#include "kml/error.hpp"
#include "kml/flow.hpp"
#include "kml/grid.hpp"
#include "kml/ground_state.hpp"
#include "kml/potential.hpp"
#include "kml/theory.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace kml {

struct Check {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct Report {
    std::vector<Check> checks;

    Check& add(std::string name, bool passed, double value, double threshold, std::string detail = {})
    {
        checks.push_back({std::move(name), passed, value, threshold, std::move(detail)});
        return checks.back();
    }
    bool all_passed() const
    {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
    }
    void append(const Report& other) { checks.insert(checks.end(), other.checks.begin(), other.checks.end()); }
};

struct ExperimentResult {
    Table table;
    Report report;
    std::map<std::string, double> facts;
    std::map<std::string, std::string> notes;
};

/// Ground states keyed by (N, p, grid), backed by an optional cache directory.
class GroundStateStore {
public:
    explicit GroundStateStore(std::filesystem::path dir = {}) : dir_(std::move(dir)) {}

    std::shared_ptr<const GroundState> get(int N, double p, std::optional<GridSpec> spec = std::nullopt)
    {
        const GridSpec s = spec.value_or(default_qp_grid(N, p));
        const std::string key = cache_file_name(N, p, s);
        std::lock_guard lock(mutex_);
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
        auto gs = std::make_shared<const GroundState>(ground_state_cached(N, p, s, dir_));
        memo_.emplace(key, gs);
        return gs;
    }

private:
    std::filesystem::path dir_;
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const GroundState>> memo_;
};

/// Grid for a minimization when none is configured. Without a potential the
/// minimizer is Q_p stretched by c/m_c, so the extent follows that scale;
/// with a trapping potential [-20, 20] (or radius 20) is ample.
inline GridSpec auto_grid(const ProblemParams& P, bool potential_is_zero)
{
    GridSpec g;
    g.dim = P.dim;
    g.geometry = P.dim == 1 ? Geometry::line : Geometry::radial;
    g.n = 8001;
    g.extent = 20.0;
    if (potential_is_zero) {
        const auto region = existence_region(P);
        if (region.in_T) {
            const double m = solve_mc(P).m;
            const double decay = qp_scaling(P.dim, P.p).stretch() * m / P.c;
            g.extent = std::max(20.0, 30.0 / decay);
        } else {
            g.extent = 400.0; // no minimizer: the infimum is approached by spreading
        }
    }
    return g;
}

inline GaussianInit scaled_gaussian(const ProblemParams& P, bool potential_is_zero)
{
    if (!potential_is_zero) return {};
    const auto region = existence_region(P);
    if (!region.in_T) return {};
    return {std::max(1.0, P.c / solve_mc(P).m)};
}

// ---------------------------------------------------------------- theory

inline ExperimentResult run_theory_table(const ProblemParams& base, const std::vector<double>& cs)
{
    ExperimentResult r;
    r.table.experiment = "theory_table";
    r.table.columns = {"c", "m_c", "i0", "mu_c", "in_T", "at_threshold", "eq_residual", "regime"};
    double worst = 0.0;
    for (double c : cs) {
        const auto P = base.with_mass(c);
        const auto t = predict(P);
        r.table.add({c, t.m_c, t.i0, t.mu_c, t.in_T, t.at_threshold, t.residual, to_string(t.regime)});
        worst = std::max(worst, t.residual);
    }
    r.report.add("m_c equation residual", worst < 1e-10, worst, 1e-10);
    r.facts["c_star"] = c_star(base.with_mass(cs.front()));
    r.notes["regime"] = to_string(classify(base.dim, base.p));
    return r;
}

/// Monotone-trend checks over a sampled c list: i0/c^2 strictly decreasing
/// above c_*, and i0, m_c, mu_c diverging (strictly monotone, with magnitude
/// above `magnitude` once c reaches `by_c`).
inline Report theory_trends(const ProblemParams& base, const std::vector<double>& cs, double magnitude = 1e3,
                            double by_c = 1e3)
{
    Report rep;
    const double cstar = c_star(base.with_mass(cs.front()));
    std::vector<double> c_used, ratio, i0, m, mu;
    for (double c : cs) {
        if (c <= cstar) continue;
        const auto t = predict(base.with_mass(c));
        c_used.push_back(c);
        ratio.push_back(t.i0 / (c * c));
        i0.push_back(t.i0);
        m.push_back(t.m_c);
        mu.push_back(t.mu_c);
    }
    auto strictly = [](const std::vector<double>& v, int sign) {
        for (std::size_t k = 1; k < v.size(); ++k)
            if (!(sign * (v[k] - v[k - 1]) > 0.0)) return false;
        return v.size() >= 2;
    };
    rep.add("i0/c^2 strictly decreasing", strictly(ratio, -1), ratio.empty() ? 0.0 : ratio.back(), 0.0);
    double at = 0.0;
    bool reached = false;
    for (std::size_t k = 0; k < c_used.size(); ++k)
        if (c_used[k] <= by_c * (1 + 1e-12)) {
            at = c_used[k];
            reached = true;
        }
    auto last_at = [&](const std::vector<double>& v) {
        for (std::size_t k = c_used.size(); k-- > 0;)
            if (c_used[k] <= by_c * (1 + 1e-12)) return v[k];
        return 0.0;
    };
    const bool covers = reached && at >= by_c * (1 - 1e-12);
    const std::string where = "magnitude at c=" + to_decimal(at);
    rep.add("i0 -> -inf", strictly(i0, -1) && covers && -last_at(i0) > magnitude, last_at(i0), -magnitude, where);
    rep.add("m_c -> +inf", strictly(m, +1) && covers && last_at(m) > magnitude, last_at(m), magnitude, where);
    rep.add("mu_c -> -inf", strictly(mu, -1) && covers && -last_at(mu) > magnitude, last_at(mu), -magnitude, where);
    return rep;
}

// ---------------------------------------------------------------- ground state

/// Closed-form N = 1 ground state (p(p+2)/8)^{1/(p-2)} sech^{2/(p-2)}(sqrt((p+2)(p-2)) x / 2).
inline double closed_form_q1(double p, double x)
{
    const double amp = std::pow(p * (p + 2.0) / 8.0, 1.0 / (p - 2.0));
    return amp * std::pow(1.0 / std::cosh(std::sqrt((p + 2.0) * (p - 2.0)) * x / 2.0), 2.0 / (p - 2.0));
}

inline double closed_form_error(const GroundState& gs)
{
    double err = 0.0;
    for (std::size_t i = 0; i < gs.profile.size(); ++i)
        err = std::max(err, std::abs(gs.profile[i] - closed_form_q1(gs.exponent, gs.grid().node(i))));
    return err;
}

inline ExperimentResult run_ground_state(GroundStateStore& store, int N, double p, std::optional<GridSpec> spec)
{
    ExperimentResult r;
    r.table.experiment = "ground_state";
    r.table.columns = {"x", "Q"};
    auto gs = store.get(N, p, spec);
    const Grid& g = gs->grid();
    for (std::size_t i = 0; i < g.size(); ++i) r.table.add({g.node(i), gs->profile[i]});
    r.report.add("Pohozaev kinetic", gs->kinetic_defect() < 1e-4, gs->kinetic_defect(), 1e-4);
    r.report.add("Pohozaev p-norm", gs->pnorm_defect() < 1e-4, gs->pnorm_defect(), 1e-4);
    const double ratio = gn_ratio(gs->profile, *gs);
    r.report.add("gn_ratio(Q_p) = 1", std::abs(ratio - 1.0) < 1e-4, ratio, 1.0);
    if (N == 1 && g.geometry() == Geometry::line) {
        const double err = closed_form_error(*gs);
        r.report.add("closed form max node error", err < 1e-6, err, 1e-6);
    }
    r.facts["mass"] = gs->mass();
    r.facts["mass_sq"] = gs->mass_sq;
    r.facts["kinetic"] = gs->kinetic;
    r.facts["pnorm"] = gs->pnorm;
    r.facts["gn_constant"] = gn_constant(*gs);
    r.facts["extent"] = g.extent();
    r.facts["n"] = static_cast<double>(g.size());
    return r;
}

// ---------------------------------------------------------------- minimize / sweep

struct MinimizeSetup {
    ProblemParams params;
    PotentialSpec potential;
    std::optional<GridSpec> grid;
    FlowConfig flow;
    bool theory_init = false;
};

inline std::pair<GridPtr, std::optional<Field>> prepare(const MinimizeSetup& s, double c)
{
    const bool vzero = s.potential.is_zero();
    auto grid = make_grid(s.grid.value_or(auto_grid(s.params.with_mass(c), vzero)));
    std::optional<Field> V;
    if (!vzero) V = potential_field(grid, s.potential);
    return {grid, V};
}

inline FlowConfig flow_for(const MinimizeSetup& s, double c, const GroundState* gs)
{
    FlowConfig f = s.flow;
    if (s.theory_init && gs && s.potential.is_zero())
        f.init = TheoryProfileInit{gs};
    else if (std::holds_alternative<GaussianInit>(f.init) && std::get<GaussianInit>(f.init).width <= 0.0)
        f.init = scaled_gaussian(s.params.with_mass(c), s.potential.is_zero() && !f.allow_outside);
    return f;
}

inline void add_flow_checks(Report& rep, const MinimizerResult& m, const ProblemParams& P, bool vzero,
                            const std::string& tag)
{
    rep.add(tag + "converged", m.converged, m.proj_grad_norm, m.converged ? m.proj_grad_norm : 0.0,
            m.stalled ? "stalled" : "");
    const double mass_err = std::abs(l2_norm(m.u) / P.c - 1.0);
    rep.add(tag + "mass constraint", mass_err < 1e-10, mass_err, 1e-10);
    bool mono = true;
    for (std::size_t k = 1; k < m.energies.size(); ++k)
        mono = mono && m.energies[k] <= m.energies[k - 1] + 1e-12 * std::abs(m.energies[k - 1]);
    rep.add(tag + "energy monotone", mono, m.energies.empty() ? 0.0 : m.energies.back(), 0.0);
    rep.add(tag + "single signed", m.single_signed, 0.0, 1e-8);
    rep.add(tag + "boundary negligible", m.boundary_ratio < 1e-10, m.boundary_ratio, 1e-10);
    if (vzero && !m.exploratory) {
        const double poh = pohozaev_residual(m.breakdown, P);
        rep.add(tag + "Pohozaev residual", poh < 1e-2, poh, 1e-2);
    }
}

inline ExperimentResult run_minimize(GroundStateStore& store, const MinimizeSetup& s)
{
    const auto& P = s.params;
    auto gs = store.get(P.dim, P.p);
    ProblemParams Pq = P;
    Pq.qp_mass = gs->mass();
    MinimizeSetup local = s;
    local.params = Pq;
    auto [grid, V] = prepare(local, P.c);
    auto m = minimize(grid, Pq, V ? &*V : nullptr, flow_for(local, P.c, gs.get()));

    ExperimentResult r;
    r.table.experiment = "minimize";
    r.table.columns = {"x", "u"};
    for (std::size_t i = 0; i < grid->size(); ++i) r.table.add({grid->node(i), m.u[i]});
    const bool vzero = s.potential.is_zero();
    add_flow_checks(r.report, m, Pq, vzero, "");
    r.facts["c"] = P.c;
    r.facts["energy"] = m.breakdown.total;
    r.facts["kinetic_a"] = m.breakdown.kinetic_a;
    r.facts["kirchhoff_b"] = m.breakdown.kirchhoff_b;
    r.facts["potential"] = m.breakdown.potential;
    r.facts["nonlinear"] = m.breakdown.nonlinear;
    r.facts["grad_norm_sq"] = m.breakdown.g;
    r.facts["multiplier"] = m.multiplier;
    r.facts["proj_grad_norm"] = m.proj_grad_norm;
    r.facts["iterations"] = static_cast<double>(m.iterations);
    r.facts["grid_extent"] = grid->extent();
    r.facts["boundary_ratio"] = m.boundary_ratio;
    r.notes["flags"] = std::string(m.exploratory ? "exploratory " : "") + (m.near_threshold ? "near_threshold " : "")
        + (m.stalled ? "stalled" : "");
    if (vzero && existence_region(Pq).in_T) {
        const auto t = predict(Pq);
        r.facts["theory_i0"] = t.i0;
        r.facts["theory_m_c"] = t.m_c;
        r.facts["theory_mu_c"] = t.mu_c;
    }
    return r;
}

inline ExperimentResult run_sweep(GroundStateStore& store, const MinimizeSetup& s, const std::vector<double>& cs)
{
    auto gs = store.get(s.params.dim, s.params.p);
    ProblemParams P = s.params;
    P.qp_mass = gs->mass();
    MinimizeSetup local = s;
    local.params = P;
    const bool vzero = s.potential.is_zero();
    // One grid for the whole continuation, sized for the largest stretch.
    GridSpec spec = s.grid.value_or(auto_grid(P.with_mass(cs.front()), vzero));
    if (!s.grid)
        for (double c : cs) spec.extent = std::max(spec.extent, auto_grid(P.with_mass(c), vzero).extent);
    auto grid = make_grid(spec);
    std::optional<Field> V;
    if (!vzero) V = potential_field(grid, s.potential);
    auto res = continuation_sweep(grid, P, V ? &*V : nullptr, cs, flow_for(local, cs.front(), gs.get()));

    ExperimentResult r;
    r.table.experiment = "sweep";
    r.table.columns = {"c", "energy", "grad_norm_sq", "multiplier", "proj_grad_norm", "iterations", "converged",
                       "theory_i0", "theory_m_c", "theory_mu_c", "error"};
    for (const auto& m : res) {
        double ti0 = NAN, tm = NAN, tmu = NAN;
        if (vzero && existence_region(P.with_mass(m.c)).in_T) {
            const auto t = predict(P.with_mass(m.c));
            ti0 = t.i0;
            tm = t.m_c;
            tmu = t.mu_c;
        }
        const bool ok = m.error.empty();
        r.table.add({m.c, ok ? m.breakdown.total : NAN, ok ? m.breakdown.g : NAN, ok ? m.multiplier : NAN,
                     ok ? m.proj_grad_norm : NAN, static_cast<long long>(m.iterations), m.converged, ti0, tm, tmu,
                     m.error});
        if (ok)
            add_flow_checks(r.report, m, P.with_mass(m.c), vzero, "c=" + to_decimal(m.c) + ": ");
        else
            r.report.add("c=" + to_decimal(m.c) + ": solved", false, 0.0, 0.0, m.error);
    }
    r.facts["grid_extent"] = grid->extent();
    return r;
}

// ---------------------------------------------------------------- concentration

struct ConcentrationRecord {
    double c = 0.0;
    double i_V = 0.0;
    double i0 = 0.0;
    double ratio_iV_i0 = 0.0;
    double m_c = 0.0;
    double rescaled_L2_dist = 0.0;
    double rho = 0.0;
    double mu = 0.0;
    double rho_over_mu = 0.0;
    double rho_scaled = 0.0;
    double g_over_m2 = 0.0;
    double potential_over_abs_i0 = 0.0;
    double center = 0.0;
    long iterations = 0;
    bool converged = false;
    std::string error;
};

struct ConcentrateLimits {
    double dist_frac = 0.1;    ///< final distance < dist_frac |Q_p|_2
    double ratio_tol = 0.1;    ///< |i_V/i0 - 1|
    double rho_scaled_tol = 0.1;
    double rho_mu_tol = 0.1;
    double g_tol = 0.1;        ///< |g/m_c^2 - 1|
    double potential_frac = 0.05;
};

/// argmax |u|, refined by a parabola through the neighbouring nodes.
inline double peak_location(const Field& u)
{
    const Grid& g = u.grid();
    if (g.geometry() == Geometry::radial) return 0.0;
    std::size_t k = 0;
    for (std::size_t i = 1; i < u.size(); ++i)
        if (std::abs(u[i]) > std::abs(u[k])) k = i;
    if (k == 0 || k + 1 == u.size()) return g.node(k);
    const double ym = std::abs(u[k - 1]), y0 = std::abs(u[k]), yp = std::abs(u[k + 1]);
    const double den = ym - 2.0 * y0 + yp;
    const double off = den != 0.0 ? 0.5 * (ym - yp) / den : 0.0;
    return g.node(k) + std::clamp(off, -0.5, 0.5) * g.spacing();
}

/// (|Q|/c)(c/m)^{N/2} u((c/m)(x + z)) on the ground-state grid, and its L2
/// distance to Q_p.
inline double rescaled_distance(const Field& u, double c, double m, double z, const GroundState& gs)
{
    const int N = gs.dim;
    const double s = c / m;
    double sign = 1.0;
    {
        const double at = sample_at(u, z);
        if (at < 0.0) sign = -1.0;
    }
    const double amp = sign * gs.mass() / c * std::pow(s, N / 2.0);
    Field diff = Field::sample(gs.grid_ptr(), [&](double y) { return amp * sample_at(u, s * y + z); });
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= gs.profile[i];
    return l2_norm(diff);
}

inline ConcentrationRecord concentration_record(const MinimizerResult& m, const ProblemParams& P, const GroundState& gs)
{
    ConcentrationRecord rec;
    rec.c = P.c;
    rec.iterations = m.iterations;
    rec.converged = m.converged;
    const auto t = predict(P);
    rec.i_V = m.breakdown.total;
    rec.i0 = t.i0;
    rec.ratio_iV_i0 = rec.i_V / rec.i0;
    rec.m_c = t.m_c;
    rec.center = peak_location(m.u);
    rec.rescaled_L2_dist = rescaled_distance(m.u, P.c, t.m_c, rec.center, gs);
    rec.rho = m.multiplier;
    rec.mu = t.mu_c;
    rec.rho_over_mu = rec.rho / rec.mu;
    rec.rho_scaled = std::pow(std::pow(P.c / t.m_c, P.dim / 2.0) / P.c, P.p - 2.0) * rec.rho;
    rec.g_over_m2 = m.breakdown.g / (t.m_c * t.m_c);
    rec.potential_over_abs_i0 = m.breakdown.potential / std::abs(t.i0);
    return rec;
}

struct ConcentrateSetup {
    MinimizeSetup base;
    std::vector<double> cs;
    ConcentrateLimits limits;
    bool parallel = true;
};

inline std::vector<ConcentrationRecord> concentration_records(GroundStateStore& store, const ConcentrateSetup& s)
{
    ProblemParams P = s.base.params;
    if (std::abs(P.p - 4.0) <= exponent_tolerance) throw invalid_argument("concentration is not defined at p = 4");
    require_below_upper_critical(P.dim, P.p, "concentrate");
    if (s.base.potential.is_zero()) throw invalid_argument("concentrate needs a non-zero trapping potential");
    for (std::size_t k = 1; k < s.cs.size(); ++k)
        if (!(s.cs[k] > s.cs[k - 1])) throw invalid_argument("concentrate: masses must increase strictly");
    auto gs = store.get(P.dim, P.p); // resolved before the parallel phase
    P.qp_mass = gs->mass();

    auto one = [&, P](double c) {
        try {
            auto [grid, V] = prepare(s.base, c);
            auto m = minimize(grid, P.with_mass(c), &*V, flow_for(s.base, c, gs.get()));
            return concentration_record(m, P.with_mass(c), *gs);
        } catch (const error& e) {
            ConcentrationRecord r;
            r.c = c;
            r.error = e.what();
            return r;
        }
    };
    std::vector<ConcentrationRecord> out(s.cs.size());
    if (s.parallel) {
        std::vector<std::future<ConcentrationRecord>> jobs;
        for (double c : s.cs) jobs.push_back(std::async(std::launch::async, one, c));
        for (std::size_t k = 0; k < jobs.size(); ++k) out[k] = jobs[k].get();
    } else {
        for (std::size_t k = 0; k < s.cs.size(); ++k) out[k] = one(s.cs[k]);
    }
    return out;
}

inline Report concentration_checks(const std::vector<ConcentrationRecord>& recs, const ProblemParams& P,
                                   double qp_mass, const ConcentrateLimits& lim)
{
    Report rep;
    bool all_ok = true;
    for (const auto& r : recs) all_ok = all_ok && r.error.empty() && r.converged;
    rep.add("every mass solved and converged", all_ok, 0.0, 0.0);
    if (recs.empty() || !recs.back().error.empty()) return rep;

    bool above = true;
    for (const auto& r : recs)
        if (r.error.empty() && r.i0 < 0.0) above = above && r.i_V >= r.i0 - 1e-6 * std::abs(r.i0);
    rep.add("i_V >= i0 for every mass", above, 0.0, 1e-6);

    bool dec = recs.size() >= 2;
    for (std::size_t k = 1; k < recs.size(); ++k)
        dec = dec && recs[k].error.empty() && recs[k - 1].error.empty()
            && recs[k].rescaled_L2_dist < recs[k - 1].rescaled_L2_dist;
    const auto& f = recs.back();
    rep.add("rescaled distance strictly decreasing", dec, f.rescaled_L2_dist, 0.0);
    rep.add("final rescaled distance < frac |Q_p|_2", f.rescaled_L2_dist < lim.dist_frac * qp_mass,
            f.rescaled_L2_dist / qp_mass, lim.dist_frac);
    rep.add("|i_V/i0 - 1| final", std::abs(f.ratio_iV_i0 - 1.0) < lim.ratio_tol, std::abs(f.ratio_iV_i0 - 1.0),
            lim.ratio_tol);
    const double lim_rho = rho_limit(P.dim, P.p, qp_mass);
    const double rs = std::abs(f.rho_scaled / lim_rho - 1.0);
    rep.add("scaled multiplier vs limit", rs < lim.rho_scaled_tol, rs, lim.rho_scaled_tol,
            "rho_scaled=" + to_decimal(f.rho_scaled) + " limit=" + to_decimal(lim_rho));
    rep.add("|rho/mu - 1| final", std::abs(f.rho_over_mu - 1.0) < lim.rho_mu_tol, std::abs(f.rho_over_mu - 1.0),
            lim.rho_mu_tol);
    rep.add("|g/m_c^2 - 1| final", std::abs(f.g_over_m2 - 1.0) < lim.g_tol, std::abs(f.g_over_m2 - 1.0), lim.g_tol,
            "observed g/m_c^2=" + to_decimal(f.g_over_m2) + " (a/b=" + to_decimal(P.a / P.b) + ")");
    rep.add("potential/|i0| final", f.potential_over_abs_i0 < lim.potential_frac, f.potential_over_abs_i0,
            lim.potential_frac);
    return rep;
}

inline ExperimentResult run_concentrate(GroundStateStore& store, const ConcentrateSetup& s)
{
    auto recs = concentration_records(store, s);
    auto gs = store.get(s.base.params.dim, s.base.params.p);
    ExperimentResult r;
    r.table.experiment = "concentrate";
    r.table.columns = {"c", "i_V", "i0", "ratio_iV_i0", "m_c", "rescaled_L2_dist", "rho", "mu", "rho_over_mu",
                       "rho_scaled", "g_over_m2", "potential_over_abs_i0", "center", "iterations", "converged",
                       "error"};
    for (const auto& x : recs)
        r.table.add({x.c, x.i_V, x.i0, x.ratio_iV_i0, x.m_c, x.rescaled_L2_dist, x.rho, x.mu, x.rho_over_mu,
                     x.rho_scaled, x.g_over_m2, x.potential_over_abs_i0, x.center,
                     static_cast<long long>(x.iterations), x.converged, x.error});
    r.report = concentration_checks(recs, s.base.params, gs->mass(), s.limits);
    r.facts["qp_mass"] = gs->mass();
    r.facts["rho_limit"] = rho_limit(s.base.params.dim, s.base.params.p, gs->mass());
    return r;
}

// ---------------------------------------------------------------- blow-up

/// Radial cut-off: 1 on B_1, 0 outside B_2, quintic smootherstep in between
/// (largest slope 15/8 <= 2).
inline double cutoff(double r)
{
    if (r <= 1.0) return 1.0;
    if (r >= 2.0) return 0.0;
    const double s = r - 1.0;
    return 1.0 - s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

struct BlowupPoint {
    double t = 0.0;
    double A_t = 0.0;
    EnergyBreakdown e;
};

struct BlowupSetup {
    ProblemParams params; ///< a, b, p, N, c
    PotentialSpec potential = PotentialSpec::harmonic(1.0);
    std::vector<double> ts;
    double floor = -1e6;
    double A_tol = 1e-3;
    std::size_t n = 8001;
};

/// u_t = (c A_t / |Q|) phi(x) t^{N/2} Q(t x), with A_t fixing |u_t|_2 = c.
inline BlowupPoint blowup_point(const BlowupSetup& s, const GroundState& gs, double t)
{
    const int N = s.params.dim;
    const double R = std::min(2.0, gs.grid().extent() / t);
    auto grid = make_grid(N, N == 1 ? Geometry::line : Geometry::radial, R, s.n);
    const double amp = std::pow(t, N / 2.0);
    Field f = Field::sample(grid, [&](double x) { return cutoff(std::abs(x)) * amp * sample_at(gs.profile, t * x); });
    for (std::size_t i = 0; i < f.size(); ++i)
        if (grid->is_dirichlet(i)) f[i] = 0.0;
    BlowupPoint pt;
    pt.t = t;
    pt.A_t = gs.mass() / l2_norm(f);
    const double scale = s.params.c * pt.A_t / gs.mass();
    for (double& v : f.values()) v *= scale;
    std::optional<Field> V;
    if (!s.potential.is_zero()) V = Field::sample(grid, [&](double x) { return s.potential(x); });
    pt.e = energy(f, s.params, V ? &*V : nullptr);
    return pt;
}

inline void require_blowup_regime(const ProblemParams& P)
{
    const Regime reg = classify(P.dim, P.p);
    if (reg == Regime::supercritical) return;
    if (reg == Regime::critical_2Np8) {
        ProblemParams q = P;
        if (!(q.qp_mass > 0.0)) throw invalid_argument("blowup: |Q_p|_2 needed at p = (2N+8)/N");
        if (P.c > critical_mass_2Np8(q)) return;
        throw invalid_argument("regime mismatch: c is not above the critical mass at p = (2N+8)/N");
    }
    throw invalid_argument("regime mismatch: blow-up needs p = (2N+8)/N above the critical mass or p > (2N+8)/N");
}

inline ExperimentResult run_blowup(GroundStateStore& store, BlowupSetup s)
{
    if (s.ts.size() < 2) throw invalid_argument("blowup needs at least two t values");
    for (std::size_t k = 1; k < s.ts.size(); ++k)
        if (!(s.ts[k] > s.ts[k - 1])) throw invalid_argument("blowup: t values must increase strictly");
    if (classify(s.params.dim, s.params.p) != Regime::supercritical && !(s.params.qp_mass > 0.0)) {
        // the regime check at p = (2N+8)/N needs |Q_p|_2
        s.params.qp_mass = store.get(s.params.dim, s.params.p)->mass();
    }
    require_blowup_regime(s.params);
    auto gs = store.get(s.params.dim, s.params.p);
    s.params.qp_mass = gs->mass();

    ExperimentResult r;
    r.table.experiment = "blowup";
    r.table.columns = {"t", "A_t", "I_V", "grad_norm_sq", "kinetic_a", "kirchhoff_b", "potential", "nonlinear"};
    std::vector<BlowupPoint> pts;
    for (double t : s.ts) {
        pts.push_back(blowup_point(s, *gs, t));
        const auto& p = pts.back();
        r.table.add({t, p.A_t, p.e.total, p.e.g, p.e.kinetic_a, p.e.kirchhoff_b, p.e.potential, p.e.nonlinear});
    }
    // "Eventually strictly decreasing": decreasing from some index on, and
    // that tail spans at least half of the t-grid.
    std::size_t start = pts.size() - 1;
    while (start > 0 && pts[start].e.total < pts[start - 1].e.total) --start;
    const std::size_t tail = pts.size() - start;
    const bool eventually = tail >= 2 && 2 * tail >= pts.size();
    r.report.add("I_V(u_t) eventually strictly decreasing", eventually, static_cast<double>(tail),
                 std::ceil(pts.size() / 2.0), "decreasing from t=" + to_decimal(pts[start].t));
    r.report.add("final I_V below floor", pts.back().e.total < s.floor, pts.back().e.total, s.floor);
    const double adev = std::abs(pts.back().A_t - 1.0);
    r.report.add("|A_t - 1| at largest t", adev < s.A_tol, adev, s.A_tol);

    // Where the curve really turns: keep doubling t until I_V < floor.
    double t = s.ts.back();
    double reach = NAN;
    for (int k = 0; k < 60; ++k) {
        t *= 2.0;
        const auto p = blowup_point(s, *gs, t);
        if (p.e.total < s.floor) {
            reach = t;
            break;
        }
    }
    r.facts["floor_reached_at_t"] = reach;
    r.facts["qp_mass"] = gs->mass();
    return r;
}

// ---------------------------------------------------------------- small mass

struct SmallMassSetup {
    MinimizeSetup base;
    std::vector<double> cs; ///< decreasing towards 0
    double continuity_step = 0.01;
    double continuity_tol = 0.05;
};

inline ExperimentResult run_small_mass(GroundStateStore& store, const SmallMassSetup& s)
{
    for (std::size_t k = 1; k < s.cs.size(); ++k)
        if (!(s.cs[k] < s.cs[k - 1])) throw invalid_argument("small-mass: masses must decrease strictly");
    ProblemParams P = s.base.params;
    auto gs = store.get(P.dim, P.p);
    P.qp_mass = gs->mass();
    MinimizeSetup base = s.base;
    base.params = P;
    const bool vzero = base.potential.is_zero();
    if (vzero) base.flow.allow_outside = true;

    auto solve = [&](double c) {
        auto [grid, V] = prepare(base, c);
        return minimize(grid, P.with_mass(c), V ? &*V : nullptr, flow_for(base, c, gs.get()));
    };
    std::vector<std::future<std::pair<MinimizerResult, MinimizerResult>>> jobs;
    for (double c : s.cs)
        jobs.push_back(std::async(std::launch::async, [&, c] {
            return std::make_pair(solve(c), solve(c * (1.0 + s.continuity_step)));
        }));

    ExperimentResult r;
    r.table.experiment = "small_mass";
    r.table.columns = {"c", "i_V", "i_V_shifted", "relative_jump", "grad_norm_sq", "potential", "iterations",
                       "converged"};
    std::vector<double> iv;
    double worst_jump = 0.0;
    bool conv = true;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        auto [m, m2] = jobs[k].get();
        const double jump = std::abs(m2.breakdown.total - m.breakdown.total) / std::abs(m.breakdown.total);
        worst_jump = std::max(worst_jump, jump);
        conv = conv && m.converged && m2.converged;
        iv.push_back(m.breakdown.total);
        r.table.add({s.cs[k], m.breakdown.total, m2.breakdown.total, jump, m.breakdown.g, m.breakdown.potential,
                     static_cast<long long>(m.iterations), m.converged});
        if (vzero && classify(P.dim, P.p) == Regime::between && s.cs[k] < c_star(P.with_mass(s.cs[k]))) {
            const double rel = std::abs(m.breakdown.total) / (s.cs[k] * s.cs[k]);
            r.report.add("i0 ~ 0 below c_* at c=" + to_decimal(s.cs[k]), rel < 1e-3, rel, 1e-3);
        }
    }
    r.report.add("all minimizations converged", conv, 0.0, 0.0);
    bool dec = iv.size() >= 2;
    for (std::size_t k = 1; k < iv.size(); ++k) dec = dec && std::abs(iv[k]) < std::abs(iv[k - 1]);
    r.report.add("|i_V| decreasing as c -> 0", dec, iv.empty() ? 0.0 : std::abs(iv.back()), 0.0);
    if (!iv.empty())
        r.report.add("final |i_V| < |i_V(first)|/2", std::abs(iv.back()) < std::abs(iv.front()) / 2.0,
                     std::abs(iv.back()), std::abs(iv.front()) / 2.0);
    r.report.add("continuity: relative change for a small mass step", worst_jump < s.continuity_tol, worst_jump,
                 s.continuity_tol);
    return r;
}

// ---------------------------------------------------------------- GN fuzz

struct GnCheckSetup {
    std::vector<std::pair<int, double>> cases = {{1, 3.0}, {2, 3.0}, {3, 4.0}, {3, 5.0}};
    int fields = 200;
    std::uint64_t seed = 20240601;
};

/// Random smooth test field on the ground-state grid: Gaussian sums, sech
/// powers, or both. Sech exponents near 2/(p-2) are skipped because those
/// are rescaled optimizers.
inline std::pair<Field, std::string> random_field(const GridPtr& grid, double p, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const bool line = grid->geometry() == Geometry::line;
    auto uni = [&](double lo, double hi) { return lo + (hi - lo) * U(rng); };
    const int family = static_cast<int>(U(rng) * 3.0);
    struct Bump {
        bool sech;
        double amp, centre, width, power;
    };
    std::vector<Bump> bumps;
    const int terms = 1 + static_cast<int>(U(rng) * 3.0);
    for (int k = 0; k < terms; ++k) {
        Bump b;
        b.sech = family == 1 || (family == 2 && k % 2 == 1);
        b.amp = uni(0.2, 2.0) * (U(rng) < 0.2 ? -1.0 : 1.0);
        b.centre = line ? uni(-10.0, 10.0) : (U(rng) < 0.5 ? 0.0 : uni(0.0, 6.0));
        b.width = uni(0.3, 4.0);
        do {
            b.power = uni(0.5, 4.0);
        } while (std::abs(b.power - 2.0 / (p - 2.0)) < 0.05);
        bumps.push_back(b);
    }
    Field f = Field::sample(grid, [&](double x) {
        double v = 0.0;
        for (const auto& b : bumps) {
            const double y = (x - b.centre) / b.width;
            v += b.amp * (b.sech ? std::pow(1.0 / std::cosh(y), b.power) : std::exp(-y * y));
        }
        return v;
    });
    for (std::size_t i = 0; i < f.size(); ++i)
        if (grid->is_dirichlet(i)) f[i] = 0.0;
    static const char* names[] = {"gaussian_sum", "sech_power", "mixed"};
    return {std::move(f), names[family]};
}

inline ExperimentResult run_gn_check(GroundStateStore& store, const GnCheckSetup& s)
{
    ExperimentResult r;
    r.table.experiment = "gn_check";
    r.table.columns = {"N", "p", "index", "family", "ratio"};
    for (auto [N, p] : s.cases) {
        auto gs = store.get(N, p);
        const double at_q = gn_ratio(gs->profile, *gs);
        r.table.add({static_cast<long long>(N), p, -1LL, std::string("Q_p"), at_q});
        const std::string tag = "N=" + std::to_string(N) + " p=" + to_decimal(p) + ": ";
        r.report.add(tag + "gn_ratio(Q_p) = 1", std::abs(at_q - 1.0) < 1e-4, at_q, 1.0);
        std::mt19937_64 rng(s.seed + 1000003ull * static_cast<std::uint64_t>(N) + static_cast<std::uint64_t>(p * 1000));
        double worst = 0.0;
        for (int k = 0; k < s.fields; ++k) {
            auto [f, family] = random_field(gs->grid_ptr(), p, rng);
            const double q = gn_ratio(f, *gs);
            worst = std::max(worst, q);
            r.table.add({static_cast<long long>(N), p, static_cast<long long>(k), family, q});
        }
        r.report.add(tag + "max gn_ratio over random fields", worst <= 1.0 + 1e-6, worst, 1.0 + 1e-6);
    }
    return r;
}

// ---------------------------------------------------------------- verify

struct VerifySetup {
    double a = 1.0;
    double b = 1.0;
    int gn_fields = 200;
    std::uint64_t seed = 20240601;
    bool fault_injection = false;     ///< corrupt a stored ground state and expect the check to catch it
    std::filesystem::path scratch_dir; ///< where fault-injected caches go
};

inline ExperimentResult run_verify(GroundStateStore& store, const VerifySetup& s)
{
    ExperimentResult r;
    r.table.experiment = "verify";
    r.table.columns = {"check", "passed", "value", "threshold", "detail"};
    Report& rep = r.report;

    // Ground states and the Pohozaev chain.
    const std::vector<std::pair<int, double>> gs_cases = {{1, 3.0}, {1, 4.0}, {1, 5.0}, {2, 3.0}, {3, 4.0}, {3, 5.0}};
    for (auto [N, p] : gs_cases) {
        const std::string tag = "ground state N=" + std::to_string(N) + " p=" + to_decimal(p) + ": ";
        try {
            auto gs = store.get(N, p);
            rep.add(tag + "Pohozaev kinetic", gs->kinetic_defect() < 1e-4, gs->kinetic_defect(), 1e-4);
            rep.add(tag + "Pohozaev p-norm", gs->pnorm_defect() < 1e-4, gs->pnorm_defect(), 1e-4);
            if (N == 1) {
                const double e = closed_form_error(*gs);
                rep.add(tag + "closed form", e < 1e-6, e, 1e-6);
            }
            const double q = gn_ratio(gs->profile, *gs);
            rep.add(tag + "sharp GN at Q_p", std::abs(q - 1.0) < 1e-4, q, 1.0);
        } catch (const error& e) {
            rep.add(tag + "solved", false, 0.0, 0.0, e.what());
        }
    }

    // Sharp GN fuzz.
    {
        GnCheckSetup g;
        g.fields = s.gn_fields;
        g.seed = s.seed;
        auto res = run_gn_check(store, g);
        for (const auto& c : res.report.checks)
            if (c.name.find("random") != std::string::npos) rep.checks.push_back(c);
    }

    // Closed forms: the m_c equation across regimes, the p = (2N+4)/N formulas.
    const std::vector<std::pair<int, double>> regimes = {{1, 3.0}, {1, 6.0}, {1, 8.0}, {2, 3.0},
                                                         {2, 4.0}, {2, 5.0}, {3, 3.0}, {3, 10.0 / 3.0}, {3, 4.0}};
    for (auto [N, p] : regimes) {
        const std::string tag = "theory N=" + std::to_string(N) + " p=" + to_decimal(p) + ": ";
        try {
            auto gs = store.get(N, p);
            ProblemParams P{s.a, s.b, p, N, 1.0, gs->mass()};
            const double cs = c_star(P);
            const double start = cs > 0.0 ? 1.05 * cs : 0.5;
            double worst = 0.0, worst_closed = 0.0;
            for (double c : geometric_sweep(start, start * 20.0, 7)) {
                const auto Pc = P.with_mass(c);
                const auto sol = solve_mc(Pc);
                worst = std::max(worst, mc_equation(Pc).relative_residual(sol.m));
                if (classify(N, p) == Regime::critical_2Np4) {
                    const double closed = std::sqrt((std::pow(c / P.qp_mass, 4.0 / N) - P.a) / P.b);
                    worst_closed = std::max(worst_closed, std::abs(sol.m - closed) / closed);
                    const double i0c = -1.0 / (4.0 * P.b) * std::pow(std::pow(c / P.qp_mass, 4.0 / N) - P.a, 2.0);
                    worst_closed = std::max(worst_closed, std::abs(i0_of(Pc, sol.m) - i0c) / std::abs(i0c));
                }
            }
            rep.add(tag + "m_c equation residual", worst < 1e-10, worst, 1e-10);
            if (classify(N, p) == Regime::critical_2Np4)
                rep.add(tag + "closed forms vs root-find", worst_closed < 1e-8, worst_closed, 1e-8);
        } catch (const error& e) {
            rep.add(tag + "evaluated", false, 0.0, 0.0, e.what());
        }
    }

    // Threshold mass for N = 3, p = 4.
    try {
        auto gs = store.get(3, 4.0);
        ProblemParams P{1.0, 1.0, 4.0, 3, 1.0, gs->mass()};
        const double cs = c_star(P), expect = std::sqrt(2.0) * gs->mass_sq;
        rep.add("c_* = sqrt(2)|Q_4|^2 (N=3, a=b=1)", std::abs(cs / expect - 1.0) < 1e-12, cs, expect);
        const auto at = solve_mc(P.with_mass(cs));
        rep.add("m_c at c_* = sqrt(2)", std::abs(at.m - std::sqrt(2.0)) < 1e-12, at.m, std::sqrt(2.0));
        const double i0 = i0_of(P.with_mass(cs), at.m);
        rep.add("i0(c_*) = 0", std::abs(i0) < 1e-12, i0, 0.0);
    } catch (const error& e) {
        rep.add("threshold mass", false, 0.0, 0.0, e.what());
    }

    // The explicit minimizer v_c.
    for (auto [N, p, c] : std::vector<std::tuple<int, double, double>>{{1, 3.0, 1.0}, {1, 3.0, 5.0}, {3, 4.0, 120.0}}) {
        const std::string tag = "v_c N=" + std::to_string(N) + " p=" + to_decimal(p) + " c=" + to_decimal(c) + ": ";
        try {
            auto gs = store.get(N, p);
            ProblemParams P{s.a, s.b, p, N, c, gs->mass()};
            const auto t = predict(P);
            Field v = minimizer_profile(P, *gs);
            const auto e = energy(v, P);
            const double mass_err = std::abs(std::sqrt(e.mass_sq) / c - 1.0);
            const double kin_err = std::abs(e.g / (t.m_c * t.m_c) - 1.0);
            const double en_err = std::abs(e.total / t.i0 - 1.0);
            const double mu_err = std::abs(multiplier_estimate(e, P) / t.mu_c - 1.0);
            const double poh = pohozaev_residual(e, P);
            rep.add(tag + "mass", mass_err < 1e-6, mass_err, 1e-6);
            rep.add(tag + "kinetic = m_c^2", kin_err < 1e-3, kin_err, 1e-3);
            rep.add(tag + "energy = i0", en_err < 1e-3, en_err, 1e-3);
            rep.add(tag + "multiplier = mu_c", mu_err < 1e-2, mu_err, 1e-2);
            rep.add(tag + "Pohozaev", poh < 1e-3, poh, 1e-3);
        } catch (const error& e) {
            rep.add(tag + "evaluated", false, 0.0, 0.0, e.what());
        }
    }

    // Cache round trip, and optionally a corrupted entry that must be caught.
    {
        namespace fs = std::filesystem;
        fs::path dir = s.scratch_dir.empty() ? fs::temp_directory_path() / ("kml-verify-" + std::to_string(::getpid()))
                                             : s.scratch_dir;
        try {
            auto gs = store.get(1, 3.0);
            const auto path = dir / "roundtrip.qpc";
            fs::remove(path);
            cache_store(*gs, path);
            auto back = cache_load(1, 3.0, gs->grid().spec(), path);
            const bool same = std::equal(back.profile.values().begin(), back.profile.values().end(),
                                         gs->profile.values().begin());
            rep.add("cache round trip is bit-identical", same, 0.0, 0.0);
            fs::remove(path);
            if (s.fault_injection) {
                // A profile with a valid checksum but the wrong width: Q(1.05 x)
                // is still positive and decreasing, only the Pohozaev chain breaks.
                Field bad = Field::sample(gs->grid_ptr(), [&](double x) { return sample_at(gs->profile, 1.05 * x); });
                GroundState fake = *gs;
                fake.profile = bad;
                const auto fpath = dir / "corrupted.qpc";
                fs::remove(fpath);
                {
                    std::ofstream out(fpath, std::ios::binary);
                    out << cache_serialize(fake);
                }
                const std::string name = "Pohozaev chain of injected cache entry";
                try {
                    auto loaded = cache_load(1, 3.0, gs->grid().spec(), fpath);
                    rep.add(name, true, loaded.pnorm_defect(), 1e-4);
                } catch (const invariant_violation& e) {
                    const double defect = std::abs(grad_norm_sq(bad.grid(), bad) / lp_norm_pow(bad.grid(), bad, 2.0) - 1.0);
                    rep.add(name, false, defect, 1e-4, e.what());
                }
                fs::remove(fpath);
            }
            std::error_code ec;
            if (s.scratch_dir.empty()) fs::remove_all(dir, ec);
        } catch (const std::exception& e) {
            rep.add("cache round trip", false, 0.0, 0.0, e.what());
        }
    }

    for (const auto& c : rep.checks) r.table.add({c.name, c.passed, c.value, c.threshold, c.detail});
    return r;
}

} // namespace kml
