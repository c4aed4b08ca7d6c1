#pragma once

// Normalized gradient flow for  min I_V(u)  subject to  |u|_2 = c.
//
// Each step moves along a preconditioned projected gradient and renormalizes:
//
//   r  = G(u) - mu u,                mu = <G(u), u> / c^2
//   u' = c (u - tau s) / |u - tau s|,  (I + tau (A + sigma)) s = r
//
// where A = (a + b g)(-L) + V is the linear part of the gradient frozen at u
// and sigma = max(-mu, 0) + 1e-3 keeps A + sigma positive definite. The
// system is tridiagonal. tau is halved until the energy does not increase,
// so the energy sequence is monotone up to rounding. Without the shift the
// step stalls on the slowly decaying tail of the large-mass minimizers.

#include "kml/energy.hpp"
#include "kml/error.hpp"
#include "kml/grid.hpp"
#include "kml/ground_state.hpp"
#include "kml/theory.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace kml {

struct GaussianInit {
    double width = 1.0;
};

struct TheoryProfileInit {
    const GroundState* gs = nullptr;
};

struct WarmStartInit {
    Field u;
};

using FlowInit = std::variant<GaussianInit, TheoryProfileInit, WarmStartInit>;

struct FlowConfig {
    double step0 = 1e6;     ///< initial and largest step
    double shrink = 0.5;    ///< backtracking factor
    double tol = 1e-8;      ///< stop when |r|_2 <= tol * max(1, |E|)
    long max_iter = 200000;
    int grow_after = 5;     ///< consecutive accepts before tau grows by 1.5
    double min_step = 1e-14;
    bool allow_outside = false; ///< run even when no minimizer is known to exist
    FlowInit init = GaussianInit{};

    void validate() const
    {
        if (!(step0 > 0.0) || !(tol > 0.0) || !(min_step > 0.0)) throw invalid_argument("flow: step0, tol and min_step must be positive");
        if (!(shrink > 0.0 && shrink < 1.0)) throw invalid_argument("flow: shrink must lie in (0, 1)");
        if (max_iter < 1 || grow_after < 1) throw invalid_argument("flow: max_iter and grow_after must be >= 1");
    }
};

struct MinimizerResult {
    double c = 0.0;
    Field u;
    EnergyBreakdown breakdown;
    double multiplier = 0.0;
    double proj_grad_norm = 0.0;
    long iterations = 0;
    bool converged = false;
    bool stalled = false;        ///< step fell below min_step before the tolerance was met
    bool exploratory = false;    ///< run outside the known existence region
    bool near_threshold = false; ///< |i0(c)| < 1e-4 c^2 just above c_*
    bool single_signed = false;
    double boundary_ratio = 0.0; ///< |u| next to the boundary over max |u|
    std::vector<double> energies; ///< energy after every accepted step, starting with the initial one
    std::string error;           ///< non-empty when a sweep entry failed
};

/// Thrown when the energy turns NaN; carries the last finite iterate.
class flow_diverged : public convergence_error {
public:
    flow_diverged(const std::string& what, Field last, long iteration)
        : convergence_error(what), last_iterate(std::move(last)), iteration(iteration)
    {
    }
    Field last_iterate;
    long iteration;
};

namespace detail {

inline Field normalized(Field u, double c)
{
    const double nrm = l2_norm(u);
    if (!(nrm > 0.0) || !std::isfinite(nrm)) throw invalid_argument("flow: cannot normalize a zero or non-finite field");
    for (double& v : u.values()) v *= c / nrm;
    return u;
}

/// Resamples a field living on another grid; Dirichlet nodes are zeroed.
inline Field onto(const GridPtr& grid, const Field& f)
{
    if (f.grid().spec() == grid->spec()) return Field(grid, std::vector<double>(f.values().begin(), f.values().end()));
    if (f.grid().dim() != grid->dim()) throw grid_mismatch();
    Field out = Field::sample(grid, [&](double x) { return sample_at(f, x); });
    for (std::size_t i = 0; i < out.size(); ++i)
        if (grid->is_dirichlet(i)) out[i] = 0.0;
    return out;
}

inline Field initial_field(const GridPtr& grid, const ProblemParams& P, const FlowInit& init)
{
    Field u;
    if (const auto* g = std::get_if<GaussianInit>(&init)) {
        if (!(g->width > 0.0)) throw invalid_argument("flow: Gaussian width must be positive");
        u = Field::sample(grid, [&](double x) { return std::exp(-0.5 * x * x / (g->width * g->width)); });
        for (std::size_t i = 0; i < u.size(); ++i)
            if (grid->is_dirichlet(i)) u[i] = 0.0;
    } else if (const auto* t = std::get_if<TheoryProfileInit>(&init)) {
        if (!t->gs) throw invalid_argument("flow: theory_profile init needs a ground state");
        u = onto(grid, minimizer_profile(P, *t->gs));
    } else {
        u = onto(grid, std::get<WarmStartInit>(init).u);
    }
    return normalized(std::move(u), P.c);
}

/// Solves (I + tau (kappa (-L) + V + sigma)) x = r with the Thomas algorithm.
inline void solve_preconditioner(const Grid& grid, double tau, double kappa, const Field* V, double sigma,
                                 std::span<const double> r, std::vector<double>& x, std::vector<double>& scratch)
{
    const std::size_t n = grid.size();
    const auto F = grid.faces();
    const auto w = grid.weights();
    x.assign(n, 0.0);
    scratch.assign(n, 0.0);
    // Forward sweep. scratch holds the modified super-diagonal.
    double prev_c = 0.0, prev_d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double lo = 0.0, di = 1.0, up = 0.0, rhs = 0.0;
        if (!grid.is_dirichlet(i)) {
            const double fl = i > 0 ? F[i - 1] : 0.0;
            const double fr = i + 1 < n ? F[i] : 0.0;
            lo = -tau * kappa * fl / w[i];
            up = -tau * kappa * fr / w[i];
            di = 1.0 + tau * kappa * (fl + fr) / w[i] + tau * ((V ? (*V)[i] : 0.0) + sigma);
            rhs = r[i];
        }
        const double denom = di - lo * prev_c;
        scratch[i] = up / denom;
        x[i] = (rhs - lo * prev_d) / denom;
        prev_c = scratch[i];
        prev_d = x[i];
    }
    for (std::size_t i = n - 1; i-- > 0;) x[i] -= scratch[i] * x[i + 1];
}

/// Whether a minimizer is known to exist; throws when not and not overridden.
inline bool check_existence(const ProblemParams& P, bool potential_is_zero, bool allow_outside)
{
    const int N = P.dim;
    bool inside = true;
    std::string why;
    if (potential_is_zero) {
        const auto r = existence_region(P);
        inside = r.in_T;
        why = r.descriptor;
    } else {
        const Regime reg = classify(N, P.p);
        if (reg == Regime::supercritical) {
            inside = false;
            why = "i_V = -inf for p > (2N+8)/N";
        } else if (reg == Regime::critical_2Np8) {
            inside = P.c <= critical_mass_2Np8(P) || near_mass(P.c, critical_mass_2Np8(P));
            why = "i_V = -inf above the critical mass";
        }
    }
    if (!inside && !allow_outside)
        throw outside_existence_region("c = " + std::to_string(P.c) + " is outside the existence region (" + why
                                       + "); set allow_outside for an exploratory run");
    return !inside;
}

} // namespace detail

inline MinimizerResult minimize(const GridPtr& grid, const ProblemParams& P, const Field* V, const FlowConfig& cfg)
{
    cfg.validate();
    require_energy_params(P, *grid);
    if (!(P.c > 0.0)) throw invalid_argument("flow: mass c must be positive");
    if (V) require_on(*grid, *V);
    const bool vzero = !V || V->max_abs() == 0.0;

    MinimizerResult res;
    res.c = P.c;
    res.exploratory = detail::check_existence(P, vzero, cfg.allow_outside);
    if (vzero && classify(P.dim, P.p) == Regime::between && !res.exploratory) {
        const auto t = predict(P);
        res.near_threshold = std::abs(t.i0) < 1e-4 * P.c * P.c;
    }

    Field u = detail::initial_field(grid, P, cfg.init);
    EnergyBreakdown e = energy(u, P, V);
    res.energies.push_back(e.total);
    double tau = cfg.step0;
    int accepts = 0;
    std::vector<double> s, scratch;
    const double c2 = P.c * P.c;

    long it = 0;
    double pg = 0.0, mu = 0.0;
    for (;; ++it) {
        Field g = gradient(u, P, V);
        mu = inner(g, u) / c2;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= mu * u[i];
        pg = l2_norm(g);
        if (pg <= cfg.tol * std::max(1.0, std::abs(e.total))) {
            res.converged = true;
            break;
        }
        if (it >= cfg.max_iter) break;

        const double kappa = P.a + P.b * e.g;
        const double sigma = std::max(-mu, 0.0) + 1e-3;
        bool accepted = false;
        while (tau >= cfg.min_step) {
            detail::solve_preconditioner(*grid, tau, kappa, V, sigma, g.values(), s, scratch);
            std::vector<double> next(u.size());
            for (std::size_t i = 0; i < next.size(); ++i) next[i] = u[i] - tau * s[i];
            bool finite = true;
            for (double v : next) finite = finite && std::isfinite(v);
            if (!finite) throw flow_diverged("flow: non-finite iterate", u, it);
            Field cand = detail::normalized(Field(grid, std::move(next)), P.c);
            EnergyBreakdown ec;
            try {
                ec = energy(cand, P, V);
            } catch (const invalid_argument&) {
                throw flow_diverged("flow: energy became NaN", u, it);
            }
            // Near the minimizer the true decrease drops below the rounding
            // error of the energy sum; allow a few ulps of it.
            const double slack = 16.0 * std::numeric_limits<double>::epsilon()
                * (e.kinetic_a + e.kirchhoff_b + e.potential + e.nonlinear);
            if (ec.total <= e.total + slack) {
                u = std::move(cand);
                e = ec;
                accepted = true;
                break;
            }
            tau *= cfg.shrink;
            accepts = 0;
        }
        if (!accepted) {
            res.stalled = true;
            break;
        }
        res.energies.push_back(e.total);
        if (++accepts >= cfg.grow_after) {
            tau = std::min(tau * 1.5, cfg.step0);
            accepts = 0;
        }
    }

    res.u = std::move(u);
    res.breakdown = e;
    res.multiplier = multiplier_estimate(e, P);
    res.proj_grad_norm = pg;
    res.iterations = it;

    const double peak = res.u.max_abs();
    double lo = 0.0, hi = 0.0;
    for (double v : res.u.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    res.single_signed = lo >= -1e-8 * peak || hi <= 1e-8 * peak;
    const std::size_t n = res.u.size();
    double edge = std::abs(res.u[n - 2]);
    if (grid->geometry() == Geometry::line) edge = std::max(edge, std::abs(res.u[1]));
    res.boundary_ratio = peak > 0.0 ? edge / peak : 0.0;
    return res;
}

inline MinimizerResult minimize(const GridPtr& grid, const ProblemParams& P, const Field& V, const FlowConfig& cfg)
{
    return minimize(grid, P, &V, cfg);
}

/// Solves an ascending list of masses, each warm-started from the previous
/// solution scaled by c_{k+1}/c_k. Failures are recorded per entry.
inline std::vector<MinimizerResult> continuation_sweep(const GridPtr& grid, const ProblemParams& base, const Field* V,
                                                       const std::vector<double>& c_list, FlowConfig cfg)
{
    if (c_list.empty()) throw invalid_argument("continuation_sweep: empty mass list");
    for (std::size_t k = 1; k < c_list.size(); ++k)
        if (!(c_list[k] > c_list[k - 1])) throw invalid_argument("continuation_sweep: masses must increase strictly");

    std::vector<MinimizerResult> out;
    std::optional<Field> prev;
    double prev_c = 0.0;
    for (double c : c_list) {
        FlowConfig local = cfg;
        if (prev) {
            Field w = *prev;
            for (double& v : w.values()) v *= c / prev_c;
            local.init = WarmStartInit{std::move(w)};
        }
        try {
            out.push_back(minimize(grid, base.with_mass(c), V, local));
            prev = out.back().u;
            prev_c = c;
        } catch (const error& ex) {
            MinimizerResult r;
            r.c = c;
            r.error = ex.what();
            out.push_back(std::move(r));
        }
    }
    return out;
}

} // namespace kml
