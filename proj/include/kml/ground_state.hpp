#pragma once

// Ground state Q_p of
//
//     -(N(p-2)/4) dQ + ((2N - p(N-2))/4) Q = |Q|^{p-2} Q     in R^N,
//
// built from the standard profile w of  -dw + w = w^{p-1}  (radial shooting)
// and the exact rescaling  Q(x) = l^{1/(p-2)} w(sqrt(l/k) x),
// k = N(p-2)/4, l = (2N - p(N-2))/4.
//
// The rescaling is realised by relabelling nodes: a w-grid of extent E maps
// onto a Q-grid of extent E / sqrt(l/k) with the same node count, so no
// interpolation enters the Q profile.

#include "kml/error.hpp"
#include "kml/grid.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace kml {

/// 2* = 2N/(N-2); +inf for N <= 2.
inline double critical_sobolev_exponent(int dim)
{
    return dim >= 3 ? 2.0 * dim / (dim - 2) : std::numeric_limits<double>::infinity();
}

inline void require_exponent(int dim, double p)
{
    if (dim < 1 || dim > 3) throw invalid_argument("dimension must be 1, 2 or 3");
    if (!(p > 2.0) || !(p < critical_sobolev_exponent(dim)))
        throw invalid_argument("exponent p must satisfy 2 < p < 2*");
}

/// Coefficients k (diffusion) and l (mass) of the Q_p equation.
struct QpScaling {
    double k;
    double l;
    double stretch() const { return std::sqrt(l / k); }
};

inline QpScaling qp_scaling(int dim, double p)
{
    return {dim * (p - 2.0) / 4.0, (2.0 * dim - p * (dim - 2.0)) / 4.0};
}

struct ShootingOptions {
    /// Largest RK4 step; grid spacing is subdivided to respect it.
    double max_step = 0.005;
    /// Largest RK4 step measured in units of the local oscillation period.
    double phase_step = 0.01;
    /// Upper limit for the bracket search on w(0).
    double w0_max = 1e4;
    int max_bisections = 400;
    /// Relative divergence of the bracketing trajectories at which the
    /// analytic tail takes over.
    double divergence = 1e-4;
    /// Sup-norm bound for the ODE residual relative to max w.
    double residual_bound = 1e-6;
};

namespace detail {

enum class ShotOutcome { crosses_zero, turns_up, reached_end };

struct Shot {
    ShotOutcome outcome = ShotOutcome::reached_end;
    std::vector<double> samples; // w at r = j*dt until classification, NaN after
};

/// Integrates  w'' = -(N-1)/r w' + w - |w|^{p-2} w,  w(0) = w0, w'(0) = 0
/// with classic RK4 (step dt, `steps` steps) and classifies the trajectory.
inline Shot shoot(int N, double p, double w0, double dt, std::size_t steps, bool record)
{
    auto accel = [&](double r, double w, double dw) {
        return -(N - 1.0) / r * dw + w - std::pow(std::abs(w), p - 2.0) * w;
    };

    Shot shot;
    if (record) shot.samples.assign(steps + 1, std::numeric_limits<double>::quiet_NaN());
    // Leave the coordinate singularity with the even series
    // w = w0 + A r^2 + B r^4 + C r^6, valid while r * sqrt|f'(w0)| is small:
    // 2N A = f, 4(N+2) B = f' A, 6(N+4) C = f' B + f'' A^2 / 2.
    const double f0 = w0 - std::pow(w0, p - 1.0);
    const double df0 = 1.0 - (p - 1.0) * std::pow(w0, p - 2.0);
    const double ddf0 = -(p - 1.0) * (p - 2.0) * std::pow(w0, p - 3.0);
    const double A = f0 / (2.0 * N);
    const double B = df0 * A / (4.0 * (N + 2.0));
    const double C = (df0 * B + 0.5 * ddf0 * A * A) / (6.0 * (N + 4.0));
    const double r_series = 0.02 / std::sqrt(std::max(1.0, std::abs(df0)));
    const auto series_steps = std::min<std::size_t>(
        steps, std::max<std::size_t>(1, static_cast<std::size_t>(r_series / dt)));
    double w = w0, dw = 0.0;
    if (record) shot.samples[0] = w0;
    for (std::size_t j = 1; j <= series_steps; ++j) {
        const double r = static_cast<double>(j) * dt, r2 = r * r;
        w = w0 + r2 * (A + r2 * (B + r2 * C));
        dw = r * (2.0 * A + r2 * (4.0 * B + 6.0 * C * r2));
        if (record) shot.samples[j] = w;
    }
    for (std::size_t j = series_steps; j < steps; ++j) {
        if (w < 0.0) {
            shot.outcome = ShotOutcome::crosses_zero;
            return shot;
        }
        if (dw > 0.0) {
            shot.outcome = ShotOutcome::turns_up;
            return shot;
        }
        // The 1/r coefficient spoils RK4 accuracy unless the step is small
        // against r, so the first few steps are subdivided.
        const double r = static_cast<double>(j) * dt;
        const int sub = r < 32.0 * dt ? 16 : 1;
        const double ds = dt / sub;
        for (int k = 0; k < sub; ++k) {
            const double rs = r + k * ds;
            const double k1w = dw, k1v = accel(rs, w, dw);
            const double k2w = dw + 0.5 * ds * k1v, k2v = accel(rs + 0.5 * ds, w + 0.5 * ds * k1w, k2w);
            const double k3w = dw + 0.5 * ds * k2v, k3v = accel(rs + 0.5 * ds, w + 0.5 * ds * k2w, k3w);
            const double k4w = dw + ds * k3v, k4v = accel(rs + ds, w + ds * k3w, k4w);
            w += ds / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
            dw += ds / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        }
        if (record) shot.samples[j + 1] = w;
    }
    if (w < 0.0) shot.outcome = ShotOutcome::crosses_zero;
    else if (dw > 0.0) shot.outcome = ShotOutcome::turns_up;
    return shot;
}

/// Decaying solution of the linearised equation  -w'' - (N-1)/r w' + w = 0,
/// normalised by its value at r0.
inline double tail_ratio(int N, double r, double r0)
{
    switch (N) {
    case 1: return std::exp(-(r - r0));
    case 3: return r0 / r * std::exp(-(r - r0));
    default: return std::cyl_bessel_k(0.0, r) / std::cyl_bessel_k(0.0, r0);
    }
}

/// Sup over half-grid nodes of the radial ODE residual, sixth-order stencils.
inline double standard_residual(int N, double p, const std::vector<double>& w, double h)
{
    const long M = static_cast<long>(w.size());
    auto at = [&](long j) { return j < 0 ? w[static_cast<std::size_t>(-j)] : w[static_cast<std::size_t>(j)]; };
    double worst = 0.0, peak = 0.0;
    for (double v : w) peak = std::max(peak, std::abs(v));
    for (long i = 0; i + 3 < M; ++i) {
        const double d2 = (2.0 * (at(i + 3) + at(i - 3)) - 27.0 * (at(i + 2) + at(i - 2))
                           + 270.0 * (at(i + 1) + at(i - 1)) - 490.0 * at(i)) / (180.0 * h * h);
        const double d1 = ((at(i + 3) - at(i - 3)) - 9.0 * (at(i + 2) - at(i - 2))
                           + 45.0 * (at(i + 1) - at(i - 1))) / (60.0 * h);
        const double r = static_cast<double>(i) * h;
        const double lap = i == 0 ? N * d2 : d2 + (N - 1.0) / r * d1;
        const double v = at(i);
        const double res = lap - v + std::pow(std::abs(v), p - 2.0) * v;
        worst = std::max(worst, std::abs(res));
    }
    return worst / peak;
}

} // namespace detail

/// Positive decreasing solution w of -dw + w = w^{p-1} sampled on `grid`
/// (line grid with an odd node count, or radial grid of the same dimension).
/// `tol` is the relative size below which the numerical trajectory is replaced
/// by the analytic decaying tail.
inline Field solve_standard(int dim, double p, const GridPtr& grid, double tol = 1e-9,
                            const ShootingOptions& opt = {})
{
    require_exponent(dim, p);
    if (grid->dim() != dim) throw invalid_argument("grid dimension differs from N");
    const bool line = grid->geometry() == Geometry::line;
    if (line && grid->size() % 2 == 0) throw invalid_argument("line grid needs an odd node count so x=0 is a node");

    const double h = grid->spacing();
    const std::size_t half = line ? (grid->size() - 1) / 2 + 1 : grid->size();
    int substeps = std::max(1, static_cast<int>(std::ceil(h / opt.max_step - 1e-12)));
    auto outcome = [&](double w0) {
        return detail::shoot(dim, p, w0, h / substeps, (half - 1) * substeps, false).outcome;
    };

    // Bracket w(0): at w0 = 1 the trajectory sits on the constant equilibrium,
    // below the ground state every trajectory turns back up.
    double lo = 1.0, hi = 2.0;
    while (outcome(hi) != detail::ShotOutcome::crosses_zero) {
        lo = hi;
        hi *= 2.0;
        if (hi > opt.w0_max) throw convergence_error("shooting: no bracket for w(0) below w0_max");
    }
    // Near the origin the linearised frequency is sqrt((p-1) w0^{p-2});
    // refine the RK4 step so it resolves that scale.
    const double freq = std::sqrt((p - 1.0) * std::pow(hi, p - 2.0));
    substeps = std::max(substeps, static_cast<int>(std::ceil(h * freq / opt.phase_step - 1e-12)));
    const double dt = h / substeps;
    const std::size_t steps = (half - 1) * static_cast<std::size_t>(substeps);

    int iter = 0;
    while (hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi) {
        if (++iter > opt.max_bisections) throw convergence_error("shooting: bisection did not converge");
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const auto o = outcome(mid);
        if (o == detail::ShotOutcome::crosses_zero) hi = mid;
        else if (o == detail::ShotOutcome::turns_up) lo = mid;
        else { lo = hi = mid; break; }
    }

    const auto below = detail::shoot(dim, p, lo, dt, steps, true);
    const auto above = detail::shoot(dim, p, hi, dt, steps, true);
    const double w0 = 0.5 * (lo + hi);

    // Fine profile: the bracketing trajectories agree until the unstable
    // growing mode separates them, after which the analytic tail is used.
    std::vector<double> fine(steps + 1, 0.0);
    std::size_t match = steps + 1;
    for (std::size_t j = 0; j <= steps; ++j) {
        const double a = below.samples[j], b = above.samples[j];
        if (!std::isfinite(a) || !std::isfinite(b)) { match = j; break; }
        const double mid = 0.5 * (a + b);
        if (std::abs(a - b) > opt.divergence * mid || mid < tol * w0) { match = j; break; }
        fine[j] = mid;
    }
    if (match < 8) throw convergence_error("shooting: trajectories diverge immediately");
    const std::size_t anchor = match - 1;
    const double r0 = static_cast<double>(anchor) * dt;
    for (std::size_t j = match; j <= steps; ++j)
        fine[j] = fine[anchor] * detail::tail_ratio(dim, static_cast<double>(j) * dt, r0);

    // Check the residual at a stride resolving the profile without
    // drowning the stencils in rounding error.
    const auto stride = static_cast<std::size_t>(std::max(1.0, std::round(0.05 / (freq * dt))));
    std::vector<double> coarse;
    for (std::size_t j = 0; j <= steps; j += stride) coarse.push_back(fine[j]);
    const double residual = detail::standard_residual(dim, p, coarse, dt * static_cast<double>(stride));
    if (!(residual < opt.residual_bound))
        throw convergence_error("shooting: ODE residual " + std::to_string(residual) + " exceeds bound");

    std::vector<double> w(half);
    for (std::size_t i = 0; i < half; ++i) w[i] = fine[i * static_cast<std::size_t>(substeps)];
    w[half - 1] = 0.0; // Dirichlet

    if (!line) return Field(grid, std::move(w));
    std::vector<double> full(grid->size());
    const std::size_t centre = half - 1;
    for (std::size_t i = 0; i < half; ++i) full[centre + i] = full[centre - i] = w[i];
    return Field(grid, std::move(full));
}

/// Q_p sampled on a grid together with its integral invariants.
struct GroundState {
    int dim = 0;
    double exponent = 0.0;
    Field profile;
    double mass_sq = 0.0; ///< |Q_p|_2^2
    double kinetic = 0.0; ///< int |grad Q_p|^2
    double pnorm = 0.0;   ///< int |Q_p|^p

    const Grid& grid() const { return profile.grid(); }
    const GridPtr& grid_ptr() const { return profile.grid_ptr(); }
    double mass() const { return std::sqrt(mass_sq); }

    double kinetic_defect() const { return std::abs(kinetic / mass_sq - 1.0); }
    double pnorm_defect() const { return std::abs(2.0 / exponent * pnorm / mass_sq - 1.0); }

    /// Empty when every structural invariant holds, otherwise the first failure.
    std::optional<std::string> check(double pohozaev_tol = 1e-4) const
    {
        const auto v = profile.values();
        const std::size_t n = v.size();
        const bool line = grid().geometry() == Geometry::line;
        const std::size_t centre = line ? (n - 1) / 2 : 0;
        const double peak = v[centre];
        if (!(peak > 0.0)) return "profile is not positive at the origin";
        if (kinetic_defect() > pohozaev_tol)
            return "Pohozaev chain: |kinetic/mass - 1| = " + std::to_string(kinetic_defect());
        if (pnorm_defect() > pohozaev_tol)
            return "Pohozaev chain: |(2/p) pnorm/mass - 1| = " + std::to_string(pnorm_defect());
        for (std::size_t i = centre + 1; i < n; ++i)
            if (v[i] > v[i - 1] + 1e-12 * peak) return "profile increases away from the origin";
        if (line)
            for (std::size_t i = centre; i-- > 0;)
                if (v[i] > v[i + 1] + 1e-12 * peak) return "profile increases away from the origin";
        const double edge = std::max(std::abs(v[n - 1]), line ? std::abs(v[0]) : 0.0);
        if (edge >= 1e-10 * peak) return "boundary value not negligible";
        return std::nullopt;
    }

    /// Builds the invariants from a sampled profile and validates them.
    static GroundState from_profile(int dim, double p, Field profile, double pohozaev_tol = 1e-4)
    {
        GroundState gs;
        gs.dim = dim;
        gs.exponent = p;
        gs.mass_sq = lp_norm_pow(profile.grid(), profile, 2.0);
        gs.kinetic = grad_norm_sq(profile.grid(), profile);
        gs.pnorm = lp_norm_pow(profile.grid(), profile, p);
        gs.profile = std::move(profile);
        if (auto why = gs.check(pohozaev_tol)) throw invariant_violation("ground state: " + *why);
        return gs;
    }
};

/// Grid spacing of w maps onto Q through the stretch factor sqrt(l/k).
inline GridSpec qp_grid_for(const GridSpec& w_spec, int dim, double p)
{
    GridSpec q = w_spec;
    q.extent = w_spec.extent / qp_scaling(dim, p).stretch();
    return q;
}

inline GroundState to_qp(const Field& w, int dim, double p)
{
    require_exponent(dim, p);
    const auto sc = qp_scaling(dim, p);
    auto qgrid = make_grid(qp_grid_for(w.grid().spec(), dim, p));
    const double amp = std::pow(sc.l, 1.0 / (p - 2.0));
    std::vector<double> q(w.size());
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = amp * w[i];
    return GroundState::from_profile(dim, p, Field(std::move(qgrid), std::move(q)));
}

/// Q-grid used when none is given: line [-L, L] (N = 1) or ball of radius L,
/// at least 8001 nodes, L >= 40 and large enough that Q has decayed by e^{-30},
/// spacing at most 0.01 (line) / 0.005 (radial).
inline GridSpec default_qp_grid(int dim, double p)
{
    require_exponent(dim, p);
    const double extent = std::max(40.0, 30.0 / qp_scaling(dim, p).stretch());
    const bool line = dim == 1;
    const double span = line ? 2.0 * extent : extent;
    const double max_h = line ? 0.01 : 0.005;
    auto n = static_cast<std::size_t>(std::ceil(span / max_h - 1e-9)) + 1;
    n = std::max<std::size_t>(n, 8001);
    if (n % 2 == 0) ++n;
    return {dim, line ? Geometry::line : Geometry::radial, extent, n};
}

inline GroundState compute_ground_state(int dim, double p, std::optional<GridSpec> q_spec = std::nullopt)
{
    const GridSpec q = q_spec.value_or(default_qp_grid(dim, p));
    GridSpec wspec = q;
    wspec.extent = q.extent * qp_scaling(dim, p).stretch();
    auto w = solve_standard(dim, p, make_grid(wspec));
    return to_qp(w, dim, p);
}

/// Sharp Gagliardo-Nirenberg constant p / (2 |Q_p|_2^{p-2}).
inline double gn_constant(const GroundState& gs)
{
    return gs.exponent / (2.0 * std::pow(gs.mass_sq, (gs.exponent - 2.0) / 2.0));
}

/// int|u|^p divided by the sharp Gagliardo-Nirenberg bound; <= 1 for every u.
inline double gn_ratio(const Field& u, const GroundState& gs)
{
    const int N = gs.dim;
    const double p = gs.exponent;
    if (u.grid().dim() != N) throw invalid_argument("gn_ratio: field dimension differs from ground state");
    const double mass_sq = lp_norm_pow(u.grid(), u, 2.0);
    const double kin = grad_norm_sq(u.grid(), u);
    if (!(mass_sq > 0.0) || !(kin > 0.0)) throw invalid_argument("gn_ratio: zero field");
    const double lhs = lp_norm_pow(u.grid(), u, p);
    const double rhs = gn_constant(gs) * std::pow(mass_sq, (2.0 * N - p * (N - 2.0)) / 4.0)
        * std::pow(kin, N * (p - 2.0) / 4.0);
    return lhs / rhs;
}

} // namespace kml
