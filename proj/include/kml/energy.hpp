#pragma once

// The Kirchhoff energy
//
//   I_V(u) = (a/2) g + (b/4) g^2 + (1/2) int V u^2 - (1/p) int |u|^p,   g = int |grad u|^2
//
// evaluated with the grid quadrature, together with its exact discrete
// gradient. Gradients vanish on Dirichlet nodes, so admissible fields stay
// zero there.

#include "kml/error.hpp"
#include "kml/grid.hpp"
#include "kml/theory.hpp"

#include <cmath>
#include <optional>
#include <string>

namespace kml {

/// Energy functions accept b = 0 and do not need c or |Q_p|_2.
inline void require_energy_params(const ProblemParams& P, const Grid& grid)
{
    if (!(P.a > 0.0) || !(P.b >= 0.0)) throw invalid_argument("energy needs a > 0 and b >= 0");
    if (!(P.p > 2.0) || !std::isfinite(P.p)) throw invalid_argument("energy needs p > 2");
    if (P.dim != grid.dim()) throw invalid_argument("problem dimension differs from grid dimension");
}

struct EnergyBreakdown {
    double kinetic_a = 0.0;   ///< (a/2) g
    double kirchhoff_b = 0.0; ///< (b/4) g^2
    double potential = 0.0;   ///< (1/2) int V u^2
    double nonlinear = 0.0;   ///< (1/p) int |u|^p
    double total = 0.0;
    double g = 0.0;           ///< int |grad u|^2
    double mass_sq = 0.0;     ///< int u^2
    double pnorm = 0.0;       ///< int |u|^p
};

namespace detail {

inline const Field* potential_or_null(const Field* V, const Field& u)
{
    if (V) require_same_grid(u, *V);
    return V;
}

} // namespace detail

inline EnergyBreakdown energy(const Field& u, const ProblemParams& P, const Field* V = nullptr)
{
    const Grid& grid = u.grid();
    require_energy_params(P, grid);
    V = detail::potential_or_null(V, u);
    if (!u.all_finite()) throw invalid_argument("energy: non-finite field values");

    EnergyBreakdown e;
    e.g = grad_norm_sq(grid, u);
    const auto w = grid.weights();
    double m2 = 0.0, pn = 0.0, pot = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double ui = u[i];
        const double u2 = ui * ui;
        m2 += w[i] * u2;
        pn += w[i] * std::pow(std::abs(ui), P.p);
        if (V) pot += w[i] * (*V)[i] * u2;
    }
    e.mass_sq = m2;
    e.pnorm = pn;
    e.kinetic_a = 0.5 * P.a * e.g;
    e.kirchhoff_b = 0.25 * P.b * e.g * e.g;
    e.potential = 0.5 * pot;
    e.nonlinear = pn / P.p;
    e.total = e.kinetic_a + e.kirchhoff_b + e.potential - e.nonlinear;
    if (!std::isfinite(e.total)) throw invalid_argument("energy: non-finite result");
    return e;
}

inline EnergyBreakdown energy(const Field& u, const ProblemParams& P, const Field& V) { return energy(u, P, &V); }

/// sign(u) |u|^{p-1}
inline double odd_power(double u, double p)
{
    return std::copysign(std::pow(std::abs(u), p - 1.0), u);
}

/// Exact derivative of the discrete energy with respect to the quadrature
/// inner product: (a + b g)(-L u) + V u - |u|^{p-2} u, zero on Dirichlet nodes.
inline Field gradient(const Field& u, const ProblemParams& P, const Field* V = nullptr)
{
    const Grid& grid = u.grid();
    require_energy_params(P, grid);
    V = detail::potential_or_null(V, u);
    const double coef = P.a + P.b * grad_norm_sq(grid, u);
    Field out = laplacian(grid, u);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (grid.is_dirichlet(i)) continue;
        out[i] = -coef * out[i] - odd_power(u[i], P.p) + (V ? (*V)[i] * u[i] : 0.0);
    }
    return out;
}

inline Field gradient(const Field& u, const ProblemParams& P, const Field& V) { return gradient(u, P, &V); }

/// rho = <I'(u), u> / |u|_2^2 = [(a + b g) g + int V u^2 - int |u|^p] / c^2.
inline double multiplier_estimate(const EnergyBreakdown& e, const ProblemParams& P)
{
    if (!(e.mass_sq > 0.0)) throw invalid_argument("multiplier_estimate: zero field");
    return ((P.a + P.b * e.g) * e.g + 2.0 * e.potential - e.pnorm) / e.mass_sq;
}

inline double multiplier_estimate(const Field& u, const ProblemParams& P, const Field* V = nullptr)
{
    return multiplier_estimate(energy(u, P, V), P);
}

/// Relative defect in  a g + b g^2 = (N(p-2)/(2p)) int |u|^p.
inline double pohozaev_residual(const EnergyBreakdown& e, const ProblemParams& P)
{
    const double lhs = P.a * e.g + P.b * e.g * e.g;
    const double rhs = P.dim * (P.p - 2.0) / (2.0 * P.p) * e.pnorm;
    const double scale = std::max(std::abs(lhs), std::abs(rhs));
    if (!(scale > 0.0)) throw invalid_argument("pohozaev_residual: zero field");
    return std::abs(lhs - rhs) / scale;
}

inline double pohozaev_residual(const Field& u, const ProblemParams& P) { return pohozaev_residual(energy(u, P), P); }

/// u^t(x) = t^{N/2} u(t x) resampled onto target (cubic interpolation, zero
/// outside the source domain). Throws when the result has lost more than
/// 1e-4 of the mass, which means one of the two grids cannot resolve it.
inline Field scale_mass_preserving(const Field& u, double t, GridPtr target = nullptr)
{
    if (!(t > 0.0) || !std::isfinite(t)) throw invalid_argument("scale_mass_preserving needs t > 0");
    if (!target) target = u.grid_ptr();
    if (target->dim() != u.grid().dim()) throw grid_mismatch();
    const double amp = std::pow(t, u.grid().dim() / 2.0);
    Field out = Field::sample(target, [&](double x) { return amp * sample_at(u, t * x); });
    for (std::size_t i = 0; i < out.size(); ++i)
        if (target->is_dirichlet(i)) out[i] = 0.0;
    const double before = l2_norm(u), after = l2_norm(out);
    if (!(before > 0.0)) return out;
    if (std::abs(after / before - 1.0) > 1e-4)
        throw invalid_argument("scale_mass_preserving: t = " + std::to_string(t)
                               + " leaves the scaled field unresolved (mass ratio " + std::to_string(after / before)
                               + ")");
    return out;
}

} // namespace kml
