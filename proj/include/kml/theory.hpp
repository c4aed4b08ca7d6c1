#pragma once

// Closed-form predictions for the autonomous problem (V = 0): m_c, i0(c),
// mu_c, the threshold mass c_*, the existence set T and the large-mass
// limits. Everything is expressed through |Q_p|_2, which comes from the
// ground-state solver.
//
// m_c solves  a + b m^2 = K m^q  with
//   K = (N(p-2)/4) c^{(2N-p(N-2))/2} / |Q_p|_2^{p-2},   q = (N(p-2)-4)/2.

#include "kml/error.hpp"
#include "kml/grid.hpp"
#include "kml/ground_state.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace kml {

struct ProblemParams {
    double a = 1.0;
    double b = 1.0;
    double p = 3.0;
    int dim = 1;
    double c = 1.0;
    double qp_mass = 0.0; ///< |Q_p|_2

    void validate() const
    {
        if (dim < 1 || dim > 3) throw invalid_argument("dimension must be 1, 2 or 3");
        require_exponent(dim, p);
        if (!(a > 0.0) || !(b > 0.0)) throw invalid_argument("a and b must be positive");
        if (!(c > 0.0) || !std::isfinite(c)) throw invalid_argument("mass c must be positive");
        if (!(qp_mass > 0.0) || !std::isfinite(qp_mass)) throw invalid_argument("|Q_p|_2 must be positive");
    }

    ProblemParams with_mass(double m) const
    {
        ProblemParams q = *this;
        q.c = m;
        return q;
    }
};

enum class Regime { subcritical_p_lt_2Np4, critical_2Np4, between, critical_2Np8, supercritical };

inline std::string to_string(Regime r)
{
    switch (r) {
    case Regime::subcritical_p_lt_2Np4: return "subcritical_p_lt_2Np4";
    case Regime::critical_2Np4: return "critical_2Np4";
    case Regime::between: return "between";
    case Regime::critical_2Np8: return "critical_2Np8";
    case Regime::supercritical: return "supercritical";
    }
    return "?";
}

/// Exponents within this distance of (2N+4)/N or (2N+8)/N count as critical.
inline constexpr double exponent_tolerance = 1e-9;

inline double lower_critical_exponent(int N) { return (2.0 * N + 4.0) / N; }
inline double upper_critical_exponent(int N) { return (2.0 * N + 8.0) / N; }

inline Regime classify(int N, double p)
{
    require_exponent(N, p);
    const double p4 = lower_critical_exponent(N), p8 = upper_critical_exponent(N);
    if (std::abs(p - p4) <= exponent_tolerance) return Regime::critical_2Np4;
    if (std::abs(p - p8) <= exponent_tolerance) return Regime::critical_2Np8;
    if (p < p4) return Regime::subcritical_p_lt_2Np4;
    if (p < p8) return Regime::between;
    return Regime::supercritical;
}

inline void require_below_upper_critical(int N, double p, const char* who)
{
    const Regime r = classify(N, p);
    if (r == Regime::critical_2Np8 || r == Regime::supercritical)
        throw invalid_argument(std::string(who) + " requires 2 < p < (2N+8)/N");
}

struct Coefficients {
    double D1;
    double D2;
};

/// D1 = (N(p-2)-4)/(2N(p-2)), D2 = (2N+8-Np)/(4N(p-2)). The form
/// (Np-2N-4)/(2N(p-2)) for D1 is the same number.
inline Coefficients coefficients(int N, double p)
{
    require_below_upper_critical(N, p, "coefficients");
    const double s = N * (p - 2.0);
    return {(s - 4.0) / (2.0 * s), (2.0 * N + 8.0 - N * p) / (4.0 * s)};
}

/// K and q of the scalar equation for m_c.
struct McEquation {
    double K;
    double q;
    double a;
    double b;

    double h(double m) const { return a + b * m * m - K * std::pow(m, q); }
    double relative_residual(double m) const
    {
        const double lhs = a + b * m * m, rhs = K * std::pow(m, q);
        return std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs));
    }
};

inline McEquation mc_equation(const ProblemParams& P)
{
    P.validate();
    const int N = P.dim;
    const double p = P.p;
    const double K = N * (p - 2.0) / 4.0 * std::pow(P.c, (2.0 * N - p * (N - 2.0)) / 2.0)
        / std::pow(P.qp_mass, p - 2.0);
    return {K, (N * (p - 2.0) - 4.0) / 2.0, P.a, P.b};
}

inline double i0_of(const ProblemParams& P, double m)
{
    const auto [D1, D2] = coefficients(P.dim, P.p);
    return P.a * D1 * m * m - P.b * D2 * m * m * m * m;
}

/// mu_c = -((2N-p(N-2))/4) c^{p-2-N(p-2)/2} m^{N(p-2)/2} / |Q_p|_2^{p-2}.
inline double mu_of(const ProblemParams& P, double m)
{
    P.validate();
    const int N = P.dim;
    const double p = P.p;
    return -(2.0 * N - p * (N - 2.0)) / 4.0 * std::pow(P.c, p - 2.0 - N * (p - 2.0) / 2.0)
        / std::pow(P.qp_mass, p - 2.0) * std::pow(m, N * (p - 2.0) / 2.0);
}

/// Threshold mass below which i0 vanishes.
inline double c_star(const ProblemParams& P)
{
    P.validate();
    const int N = P.dim;
    const double p = P.p;
    switch (classify(N, p)) {
    case Regime::subcritical_p_lt_2Np4: return 0.0;
    case Regime::critical_2Np4: return std::pow(P.a, N / 4.0) * P.qp_mass;
    case Regime::between: {
        const double e8 = 2.0 * N + 8.0 - N * p;
        const double inner = 2.0 * P.a / P.b * (N * (p - 2.0) - 4.0) / e8;
        const double base = 4.0 * P.a * std::pow(P.qp_mass, p - 2.0) / e8
            * std::pow(inner, (4.0 - N * (p - 2.0)) / 4.0);
        return std::pow(base, 2.0 / (2.0 * N - p * (N - 2.0)));
    }
    default: throw invalid_argument("c_star requires 2 < p < (2N+8)/N");
    }
}

/// Mass above which i0 = -infinity when p = (2N+8)/N.
inline double critical_mass_2Np8(const ProblemParams& P)
{
    const int N = P.dim;
    return std::pow(P.b / 2.0 * std::pow(P.qp_mass, 8.0 / N), N / (8.0 - 2.0 * N));
}

inline bool near_mass(double c, double ref) { return std::abs(c - ref) <= 1e-12 * std::max(1.0, ref); }

struct ExistenceRegion {
    Regime regime;
    bool in_T = false;          ///< a minimizer of i0 exists
    bool at_threshold = false;  ///< c equals the boundary mass
    bool i0_finite = true;
    double threshold = 0.0;     ///< c_* or the critical mass at p = (2N+8)/N
    std::string descriptor;
};

inline ExistenceRegion existence_region(const ProblemParams& P)
{
    P.validate();
    ExistenceRegion r;
    r.regime = classify(P.dim, P.p);
    switch (r.regime) {
    case Regime::subcritical_p_lt_2Np4:
        r.in_T = true;
        r.descriptor = "T=(0,inf)";
        break;
    case Regime::critical_2Np4:
        r.threshold = c_star(P);
        r.at_threshold = near_mass(P.c, r.threshold);
        r.in_T = P.c > r.threshold && !r.at_threshold;
        r.descriptor = "T=(c_*,inf)";
        break;
    case Regime::between:
        r.threshold = c_star(P);
        r.at_threshold = near_mass(P.c, r.threshold);
        r.in_T = P.c >= r.threshold || r.at_threshold;
        r.descriptor = "T=[c_*,inf)";
        break;
    case Regime::critical_2Np8:
        r.threshold = critical_mass_2Np8(P);
        r.at_threshold = near_mass(P.c, r.threshold);
        r.i0_finite = P.c <= r.threshold || r.at_threshold;
        r.descriptor = r.i0_finite ? "i0=0 without minimizer" : "i0=-inf";
        break;
    case Regime::supercritical:
        r.i0_finite = false;
        r.descriptor = "i0=-inf for all c (unbounded below)";
        break;
    }
    return r;
}

struct McSolution {
    double m = 0.0;
    bool at_threshold = false;
};

/// m_c: the positive root of a + b m^2 = K m^q minimizing a D1 m^2 - b D2 m^4
/// (ties go to the larger root). At p = (2N+4)/N the closed form is used and
/// cross-checked against the root-finder.
inline McSolution solve_mc(const ProblemParams& P)
{
    const auto region = existence_region(P);
    if (!region.in_T && !region.at_threshold)
        throw outside_existence_region("c = " + std::to_string(P.c) + " lies outside " + region.descriptor);
    const int N = P.dim;
    if (region.regime == Regime::critical_2Np8 || region.regime == Regime::supercritical)
        throw outside_existence_region("no minimizer of i0 for p >= (2N+8)/N");

    const auto eq = mc_equation(P);
    if (region.at_threshold) {
        if (region.regime == Regime::critical_2Np4) return {0.0, true};
        const auto [D1, D2] = coefficients(N, P.p);
        return {std::sqrt(P.a * D1 / (P.b * D2)), true};
    }

    // Sign changes of h on a log grid, then bisection in log m. The turning
    // point of h is added so two nearly coincident roots just above c_* are
    // still separated.
    const double lo_log = std::log(1e-8), hi_log = std::log(1e8);
    const int samples = 4000;
    std::vector<double> grid_m;
    for (int k = 0; k <= samples; ++k) grid_m.push_back(std::exp(lo_log + (hi_log - lo_log) * k / samples));
    if (eq.q > 0.0 && eq.q < 2.0) {
        const double turn = std::pow(eq.K * eq.q / (2.0 * eq.b), 1.0 / (2.0 - eq.q));
        if (turn > grid_m.front() && turn < grid_m.back()) grid_m.push_back(turn);
        std::sort(grid_m.begin(), grid_m.end());
    }
    std::vector<double> roots;
    double prev_m = grid_m.front(), prev_h = eq.h(prev_m);
    if (prev_h == 0.0) roots.push_back(prev_m);
    for (std::size_t k = 1; k < grid_m.size(); ++k) {
        const double m = grid_m[k];
        const double hv = eq.h(m);
        if (hv == 0.0) {
            roots.push_back(m);
        } else if ((prev_h < 0.0) != (hv < 0.0) && prev_h != 0.0) {
            double lo = prev_m, hi = m;
            const bool lo_neg = prev_h < 0.0;
            for (int it = 0; it < 200 && (hi - lo) > 1e-14 * hi; ++it) {
                const double mid = std::sqrt(lo * hi);
                const double hm = eq.h(mid);
                if (hm == 0.0) {
                    lo = hi = mid;
                    break;
                }
                if ((hm < 0.0) == lo_neg)
                    lo = mid;
                else
                    hi = mid;
            }
            roots.push_back(0.5 * (lo + hi));
        }
        prev_m = m;
        prev_h = hv;
    }
    if (roots.empty()) throw convergence_error("no positive root of the m_c equation in [1e-8, 1e8]");

    double best = roots.front();
    for (double m : roots) {
        const double gm = i0_of(P, m), gb = i0_of(P, best);
        if (gm < gb || (gm == gb && m > best)) best = m;
    }

    if (region.regime == Regime::critical_2Np4) {
        const double closed = std::sqrt((std::pow(P.c / P.qp_mass, 4.0 / N) - P.a) / P.b);
        if (std::abs(closed - best) > 1e-8 * closed)
            throw invariant_violation("closed form and root-finder disagree for m_c at p=(2N+4)/N");
        best = closed;
    }
    return {best, false};
}

/// The unique minimizer of i0, v_c(x) = (c/|Q|)(m/c)^{N/2} Q((m/c)x), sampled
/// on the ground-state grid stretched by c/m so it keeps the same resolution.
inline Field minimizer_profile(const ProblemParams& P, const GroundState& gs, std::optional<double> m_opt = {})
{
    if (gs.dim != P.dim || gs.exponent != P.p) throw invalid_argument("minimizer_profile: ground state (N, p) differs");
    const double m = m_opt ? *m_opt : solve_mc(P).m;
    if (!(m > 0.0)) throw outside_existence_region("m_c = 0: the minimizer has vanished");
    const double stretch = P.c / m;
    GridSpec spec = gs.grid().spec();
    spec.extent *= stretch;
    auto grid = make_grid(spec);
    const double amp = P.c / P.qp_mass * std::pow(m / P.c, P.dim / 2.0);
    std::vector<double> v(gs.profile.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = amp * gs.profile[i];
    return Field(std::move(grid), std::move(v));
}

enum class AsymptoticKind { ratio_to_zero, finite_limit, ratio_to_infinity };

inline std::string to_string(AsymptoticKind k)
{
    switch (k) {
    case AsymptoticKind::ratio_to_zero: return "ratio->0";
    case AsymptoticKind::finite_limit: return "finite_limit";
    case AsymptoticKind::ratio_to_infinity: return "ratio->inf";
    }
    return "?";
}

struct AsymptoticClass {
    AsymptoticKind kind;
    double limit = std::numeric_limits<double>::quiet_NaN(); ///< only for p = 4
    bool empirical = false; ///< decided by a c-sweep rather than a theorem
};

/// Large-c behaviour of m_c/c. p < 4 and p = 4 are decided in closed form;
/// for 4 < p < (2N+8)/N only the dichotomy is known, so the branch is read
/// off a geometric c-sweep.
inline AsymptoticClass asymptotic_class(ProblemParams P)
{
    const int N = P.dim;
    require_below_upper_critical(N, P.p, "asymptotic_class");
    if (std::abs(P.p - 4.0) <= exponent_tolerance)
        return {AsymptoticKind::finite_limit,
                std::pow(N / (2.0 * P.b * P.qp_mass * P.qp_mass), 1.0 / (4.0 - N)), false};
    if (P.p < 4.0) return {AsymptoticKind::ratio_to_zero, std::numeric_limits<double>::quiet_NaN(), false};

    P.c = 1.0;
    const double base = std::max(1.0, 2.0 * c_star(P));
    std::vector<double> ratio;
    for (int k = 0; k < 6; ++k) {
        const double c = base * std::pow(10.0, k);
        ratio.push_back(solve_mc(P.with_mass(c)).m / c);
    }
    bool up = true;
    for (std::size_t i = 1; i < ratio.size(); ++i) up = up && ratio[i] > ratio[i - 1];
    return {up ? AsymptoticKind::ratio_to_infinity : AsymptoticKind::ratio_to_zero,
            std::numeric_limits<double>::quiet_NaN(), true};
}

/// Limit of the scaled multiplier along large masses, -4|Q|^{p-2}/(2N-p(N-2)).
inline double rho_limit(int N, double p, double qp_mass)
{
    if (std::abs(p - 4.0) <= exponent_tolerance) throw invalid_argument("rho_limit is not defined at p = 4");
    require_below_upper_critical(N, p, "rho_limit");
    return -4.0 * std::pow(qp_mass, p - 2.0) / (2.0 * N - p * (N - 2.0));
}

struct TheoryPrediction {
    double D1 = 0.0;
    double D2 = 0.0;
    double m_c = 0.0;
    double i0 = 0.0;
    double mu_c = 0.0;
    Regime regime = Regime::subcritical_p_lt_2Np4;
    double c_star = 0.0;
    bool in_T = false;
    bool at_threshold = false;
    double residual = 0.0; ///< relative residual of the m_c equation
};

inline TheoryPrediction predict(const ProblemParams& P)
{
    TheoryPrediction t;
    const auto region = existence_region(P);
    t.regime = region.regime;
    require_below_upper_critical(P.dim, P.p, "predict");
    const auto co = coefficients(P.dim, P.p);
    t.D1 = co.D1;
    t.D2 = co.D2;
    t.c_star = c_star(P);
    t.in_T = region.in_T;
    t.at_threshold = region.at_threshold;
    if (!region.in_T && !region.at_threshold) return t; // i0 = 0, no minimizer
    const auto sol = solve_mc(P);
    t.m_c = sol.m;
    t.at_threshold = sol.at_threshold;
    t.i0 = i0_of(P, sol.m);
    t.mu_c = mu_of(P, sol.m);
    t.residual = sol.m > 0.0 ? mc_equation(P).relative_residual(sol.m) : 0.0;
    return t;
}

/// count values from start to stop, equally spaced in log.
inline std::vector<double> geometric_sweep(double start, double stop, int count)
{
    if (!(start > 0.0) || !(stop > 0.0) || count < 1) throw invalid_argument("geometric sweep needs start, stop > 0 and count >= 1");
    // Interior values are rounded to 12 significant digits so that 1..64 gives 4, not 3.9999999999999996.
    std::vector<double> out;
    for (int k = 0; k < count; ++k) {
        if (k == 0 || count == 1) { out.push_back(start); continue; }
        if (k == count - 1) { out.push_back(stop); continue; }
        const double v = start * std::pow(stop / start, static_cast<double>(k) / (count - 1));
        const double scale = std::pow(10.0, 11 - static_cast<int>(std::floor(std::log10(v))));
        out.push_back(std::round(v * scale) / scale);
    }
    return out;
}

} // namespace kml
