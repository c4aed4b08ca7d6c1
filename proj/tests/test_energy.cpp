#include "kml/energy.hpp"
#include "kml/experiments.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace kml;

namespace {

const GroundState& cached(int N, double p)
{
    static GroundStateStore store;
    return *store.get(N, p);
}

ProblemParams params(int N, double p, double a, double b, double c = 1.0, double qp = 0.0)
{
    ProblemParams P;
    P.dim = N;
    P.p = p;
    P.a = a;
    P.b = b;
    P.c = c;
    P.qp_mass = qp;
    return P;
}

// Smooth random field: a few Gaussian bumps, zero on Dirichlet nodes.
Field random_bumps(const GridPtr& g, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const bool line = g->geometry() == Geometry::line;
    double amp[3], ctr[3], wid[3];
    for (int k = 0; k < 3; ++k) {
        amp[k] = 1.5 * U(rng);
        ctr[k] = line ? 2.0 * U(rng) : 0.0;
        wid[k] = 0.6 + 0.5 * (U(rng) + 1.0);
    }
    Field f = Field::sample(g, [&](double x) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += amp[k] * std::exp(-std::pow((x - ctr[k]) / wid[k], 2));
        return s;
    });
    for (std::size_t i = 0; i < f.size(); ++i)
        if (g->is_dirichlet(i)) f[i] = 0.0;
    return f;
}

} // namespace

TEST(Energy, ZeroField)
{
    auto g = make_grid(1, Geometry::line, 5.0, 501);
    const auto e = energy(Field(g), params(1, 3.0, 1.0, 1.0));
    EXPECT_EQ(e.total, 0.0);
    EXPECT_EQ(e.g, 0.0);
    EXPECT_EQ(e.nonlinear, 0.0);
    auto grad = gradient(Field(g), params(1, 3.0, 1.0, 1.0));
    EXPECT_EQ(grad.max_abs(), 0.0);
}

TEST(Energy, GroundStateIdentity)
{
    for (auto [N, p] : std::vector<std::pair<int, double>>{{1, 3.0}, {3, 4.0}}) {
        const auto& gs = cached(N, p);
        const double t = gs.mass_sq;
        for (double a : {1.0, 2.5}) {
            const double b = 0.7;
            const double expect = (a - 1.0) / 2.0 * t + b / 4.0 * t * t;
            EXPECT_NEAR(energy(gs.profile, params(N, p, a, b)).total, expect, 1e-4 * std::abs(expect) + 1e-4 * t);
        }
    }
}

TEST(Energy, TheoryProfileMatchesI0)
{
    const auto& gs = cached(1, 3.0);
    for (double c : {1.0, 2.0, 5.0}) {
        auto P = params(1, 3.0, 1.0, 1.0, c, gs.mass());
        const double m = solve_mc(P).m;
        auto v = minimizer_profile(P, gs, m);
        const auto e = energy(v, P);
        EXPECT_NEAR(e.total, i0_of(P, m), 1e-3 * std::abs(i0_of(P, m)));
        EXPECT_NEAR(e.g, m * m, 1e-3 * m * m);
        EXPECT_NEAR(multiplier_estimate(e, P), mu_of(P, m), 1e-2 * std::abs(mu_of(P, m)));
        EXPECT_LT(pohozaev_residual(e, P), 1e-3);
    }
}

TEST(Energy, RejectsBadInput)
{
    auto g = make_grid(1, Geometry::line, 5.0, 501);
    EXPECT_THROW(energy(Field(g), params(1, 3.0, 0.0, 1.0)), invalid_argument);
    EXPECT_THROW(energy(Field(g), params(2, 3.0, 1.0, 1.0)), invalid_argument);
    auto h = make_grid(1, Geometry::line, 6.0, 501);
    EXPECT_THROW(energy(Field(g), params(1, 3.0, 1.0, 1.0), Field(h)), grid_mismatch);
}

// Directional derivative check: 50 seeded pairs covering b = 0, b > 0 and V != 0.
TEST(Gradient, CentralDifference)
{
    std::mt19937_64 rng(20240601);
    const double eps = 1e-5;
    int cases = 0;
    for (int k = 0; k < 50; ++k) {
        const int N = 1 + k % 3;
        auto g = make_grid(N, N == 1 ? Geometry::line : Geometry::radial, 6.0, 1201);
        const double p = N == 3 ? 4.0 : 3.0 + 0.5 * (k % 4);
        const double b = k % 2 == 0 ? 0.0 : 0.8;
        auto P = params(N, p, 1.0, b);
        std::optional<Field> V;
        if (k % 5 < 2) V = potential_field(g, PotentialSpec::harmonic(0.5 + 0.1 * (k % 7)));
        const Field* Vp = V ? &*V : nullptr;
        const Field u = random_bumps(g, rng);
        const Field d = random_bumps(g, rng);
        Field up = u, um = u;
        for (std::size_t i = 0; i < u.size(); ++i) {
            up[i] += eps * d[i];
            um[i] -= eps * d[i];
        }
        const double fd = (energy(up, P, Vp).total - energy(um, P, Vp).total) / (2.0 * eps);
        const double an = inner(gradient(u, P, Vp), d);
        const double scale = std::max({std::abs(fd), std::abs(an), 1e-12});
        EXPECT_LT(std::abs(fd - an) / scale, 1e-6) << "pair " << k << " N=" << N << " b=" << b << " V=" << bool(V);
        ++cases;
    }
    EXPECT_EQ(cases, 50);
}

TEST(Gradient, GroundStateEquation)
{
    // With a = k, b = 0 the gradient at Q_p is -l Q_p. Spacing 0.0025 keeps the
    // second-order discretization error of the Laplacian below the tolerance.
    for (auto [N, p] : std::vector<std::pair<int, double>>{{1, 3.0}, {3, 4.0}}) {
        const GridSpec fine = N == 1 ? GridSpec{1, Geometry::line, 20.0, 16001} : GridSpec{3, Geometry::radial, 60.0, 24001};
        const auto gs = compute_ground_state(N, p, fine);
        const auto sc = qp_scaling(N, p);
        auto grad = gradient(gs.profile, params(N, p, sc.k, 0.0));
        Field res(gs.grid_ptr()), rhs(gs.grid_ptr());
        for (std::size_t i = 0; i < grad.size(); ++i) {
            res[i] = grad[i] + sc.l * gs.profile[i];
            rhs[i] = odd_power(gs.profile[i], p);
        }
        EXPECT_LT(l2_norm(res) / l2_norm(rhs), 1e-5) << N << " " << p;
    }
}

TEST(Gradient, ZeroOnDirichletNodes)
{
    auto g = make_grid(1, Geometry::line, 3.0, 301);
    auto u = Field::sample(g, [](double x) { return std::cos(x); });
    auto grad = gradient(u, params(1, 3.0, 1.0, 1.0));
    EXPECT_EQ(grad[0], 0.0);
    EXPECT_EQ(grad[300], 0.0);
}

TEST(Multiplier, Properties)
{
    auto g = make_grid(1, Geometry::line, 10.0, 2001);
    auto u = Field::sample(g, [](double x) { return 3.0 * std::exp(-x * x); });
    auto P = params(1, 3.0, 1.0, 0.1);
    Field u2 = u;
    for (double& v : u2.values()) v *= 2.0;
    EXPECT_NE(multiplier_estimate(u, P), multiplier_estimate(u2, P));
    // choose a so that int |u|^p = (a + b g) g
    const auto e = energy(u, P);
    P.a = e.pnorm / e.g - P.b * e.g;
    ASSERT_GT(P.a, 0.0);
    EXPECT_NEAR(multiplier_estimate(u, P), 0.0, 1e-12);
    EXPECT_THROW(multiplier_estimate(Field(g), P), invalid_argument);
}

TEST(Pohozaev, Residuals)
{
    auto g = make_grid(1, Geometry::line, 10.0, 2001);
    auto gauss = Field::sample(g, [](double x) { return std::exp(-x * x); });
    EXPECT_GT(pohozaev_residual(gauss, params(1, 3.0, 1.0, 1.0)), 1e-2);
    // Q_p satisfies the identity with a = k, b = 0; with a = 1 when N(p-2) = 4.
    const auto& q3 = cached(1, 3.0);
    EXPECT_LT(pohozaev_residual(q3.profile, params(1, 3.0, qp_scaling(1, 3.0).k, 0.0)), 1e-3);
    const auto& q6 = cached(1, 6.0);
    EXPECT_LT(pohozaev_residual(q6.profile, params(1, 6.0, 1.0, 0.0)), 1e-3);
}

TEST(Scaling, IdentityAndMass)
{
    auto g = make_grid(1, Geometry::line, 20.0, 4001);
    auto u = Field::sample(g, [](double x) { return std::exp(-x * x / 2.0); });
    auto same = scale_mass_preserving(u, 1.0);
    for (std::size_t i = 0; i < u.size(); ++i) ASSERT_NEAR(same[i], u[i], 1e-10);
    auto twice = scale_mass_preserving(u, 2.0);
    EXPECT_NEAR(l2_norm(twice), l2_norm(u), 1e-6 * l2_norm(u));
    EXPECT_NEAR(grad_norm_sq(twice), 4.0 * grad_norm_sq(u), 1e-4 * 4.0 * grad_norm_sq(u));
    EXPECT_THROW(scale_mass_preserving(u, 0.0), invalid_argument);
    EXPECT_THROW(scale_mass_preserving(u, 0.05), invalid_argument); // spreads beyond the grid
}

TEST(Scaling, RadialKinetic)
{
    auto g = make_grid(3, Geometry::radial, 15.0, 12001);
    auto u = Field::sample(g, [](double r) { return std::exp(-r * r / 2.0); });
    auto half = scale_mass_preserving(u, 0.5);
    EXPECT_NEAR(l2_norm(half), l2_norm(u), 1e-6 * l2_norm(u));
    EXPECT_NEAR(grad_norm_sq(half), 0.25 * grad_norm_sq(u), 1e-4 * 0.25 * grad_norm_sq(u));
}
