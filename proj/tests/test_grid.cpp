#include "kml/grid.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace kml;

TEST(Grid, SpacingFollowsExtentAndNodes)
{
    EXPECT_NEAR(make_grid(1, Geometry::line, 20.0, 2001)->spacing(), 0.02, 1e-15);
    EXPECT_NEAR(make_grid(3, Geometry::radial, 30.0, 3001)->spacing(), 0.01, 1e-15);
}

TEST(Grid, RejectsBadSpecs)
{
    EXPECT_THROW(make_grid(2, Geometry::line, 10.0, 100), invalid_argument);
    EXPECT_THROW(make_grid(4, Geometry::radial, 10.0, 100), invalid_argument);
    EXPECT_THROW(make_grid(1, Geometry::line, -1.0, 100), invalid_argument);
    EXPECT_THROW(make_grid(1, Geometry::line, 1.0, 4), invalid_argument);
}

TEST(Grid, DirichletNodes)
{
    auto line = make_grid(1, Geometry::line, 1.0, 101);
    EXPECT_TRUE(line->is_dirichlet(0));
    EXPECT_TRUE(line->is_dirichlet(100));
    EXPECT_FALSE(line->is_dirichlet(50));
    auto ball = make_grid(3, Geometry::radial, 1.0, 101);
    EXPECT_FALSE(ball->is_dirichlet(0));
    EXPECT_TRUE(ball->is_dirichlet(100));
}

TEST(Grid, FieldLengthMustMatch)
{
    auto g = make_grid(1, Geometry::line, 1.0, 101);
    EXPECT_THROW(Field(g, std::vector<double>(100, 0.0)), invalid_argument);
    EXPECT_THROW(Field(g, std::vector<double>(101, std::nan(""))), invalid_argument);
    auto h = make_grid(1, Geometry::line, 2.0, 101);
    EXPECT_THROW(inner(Field(g), Field(h)), grid_mismatch);
}

TEST(Integrate, ConstantGivesVolume)
{
    auto line = make_grid(1, Geometry::line, 10.0, 2001);
    EXPECT_NEAR(integrate(Field::sample(line, [](double) { return 1.0; })), 20.0, 1e-10);
    auto ball = make_grid(3, Geometry::radial, 2.0, 2001);
    EXPECT_NEAR(integrate(Field::sample(ball, [](double) { return 1.0; })), 4.0 / 3.0 * std::numbers::pi * 8.0, 1e-6);
    auto disk = make_grid(2, Geometry::radial, 3.0, 2001);
    EXPECT_NEAR(integrate(Field::sample(disk, [](double) { return 1.0; })), std::numbers::pi * 9.0, 1e-9);
}

TEST(Integrate, Gaussian)
{
    auto line = make_grid(1, Geometry::line, 10.0, 2001);
    EXPECT_NEAR(integrate(Field::sample(line, [](double x) { return std::exp(-x * x); })), std::sqrt(std::numbers::pi),
                1e-8);
    auto ball = make_grid(3, Geometry::radial, 10.0, 4001);
    EXPECT_NEAR(integrate(Field::sample(ball, [](double r) { return std::exp(-r * r); })),
                std::pow(std::numbers::pi, 1.5), 1e-4);
}

TEST(Laplacian, QuadraticOnLine)
{
    auto g = make_grid(1, Geometry::line, 5.0, 1001);
    auto L = laplacian(Field::sample(g, [](double x) { return x * x; }));
    for (std::size_t i = 1; i + 1 < g->size(); ++i) EXPECT_NEAR(L[i], 2.0, 1e-9);
    EXPECT_EQ(L[0], 0.0);
    EXPECT_EQ(L[g->size() - 1], 0.0);
}

TEST(Laplacian, QuadraticOnBall)
{
    auto g = make_grid(3, Geometry::radial, 5.0, 1001);
    const double h = g->spacing();
    auto L = laplacian(Field::sample(g, [](double r) { return r * r; }));
    for (std::size_t i = 0; i + 1 < g->size(); ++i) EXPECT_NEAR(L[i], 6.0, 10.0 * h * h) << "node " << i;
}

TEST(Laplacian, SineErrorBelowHSquared)
{
    auto g = make_grid(1, Geometry::line, 10.0, 2001);
    const double h = g->spacing();
    auto L = laplacian(Field::sample(g, [](double x) { return std::sin(x); }));
    double err = 0.0;
    for (std::size_t i = 1; i + 1 < g->size(); ++i) err = std::max(err, std::abs(L[i] + std::sin(g->node(i))));
    EXPECT_LT(err, h * h);
}

TEST(Laplacian, AdjointOfGradientForm)
{
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n01;
    for (int dim = 1; dim <= 3; ++dim) {
        auto g = make_grid(dim, dim == 1 ? Geometry::line : Geometry::radial, 3.0, 301);
        Field u(g), v(g);
        for (std::size_t i = 0; i < g->size(); ++i) {
            if (g->is_dirichlet(i)) continue;
            u[i] = n01(rng);
            v[i] = n01(rng);
        }
        auto Lu = laplacian(u);
        const double lhs = -inner(Lu, v);
        const double rhs = grad_bilinear(u, v);
        EXPECT_NEAR(lhs, rhs, 1e-10 * std::abs(rhs)) << "dim " << dim;
    }
}

TEST(GradNormSq, Examples)
{
    auto g = make_grid(1, Geometry::line, 4.0, 801);
    EXPECT_EQ(grad_norm_sq(Field::sample(g, [](double) { return 3.0; })), 0.0);
    EXPECT_NEAR(grad_norm_sq(Field::sample(g, [](double x) { return x; })), 8.0, 1e-10);
    auto fine = make_grid(1, Geometry::line, 10.0, 20001);
    EXPECT_NEAR(grad_norm_sq(Field::sample(fine, [](double x) { return std::exp(-x * x); })),
                std::sqrt(std::numbers::pi / 2.0), 1e-6);
}

TEST(GradNormSq, SecondOrderConvergence)
{
    const double exact = std::sqrt(std::numbers::pi / 2.0);
    double prev = 0.0;
    for (std::size_t n : {501u, 1001u, 2001u}) {
        auto g = make_grid(1, Geometry::line, 10.0, n);
        const double err = std::abs(grad_norm_sq(Field::sample(g, [](double x) { return std::exp(-x * x); })) - exact);
        if (prev > 0.0) {
            EXPECT_NEAR(prev / err, 4.0, 0.2);
        }
        prev = err;
    }
}

TEST(LpNormPow, Examples)
{
    auto g = make_grid(1, Geometry::line, 1.0, 201);
    EXPECT_EQ(lp_norm_pow(*g, Field(g), 3.0), 0.0);
    EXPECT_NEAR(lp_norm_pow(*g, Field::sample(g, [](double) { return 1.0; }), 3.0), 2.0, 1e-12);
    auto wide = make_grid(1, Geometry::line, 40.0, 8001);
    auto s = Field::sample(wide, [](double x) { return 1.5 / std::pow(std::cosh(x / 2.0), 2); });
    EXPECT_NEAR(lp_norm_pow(*wide, s, 2.0), 6.0, 1e-6);
    EXPECT_THROW(lp_norm_pow(*g, Field(g), 0.5), invalid_argument);
}

TEST(SampleAt, CubicInterpolationAndOutside)
{
    auto g = make_grid(1, Geometry::line, 5.0, 1001);
    auto f = Field::sample(g, [](double x) { return std::sin(x); });
    EXPECT_NEAR(sample_at(f, 0.123456), std::sin(0.123456), 1e-8);
    EXPECT_EQ(sample_at(f, 6.0), 0.0);
    auto b = make_grid(3, Geometry::radial, 5.0, 1001);
    auto e = Field::sample(b, [](double r) { return std::exp(-r * r); });
    EXPECT_NEAR(sample_at(e, -0.5), std::exp(-0.25), 1e-9); // radial fields are even
}
