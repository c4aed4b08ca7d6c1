#include "kml/experiments.hpp"
#include "kml/ground_state.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace kml;

namespace {

// (p/2)^{1/(p-2)} sech^{2/(p-2)}((p-2) x / 2) solves -w'' + w = w^{p-1} on the line.
double w_exact(double p, double x)
{
    return std::pow(p / 2.0, 1.0 / (p - 2.0)) * std::pow(1.0 / std::cosh((p - 2.0) * x / 2.0), 2.0 / (p - 2.0));
}

const GroundState& cached(int N, double p)
{
    static GroundStateStore store;
    return *store.get(N, p);
}

} // namespace

TEST(SolveStandard, LineP3MatchesSoliton)
{
    auto g = make_grid(1, Geometry::line, 40.0, 8001);
    auto w = solve_standard(1, 3.0, g);
    EXPECT_NEAR(w[4000], 1.5, 1e-6);
    double err = 0.0;
    for (std::size_t i = 0; i < g->size(); ++i) err = std::max(err, std::abs(w[i] - w_exact(3.0, g->node(i))));
    EXPECT_LT(err, 1e-6);
}

TEST(SolveStandard, LineP5MatchesSoliton)
{
    auto g = make_grid(1, Geometry::line, 40.0, 8001);
    auto w = solve_standard(1, 5.0, g);
    EXPECT_NEAR(w[4000], std::cbrt(2.5), 1e-6);
    double err = 0.0;
    for (std::size_t i = 0; i < g->size(); ++i) err = std::max(err, std::abs(w[i] - w_exact(5.0, g->node(i))));
    EXPECT_LT(err, 1e-6);
}

TEST(SolveStandard, RejectsBadInput)
{
    EXPECT_THROW(solve_standard(1, 2.0, make_grid(1, Geometry::line, 10.0, 1001)), invalid_argument);
    EXPECT_THROW(solve_standard(3, 6.0, make_grid(3, Geometry::radial, 10.0, 1001)), invalid_argument);
    EXPECT_THROW(solve_standard(1, 3.0, make_grid(1, Geometry::line, 10.0, 1000)), invalid_argument);
    EXPECT_THROW(solve_standard(2, 3.0, make_grid(3, Geometry::radial, 10.0, 1001)), invalid_argument);
}

TEST(GroundState, ClosedFormOnLine)
{
    for (double p : {3.0, 4.0, 5.0}) EXPECT_LT(closed_form_error(cached(1, p)), 1e-6) << "p=" << p;
}

TEST(GroundState, MassOfQ3)
{
    // Q_3 = (15/8) sech^2(sqrt(5) x / 2) and int sech^4(s x) = 4/(3 s).
    const double mass_sq = 225.0 / 64.0 * 8.0 / (3.0 * std::sqrt(5.0));
    EXPECT_NEAR(cached(1, 3.0).mass(), std::sqrt(mass_sq), 1e-7);
    EXPECT_NEAR(cached(1, 3.0).mass(), 2.0475906470, 1e-8);
}

TEST(GroundState, PohozaevChain)
{
    for (auto [N, p] : std::vector<std::pair<int, double>>{{1, 3.0}, {2, 3.0}, {3, 4.0}, {3, 5.0}}) {
        const auto& gs = cached(N, p);
        EXPECT_LT(gs.kinetic_defect(), 1e-4) << N << " " << p;
        EXPECT_LT(gs.pnorm_defect(), 1e-4) << N << " " << p;
        EXPECT_FALSE(gs.check().has_value());
    }
}

TEST(GroundState, RadialProfileDecreasing)
{
    const auto& gs = cached(3, 4.0);
    EXPECT_GT(gs.profile[0], 0.0);
    for (std::size_t i = 1; i < gs.profile.size(); ++i) ASSERT_LE(gs.profile[i], gs.profile[i - 1] + 1e-14);
    EXPECT_NEAR(gs.mass(), 7.0069025642, 1e-5);
}

TEST(GroundState, ScalingFromStandardSolution)
{
    // Q(x) = l^{1/(p-2)} w(sqrt(l/k) x)
    const double p = 3.0;
    const auto sc = qp_scaling(1, p);
    const auto& gs = cached(1, p);
    for (double x : {0.0, 0.7, 2.5})
        EXPECT_NEAR(sample_at(gs.profile, x), std::pow(sc.l, 1.0 / (p - 2.0)) * w_exact(p, sc.stretch() * x), 1e-6);
}

TEST(GroundState, FromProfileRejectsBrokenInvariants)
{
    const auto& gs = cached(1, 3.0);
    Field wide = Field::sample(gs.grid_ptr(), [&](double x) { return sample_at(gs.profile, 0.9 * x); });
    EXPECT_THROW(GroundState::from_profile(1, 3.0, wide), invariant_violation);
    Field neg = gs.profile;
    for (double& v : neg.values()) v = -v;
    EXPECT_THROW(GroundState::from_profile(1, 3.0, neg), invariant_violation);
}

TEST(GnConstant, Values)
{
    EXPECT_NEAR(gn_constant(cached(1, 3.0)), 3.0 / (2.0 * 2.0475906470), 1e-7);
    const auto& q4 = cached(3, 4.0);
    EXPECT_NEAR(gn_constant(q4), 2.0 / q4.mass_sq, 1e-14);
}

TEST(GnRatio, EqualityAtGroundState)
{
    for (auto [N, p] : std::vector<std::pair<int, double>>{{1, 3.0}, {2, 3.0}, {3, 4.0}, {3, 5.0}}) {
        const auto& gs = cached(N, p);
        EXPECT_NEAR(gn_ratio(gs.profile, gs), 1.0, 1e-4) << N << " " << p;
    }
}

TEST(GnRatio, GaussianBelowOne)
{
    const auto& gs = cached(1, 3.0);
    auto g = Field::sample(gs.grid_ptr(), [](double x) { return std::exp(-x * x); });
    const double r = gn_ratio(g, gs);
    EXPECT_GT(r, 0.0);
    EXPECT_LT(r, 1.0);
}

TEST(GnRatio, TranslationInvariant)
{
    const auto& gs = cached(1, 3.0);
    auto shifted = Field::sample(gs.grid_ptr(), [&](double x) { return sample_at(gs.profile, x - 1.3); });
    EXPECT_NEAR(gn_ratio(shifted, gs), gn_ratio(gs.profile, gs), 1e-6);
}

TEST(GnRatio, RandomFieldsNeverExceedOne)
{
    std::mt19937_64 rng(99);
    for (auto [N, p] : std::vector<std::pair<int, double>>{{1, 3.0}, {3, 4.0}}) {
        const auto& gs = cached(N, p);
        for (int k = 0; k < 40; ++k) {
            auto [f, family] = random_field(gs.grid_ptr(), p, rng);
            EXPECT_LE(gn_ratio(f, gs), 1.0 + 1e-6) << family;
        }
    }
}
