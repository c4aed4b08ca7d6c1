#include "kml/experiments.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace kml;

namespace {

GroundStateStore& store()
{
    static GroundStateStore s;
    return s;
}

ConcentrateSetup conc_setup(std::vector<double> cs)
{
    ConcentrateSetup s;
    s.base.params = ProblemParams{};
    s.base.potential = PotentialSpec::harmonic(1.0);
    s.cs = std::move(cs);
    return s;
}

const Check* find(const Report& r, const std::string& prefix)
{
    for (const auto& c : r.checks)
        if (c.name.rfind(prefix, 0) == 0) return &c;
    return nullptr;
}

} // namespace

TEST(TheoryTable, SevenRows)
{
    ProblemParams P;
    P.qp_mass = store().get(1, 3.0)->mass();
    auto r = run_theory_table(P, geometric_sweep(1.0, 64.0, 7));
    EXPECT_EQ(r.table.rows.size(), 7u);
    EXPECT_TRUE(r.report.all_passed());
}

TEST(GroundStateRun, ClosedFormReported)
{
    auto r = run_ground_state(store(), 1, 3.0, std::nullopt);
    EXPECT_TRUE(r.report.all_passed());
    EXPECT_EQ(r.report.checks.size(), 4u);
    EXPECT_NEAR(r.facts.at("mass"), 2.0475906470, 1e-8);
}

TEST(Concentrate, RecordInvariants)
{
    auto s = conc_setup({2.0, 5.0, 10.0});
    auto recs = concentration_records(store(), s);
    ASSERT_EQ(recs.size(), 3u);
    for (const auto& r : recs) {
        ASSERT_TRUE(r.error.empty()) << r.error;
        EXPECT_TRUE(r.converged);
        EXPECT_TRUE(std::isfinite(r.ratio_iV_i0));
        EXPECT_TRUE(std::isfinite(r.rho_over_mu));
        EXPECT_GE(r.rescaled_L2_dist, 0.0);
        if (r.i0 < 0.0) {
            EXPECT_GE(r.i_V, r.i0 - 1e-6 * std::abs(r.i0));
        }
        EXPECT_NEAR(r.center, 0.0, 1e-6); // the harmonic trap centres the bump
    }
    EXPECT_LT(recs[1].rescaled_L2_dist, recs[0].rescaled_L2_dist);
    EXPECT_LT(recs[2].rescaled_L2_dist, recs[1].rescaled_L2_dist);
}

TEST(Concentrate, SerialEqualsParallel)
{
    auto s = conc_setup({2.0, 5.0});
    auto par = concentration_records(store(), s);
    s.parallel = false;
    auto ser = concentration_records(store(), s);
    for (std::size_t k = 0; k < par.size(); ++k) EXPECT_EQ(par[k].i_V, ser[k].i_V);
}

TEST(Concentrate, Contract)
{
    auto s = conc_setup({2.0, 5.0});
    s.base.params.p = 4.0;
    EXPECT_THROW(concentration_records(store(), s), invalid_argument);
    s = conc_setup({2.0, 5.0});
    s.base.potential = PotentialSpec::zero();
    EXPECT_THROW(concentration_records(store(), s), invalid_argument);
    EXPECT_THROW(concentration_records(store(), conc_setup({5.0, 2.0})), invalid_argument);
}

TEST(Concentrate, PeakLocation)
{
    auto g = make_grid(1, Geometry::line, 5.0, 1001);
    auto u = Field::sample(g, [](double x) { return std::exp(-(x - 0.3217) * (x - 0.3217)); });
    EXPECT_NEAR(peak_location(u), 0.3217, 1e-5);
}

TEST(Blowup, AmplitudeTendsToOneAndRegimeChecked)
{
    BlowupSetup s;
    s.params.dim = 3;
    s.params.p = 5.0;
    s.ts = geometric_sweep(1.0, 256.0, 9);
    auto r = run_blowup(store(), s);
    EXPECT_EQ(r.table.rows.size(), 9u);
    const Check* a = find(r.report, "|A_t - 1|");
    ASSERT_NE(a, nullptr);
    EXPECT_TRUE(a->passed);
    EXPECT_TRUE(std::isfinite(r.facts.at("floor_reached_at_t")));

    BlowupSetup bad;
    bad.ts = {1.0, 2.0};
    EXPECT_THROW(run_blowup(store(), bad), invalid_argument);
}

TEST(Blowup, CutoffShape)
{
    EXPECT_EQ(cutoff(0.5), 1.0);
    EXPECT_EQ(cutoff(2.5), 0.0);
    double slope = 0.0;
    for (double r = 1.0; r < 2.0; r += 1e-4) slope = std::max(slope, std::abs(cutoff(r + 1e-4) - cutoff(r)) / 1e-4);
    EXPECT_LE(slope, 2.0);
}

TEST(SmallMass, TrendsHold)
{
    SmallMassSetup s;
    s.base.potential = PotentialSpec::harmonic(1.0);
    s.cs = {1.0, 0.5, 0.25, 0.1};
    auto r = run_small_mass(store(), s);
    for (const auto& c : r.report.checks) EXPECT_TRUE(c.passed) << c.name << " " << c.value;
    s.cs = {0.1, 1.0};
    EXPECT_THROW(run_small_mass(store(), s), invalid_argument);
}

TEST(SmallMass, ZeroBelowThresholdBetweenRegime)
{
    SmallMassSetup s;
    s.base.params.dim = 3;
    s.base.params.p = 4.0;
    s.base.flow.max_iter = 3000;
    s.cs = {40.0, 20.0};
    auto r = run_small_mass(store(), s);
    const Check* z = find(r.report, "i0 ~ 0 below c_*");
    ASSERT_NE(z, nullptr);
    EXPECT_TRUE(z->passed) << z->value;
}

TEST(GnCheck, Passes)
{
    GnCheckSetup s;
    s.fields = 50;
    auto r = run_gn_check(store(), s);
    EXPECT_TRUE(r.report.all_passed());
    EXPECT_EQ(r.table.rows.size(), 4u * 51u);
}

TEST(Verify, CleanPassesAndDeterministic)
{
    VerifySetup s;
    s.gn_fields = 40;
    auto a = run_verify(store(), s);
    for (const auto& c : a.report.checks) EXPECT_TRUE(c.passed) << c.name << " " << c.detail;
    auto b = run_verify(store(), s);
    ASSERT_EQ(a.report.checks.size(), b.report.checks.size());
    for (std::size_t k = 0; k < a.report.checks.size(); ++k) EXPECT_EQ(a.report.checks[k].value, b.report.checks[k].value);
}

TEST(Verify, FaultInjectionCaught)
{
    VerifySetup s;
    s.gn_fields = 10;
    s.fault_injection = true;
    auto r = run_verify(store(), s);
    EXPECT_FALSE(r.report.all_passed());
    for (const auto& c : r.report.checks)
        if (!c.passed) {
            EXPECT_NE(c.name.find("injected"), std::string::npos) << c.name;
        }
}
