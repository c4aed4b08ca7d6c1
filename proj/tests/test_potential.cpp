#include "kml/potential.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace kml;

namespace {

PotentialTable parse(const std::string& s)
{
    std::istringstream in(s);
    return parse_potential_table(in);
}

} // namespace

TEST(PotentialTable, ParsesAndInterpolates)
{
    auto t = parse("V-TABLE v1\n# radius value\n0 0\n1 1\n2 4\n");
    EXPECT_TRUE(t.radial());
    EXPECT_DOUBLE_EQ(t(0.5), 0.5);
    EXPECT_DOUBLE_EQ(t(3.0), 4.0);
    auto spec = PotentialSpec::tabulated(t);
    EXPECT_DOUBLE_EQ(spec(-1.5), 2.5);
}

TEST(PotentialTable, RejectsMalformedInput)
{
    EXPECT_THROW(parse(""), invalid_argument);
    EXPECT_THROW(parse("V-TABLE v2\n0 0\n1 1\n"), invalid_argument);
    EXPECT_THROW(parse("V-TABLE v1\n0 0\n"), invalid_argument);
    EXPECT_THROW(parse("V-TABLE v1\n0 0\n0 1\n"), invalid_argument);
    EXPECT_THROW(parse("V-TABLE v1\n0 0\n1 -1\n"), invalid_argument);
    EXPECT_THROW(parse("V-TABLE v1\n0 0 0\n1 1\n"), invalid_argument);
    EXPECT_THROW(parse("V-TABLE v1\n0 zero\n1 1\n"), error);
}

TEST(PotentialField, HarmonicOnLine)
{
    auto g = make_grid(1, Geometry::line, 4.0, 401);
    auto V = potential_field(g, PotentialSpec::harmonic(2.0));
    EXPECT_DOUBLE_EQ(V[200], 0.0);
    EXPECT_NEAR(V[400], 32.0, 1e-12);
}

TEST(PotentialField, ShiftsMinimumToZero)
{
    auto g = make_grid(1, Geometry::line, 2.0, 201);
    auto V = potential_field(g, PotentialSpec::tabulated(parse("V-TABLE v1\n-3 10\n0 1\n3 10\n")));
    EXPECT_NEAR(*std::min_element(V.values().begin(), V.values().end()), 0.0, 1e-15);
}

TEST(PotentialField, MustGrowTowardsBoundary)
{
    auto g = make_grid(1, Geometry::line, 2.0, 201);
    auto flat = PotentialSpec::tabulated(parse("V-TABLE v1\n0 0\n0.1 1\n5 1\n"));
    EXPECT_THROW(potential_field(g, flat), invalid_argument);
    EXPECT_THROW(potential_field(g, PotentialSpec::harmonic(-1.0)), invalid_argument);
    EXPECT_THROW(potential_field(g, PotentialSpec::power(0.0, 1.0)), invalid_argument);
}

TEST(PotentialField, PowerOnBall)
{
    auto g = make_grid(3, Geometry::radial, 2.0, 201);
    auto V = potential_field(g, PotentialSpec::power(3.0, 0.5));
    EXPECT_NEAR(V[200], 4.0, 1e-12);
    EXPECT_EQ(V[0], 0.0);
}
