#include "kml/config.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace kml;

TEST(Config, DefaultsParse)
{
    for (const auto& name : experiment_names()) {
        auto rc = parse_config(default_config(name));
        EXPECT_EQ(rc.experiment, name);
        EXPECT_FALSE(rc.cs.empty());
    }
    auto rc = parse_config(default_config("concentrate"));
    EXPECT_EQ(rc.cs, (std::vector<double>{2, 5, 10, 20, 50}));
    EXPECT_EQ(rc.potential.kind, PotentialKind::harmonic);
}

TEST(Config, MassForms)
{
    EXPECT_EQ(parse_values(json(2.5), "c"), std::vector<double>{2.5});
    EXPECT_EQ(parse_values(json::parse("[1, 2]"), "c"), (std::vector<double>{1, 2}));
    EXPECT_EQ(parse_values(json::parse(R"({"geom": [1, 64, 7]})"), "c").size(), 7u);
    EXPECT_THROW(parse_values(json::parse("[1, -2]"), "c"), invalid_argument);
    EXPECT_THROW(parse_values(json::parse(R"("x")"), "c"), invalid_argument);
    EXPECT_THROW(parse_values(json::parse("[]"), "c"), invalid_argument);
}

TEST(Config, Errors)
{
    auto j = default_config("minimize");
    j["experiment"] = "nope";
    EXPECT_THROW(parse_config(j), invalid_argument);
    j = default_config("minimize");
    j["params"]["a"] = 0.0;
    EXPECT_THROW(parse_config(j), invalid_argument);
    j = default_config("minimize");
    j["params"]["p"] = 7.0;
    j["params"]["N"] = 3;
    EXPECT_THROW(parse_config(j), invalid_argument);
    j = default_config("minimize");
    j["potential"] = {{"kind", "tabulated"}, {"path", "does-not-exist.vt"}};
    EXPECT_THROW(parse_config(j), invalid_argument);
    j = default_config("minimize");
    j["flow"]["init"] = "random";
    EXPECT_THROW(parse_config(j), invalid_argument);
    j = default_config("minimize");
    j["grid"] = {{"geometry", "line"}, {"extent", 10}, {"n", 5}};
    EXPECT_THROW(parse_config(j), invalid_argument);
    j = default_config("minimize");
    j["params"]["a"] = "one";
    EXPECT_THROW(parse_config(j), invalid_argument);
}

TEST(Config, TabulatedPathRelativeToConfig)
{
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "kml-config-test";
    fs::create_directories(dir);
    {
        std::ofstream(dir / "trap.vt") << "V-TABLE v1\n0 0\n10 100\n";
    }
    auto j = default_config("minimize");
    j["potential"] = {{"kind", "tabulated"}, {"path", "trap.vt"}};
    auto rc = parse_config(j, dir);
    EXPECT_EQ(rc.potential.kind, PotentialKind::tabulated);
    EXPECT_DOUBLE_EQ(rc.potential(5.0), 50.0);
    fs::remove_all(dir);
}

TEST(Config, RunAndSummarize)
{
    auto j = default_config("theory_table");
    auto rc = parse_config(j);
    auto r = run_experiment(rc);
    auto s = summary_json(rc, r);
    EXPECT_EQ(s["rows"], 7);
    EXPECT_EQ(s["passed"], true);
    EXPECT_EQ(s["config"]["experiment"], "theory_table");
}
