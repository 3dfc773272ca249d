#include "stf/errors.hpp"
#include "stf/io.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace stf;
namespace fs = std::filesystem;

namespace {

Json minimal() { return Json{{"n", 2.5}}; }

std::string error_of(const Json& doc)
{
    try {
        (void)load_config(doc);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("stfe_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args)
{
    const int status = std::system((std::string(STFE_PATH) + " " + args + " 2>/dev/null").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST(Config, DefaultsFilledIn)
{
    const RunConfig rc = load_config(minimal());
    EXPECT_EQ(rc.setup.solver.grid.size(), 64);
    EXPECT_DOUBLE_EQ(rc.setup.solver.grid.length(), 1.0);
    EXPECT_DOUBLE_EQ(rc.setup.solver.params.p, 4.0);
    EXPECT_DOUBLE_EQ(rc.setup.solver.dt0, 1e-4);
    EXPECT_DOUBLE_EQ(*rc.setup.solver.alpha, 1.25 - 2.5);
    EXPECT_EQ(rc.resolved["N"], 64);
    EXPECT_EQ(rc.resolved["noise"]["mode"], "power-decay");
    EXPECT_EQ(rc.resolved["S"]["mode"], "factor-above-A3star");
    EXPECT_EQ(rc.resolved["initial"]["kind"], "perturbed-constant");
}

TEST(Config, MissingNNamed)
{
    const std::string msg = error_of(Json::object());
    EXPECT_NE(msg.find("'n'"), std::string::npos) << msg;
}

TEST(Config, UnknownKeysRejectedAtEveryLevel)
{
    Json a = minimal();
    a["dt"] = 1e-3;
    EXPECT_NE(error_of(a).find("unknown config key 'dt'"), std::string::npos);
    Json b = minimal();
    b["noise"] = {{"K", 2}, {"amp", 1.0}};
    EXPECT_NE(error_of(b).find("'noise.amp'"), std::string::npos);
    Json c = minimal();
    c["S"] = {{"mode", "value"}, {"value", 1.0}, {"factor", 2.0}};
    EXPECT_NE(error_of(c).find("'S.factor'"), std::string::npos);
}

TEST(Config, TypeAndRangeErrors)
{
    Json a = minimal();
    a["N"] = 64.5;
    EXPECT_NE(error_of(a).find("'N'"), std::string::npos);
    Json b = minimal();
    b["n"] = "2.5";
    EXPECT_NE(error_of(b).find("'n'"), std::string::npos);
    Json c = minimal();
    c["n"] = 3.5;
    EXPECT_FALSE(error_of(c).empty());
    Json d = minimal();
    d["N"] = 63;
    EXPECT_FALSE(error_of(d).empty());
    Json e = minimal();
    e["epsilon"] = 1e-3;
    e["initial"] = {{"kind", "bump"}};
    EXPECT_NE(error_of(e).find("positive"), std::string::npos);
    Json f = minimal();
    f["S"] = {{"mode", "bogus"}};
    EXPECT_NE(error_of(f).find("'S.mode'"), std::string::npos);
    Json g = minimal();
    g["initial"] = 3;
    EXPECT_NE(error_of(g).find("'initial'"), std::string::npos);
}

TEST(Config, SModes)
{
    Json base = minimal();
    base["noise"] = {{"mode", "flat"}, {"amplitude", 0.5}, {"K", 4}};
    const RunConfig d = load_config(base);
    const double c = d.derived.c_strat;
    ASSERT_GT(c, 0.0);
    // Thresholds at n = 5/2: S_A3 = 3 c 2^{1.5}, S_A3star = c (9/4)(1/4)/(1/2 * 2).
    EXPECT_NEAR(d.derived.S_A3, c * 3.0 * std::pow(2.0, 1.5), 1e-12 * c);
    EXPECT_NEAR(d.derived.S_A3star, c * 9.0 / 16.0, 1e-12 * c);
    EXPECT_NEAR(d.derived.S, 2.0 * d.derived.S_A3star, 1e-12 * c);

    Json a3 = base;
    a3["S"] = {{"mode", "factor-above-A3"}, {"factor", 1.5}};
    EXPECT_NEAR(load_config(a3).derived.S, 1.5 * d.derived.S_A3, 1e-12 * c);
    Json v = base;
    v["S"] = 0.7;
    EXPECT_DOUBLE_EQ(load_config(v).setup.solver.params.S, 0.7);
    Json bi = base;
    bi["S"] = {{"mode", "backward-ito"}};
    EXPECT_DOUBLE_EQ(load_config(bi).derived.S, c);
}

TEST(Config, ResolvedReloadsToSameConfig)
{
    Json doc = minimal();
    doc["noise"] = {{"K", 3}, {"amplitude", 0.2}};
    doc["convergence"] = {{"constant_target", 1.5}};
    doc["S"] = {{"mode", "value"}, {"value", 0.3}};
    const RunConfig first = load_config(doc);
    const RunConfig again = load_config(first.resolved);
    EXPECT_EQ(first.resolved, again.resolved);
    EXPECT_EQ(again.convergence.constant_target, 1.5);
}

TEST(Csv, HeaderAndFullPrecision)
{
    SeriesRecord r;
    r.time = 0.1;
    r.mass = 1.0 / 3.0;
    const std::string csv = series_csv({r});
    const std::string header = "time,mass,energy,energy_eps,entropy,alpha_entropy,dissipation,min_u,max_u,support_length";
    ASSERT_EQ(csv.substr(0, header.size() + 1), header + "\n");
    const std::string row = csv.substr(header.size() + 1);
    EXPECT_EQ(row.substr(0, row.find(',', row.find(',') + 1)), "0.10000000000000001,0.33333333333333331");
    EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Cli, MissingNExitsTwo)
{
    const fs::path dir = scratch("missing");
    write_json(dir / "c.json", Json{{"N", 32}});
    EXPECT_EQ(run_cli("simulate --config " + (dir / "c.json").string() + " --out " + (dir / "out").string()), 2);
    EXPECT_EQ(run_cli("simulate --config " + (dir / "absent.json").string()), 2);
    EXPECT_EQ(run_cli("simulate"), 2);
}

TEST(Cli, SimulateDeterministic)
{
    const fs::path dir = scratch("sim");
    write_json(dir / "c.json", Json{{"n", 2.5},
                                    {"N", 32},
                                    {"epsilon", 1e-3},
                                    {"delta", 0.1},
                                    {"T", 2e-3},
                                    {"dt0", 1e-4},
                                    {"noise", {{"K", 2}, {"amplitude", 0.1}}}});
    const std::string cfg = (dir / "c.json").string();
    ASSERT_EQ(run_cli("simulate --config " + cfg + " --seed 7 --out " + (dir / "a").string()), 0);
    ASSERT_EQ(run_cli("simulate --config " + cfg + " --seed 7 --out " + (dir / "b").string()), 0);
    for (const char* f : {"series_0.csv", "summary.json", "resolved_config.json"})
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    EXPECT_FALSE(slurp(dir / "a" / "series_0.csv").empty());
    // The emitted resolved configuration is itself a valid input.
    EXPECT_EQ(run_cli("simulate --config " + (dir / "a" / "resolved_config.json").string() + " --seed 7 --out " +
                      (dir / "c").string()),
              0);
    EXPECT_EQ(slurp(dir / "a" / "series_0.csv"), slurp(dir / "c" / "series_0.csv"));
}

TEST(Cli, InequalitiesReportKeys)
{
    const fs::path dir = scratch("ineq");
    write_json(dir / "c.json", Json{{"n", 2.5}, {"epsilon", 1e-3}, {"inequalities", {{"samples", 3}, {"resolutions", {64, 128}}}}});
    ASSERT_EQ(run_cli("inequalities --config " + (dir / "c.json").string() + " --out " + dir.string()), 0);
    const Json s = Json::parse(slurp(dir / "summary.json"));
    for (const char* k : {"bernis_ratios", "onb_max_dev", "positivity_constants"})
        EXPECT_TRUE(s.contains(k)) << k;
}

TEST(Cli, NumericalFailureKeepsPartialOutput)
{
    // Unshifted bump under strong noise: rejections drive dt below dt_min.
    const fs::path dir = scratch("fail");
    write_json(dir / "c.json", Json{{"n", 2.5},
                                    {"N", 64},
                                    {"T", 1e-2},
                                    {"dt0", 1e-3},
                                    {"dt_min", 1e-4},
                                    {"S", 0.0},
                                    {"initial", {{"kind", "bump"}, {"width", 0.3}}},
                                    {"noise", {{"mode", "flat"}, {"K", 4}, {"amplitude", 1.0}}}});
    ASSERT_EQ(run_cli("simulate --config " + (dir / "c.json").string() + " --out " + dir.string()), 3);
    EXPECT_TRUE(fs::exists(dir / "resolved_config.json"));
    const std::string csv = slurp(dir / "series_0.csv");
    EXPECT_GT(std::count(csv.begin(), csv.end(), '\n'), 2);
    const Json s = Json::parse(slurp(dir / "summary.json"));
    EXPECT_TRUE(s["trajectory"]["degenerate"].get<bool>());
    EXPECT_FALSE(s["trajectory"]["failure"].is_null());
}
