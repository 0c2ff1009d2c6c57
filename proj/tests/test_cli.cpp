#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

namespace {

struct Run
{
    int code = -1;
    std::string out;
};

Run run(const std::string& args)
{
    const std::string cmd = std::string(QMCT_CLI) + " " + args + " 2>/dev/null";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    while (fgets(buf.data(), static_cast<int>(buf.size()), pipe)) r.out += buf.data();
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string write_temp(const std::string& name, const std::string& contents)
{
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream(path) << contents;
    return path.string();
}

std::string small_csv()
{
    std::string s = "group,value\n";
    const double base[] = {0.3, -1.1, 0.7, 1.9, -0.4, 0.2, 1.2, -0.8, 0.5, 0.0};
    for (int g = 0; g < 3; ++g)
        for (double v : base) s += "g" + std::to_string(g) + "," + std::to_string(v + 0.5 * g + 0.01 * g * v) + "\n";
    return s;
}

}  // namespace

TEST(Cli, AnalyzeFormats)
{
    const auto csv = write_temp("qmct_cli.csv", small_csv());
    const auto table = run("analyze --input " + csv + " --B 200 --seed 3");
    EXPECT_EQ(table.code, 0);
    EXPECT_NE(table.out.find("g1 - g0"), std::string::npos);
    const auto json = run("analyze --input " + csv + " --B 200 --seed 3 --format json");
    ASSERT_EQ(json.code, 0);
    const auto j = nlohmann::json::parse(json.out);
    EXPECT_EQ(j.at("contrasts").size(), 2u);
    EXPECT_EQ(j.at("B"), 200);
    EXPECT_EQ(run("analyze --input " + csv + " --B 200 --seed 3 --format json").out, json.out);
    const auto delim = run("analyze --input " + csv + " --method asymp-mctp --mc-samples 10000 --format csv");
    EXPECT_EQ(delim.code, 0);
    EXPECT_NE(delim.out.find("label,estimate,margin,statistic,critical_value,adjusted_p,reject"), std::string::npos);
}

TEST(Cli, ExitCodes)
{
    const auto csv = write_temp("qmct_cli2.csv", small_csv());
    EXPECT_EQ(run("analyze --input " + csv + " --method holm").code, 2);
    EXPECT_EQ(run("analyze --input " + csv + " --alpha 1.5").code, 2);
    EXPECT_EQ(run("analyze --input " + csv + " --reference nope").code, 2);
    EXPECT_EQ(run("analyze --input " + csv + " --value-col missing").code, 3);
    EXPECT_EQ(run("analyze --input /nonexistent.csv").code, 3);
    EXPECT_EQ(run("analyze").code, 2);
    EXPECT_EQ(run("frobnicate").code, 2);
    const auto one = write_temp("qmct_one.csv", "group,value\na,1\na,2\n");
    EXPECT_EQ(run("analyze --input " + one).code, 3);
    const auto flat = write_temp("qmct_flat.csv", "group,value\na,1\na,1\na,1\nb,1\nb,1\nb,1\n");
    EXPECT_EQ(run("analyze --input " + flat + " --cov kernel --method asymp-bonferroni").code, 4);
    EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, Matrices)
{
    const auto r = run("matrices --family tukey --k 3");
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("2 - 1"), std::string::npos);
    EXPECT_NE(r.out.find("3 - 2"), std::string::npos);
    const auto m = run("matrices --family dunnett --k 2 --effect median-iqr");
    EXPECT_EQ(m.code, 0);
    EXPECT_NE(m.out.find("[iqr]"), std::string::npos);
    EXPECT_EQ(run("matrices --family dunnett --k 1").code, 2);
    EXPECT_EQ(run("matrices --family williams --k 3").code, 2);
}

TEST(Cli, Selftest)
{
    const auto r = run("selftest");
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST(Cli, SimulateEmptyGridAndErrors)
{
    const auto empty = write_temp("qmct_empty.json", R"({"shifts": []})");
    const auto r = run("simulate --config " + empty);
    ASSERT_EQ(r.code, 0);
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_TRUE(j.at("rows").empty());
    const auto paper = run("simulate --config " + empty + " --paper-scale");
    const auto p = nlohmann::json::parse(paper.out);
    EXPECT_EQ(p.at("n_sim"), 5000);
    EXPECT_EQ(p.at("B"), 2000);
    const auto bad = write_temp("qmct_bad.json", R"({"nsim": 3})");
    EXPECT_EQ(run("simulate --config " + bad).code, 2);
    const auto broken = write_temp("qmct_broken.json", "{");
    EXPECT_EQ(run("simulate --config " + broken).code, 2);
    EXPECT_EQ(run("simulate --config /nonexistent.json").code, 2);
}

TEST(Cli, SimulateCsvHeader)
{
    const auto cfg = write_temp("qmct_small.json",
                                R"({"sample_sizes": [[8,8]], "sigmas": [[1,1]], "methods": ["asymp-bonferroni"], "n_sim": 5})");
    const auto r = run("simulate --config " + cfg + " --format csv --quiet");
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("# n_sim=5"), std::string::npos);
    EXPECT_NE(r.out.find("cell,distribution"), std::string::npos);
}
