#include "stablecub/stablecub.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <unistd.h>

using namespace stablecub;
namespace fs = std::filesystem;

namespace
{

struct Outcome
{
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p)
{
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

int count_lines(const std::string& s)
{
    int n = 0;
    for (char c : s)
        n += c == '\n';
    return n;
}

class Cli : public ::testing::Test
{
protected:
    fs::path dir;

    void SetUp() override
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / ("stablecub_cli_" + std::to_string(::getpid()) + "_" + info->name());
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    fs::path at(const std::string& name) const { return dir / name; }

    Outcome run(const std::string& args) const
    {
        const fs::path o = dir / "stdout.txt", e = dir / "stderr.txt";
        const std::string cmd = "cd '" + dir.string() + "' && '" STABLECUB_CLI "' " + args + " > '" + o.string() +
                                "' 2> '" + e.string() + "'";
        const int status = std::system(cmd.c_str());
        Outcome r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.out = slurp(o);
        r.err = slurp(e);
        return r;
    }

    void write(const std::string& name, const std::string& text) const
    {
        std::ofstream os(at(name));
        os << text;
    }
};

} // namespace

TEST_F(Cli, PointsHaltonWritesRows)
{
    const Outcome r = run("points --family halton --q 2 --n 64 --out pts.csv");
    ASSERT_EQ(r.code, 0) << r.err;
    const PointSet ps = load_points(at("pts.csv").string());
    EXPECT_EQ(ps.size(), 64);
    EXPECT_EQ(ps.coords(), halton(2, 64).coords());
    EXPECT_TRUE(fs::exists(at("pts.csv.json")));
}

TEST_F(Cli, PointsEquidGrid)
{
    const Outcome r = run("points --family equid --q 2 --grid 8");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(count_lines(r.out), 64);
}

TEST_F(Cli, PointsUniformReproducible)
{
    ASSERT_EQ(run("points --family uniform --q 2 --n 64 --seed 7 --out a.csv").code, 0);
    ASSERT_EQ(run("points --family uniform --q 2 --n 64 --seed 7 --out b.csv").code, 0);
    EXPECT_EQ(slurp(at("a.csv")), slurp(at("b.csv")));
    EXPECT_EQ(count_lines(slurp(at("a.csv"))), 64);
    ASSERT_EQ(run("points --family uniform --q 2 --n 64 --seed 8 --out c.csv").code, 0);
    EXPECT_NE(slurp(at("a.csv")), slurp(at("c.csv")));
}

TEST_F(Cli, PointsBadInputsExitTwo)
{
    EXPECT_EQ(run("points --family sobol --q 2 --n 8").code, 2);
    EXPECT_EQ(run("points --family halton --q 2 --n 0").code, 2);
    EXPECT_EQ(run("frobnicate").code, 2);
    const Outcome r = run("points --family halton --q 2 --n x");
    EXPECT_EQ(r.code, 2);
    EXPECT_FALSE(r.err.empty());
}

TEST_F(Cli, ConstructLsL1Mc)
{
    ASSERT_EQ(run("points --family halton --q 2 --n 200 --out pts.csv").code, 0);
    ASSERT_EQ(run("construct --method ls --domain cube --weight const --points pts.csv --out ls.json").code, 0);
    ASSERT_EQ(run("construct --method l1 --domain cube --weight const --points pts.csv --out l1.json").code, 0);
    ASSERT_EQ(run("construct --method mc --domain cube --weight const --points pts.csv --out mc.json").code, 0);

    const nlohmann::json ls = nlohmann::json::parse(slurp(at("ls.json")));
    const nlohmann::json l1 = nlohmann::json::parse(slurp(at("l1.json")));
    const CubatureFormula cls = cubature_from_json(ls);
    const CubatureFormula cl1 = cubature_from_json(l1);
    const CubatureFormula cmc = cubature_from_json(nlohmann::json::parse(slurp(at("mc.json"))));

    EXPECT_GE(cls.degree, 1);
    EXPECT_GE(cls.weights.minCoeff(), 0.0);
    EXPECT_NEAR(cls.kappa, 4.0, 1e-10);
    EXPECT_GE(cl1.degree, cls.degree);
    EXPECT_GE(cl1.weights.minCoeff(), 0.0);
    ASSERT_EQ(cmc.size(), 200);
    for (int n = 0; n < cmc.size(); ++n)
        EXPECT_DOUBLE_EQ(cmc.weights[n], 4.0 / 200.0);
    EXPECT_EQ(ls["config"]["method"], "ls");
}

TEST_F(Cli, ConstructDegenerateExitsThree)
{
    write("corners.csv", "-1,-1\n-1,1\n1,-1\n1,1\n");
    const Outcome r = run("construct --method ls --domain cube --weight cheb2 --points corners.csv");
    EXPECT_EQ(r.code, 3);
    EXPECT_EQ(count_lines(r.err), 1) << r.err;
}

TEST_F(Cli, ConstructMissingFileExitsTwo)
{
    EXPECT_EQ(run("construct --method ls --points nope.csv").code, 2);
    write("ragged.csv", "0,0\n0.5\n");
    const Outcome r = run("construct --method ls --points ragged.csv");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("ragged.csv:2"), std::string::npos) << r.err;
}

TEST_F(Cli, IntegrateRunningExample)
{
    // three points on [-1, 1] at degree 1: weights 2/3 each
    write("three.csv", "-1\n0\n1\n");
    const Outcome c = run("construct --method ls --domain cube --weight const --points three.csv --max-degree 1 --out cf.json");
    ASSERT_EQ(c.code, 0) << c.err;
    const CubatureFormula cf = cubature_from_json(nlohmann::json::parse(slurp(at("cf.json"))));
    for (int n = 0; n < 3; ++n)
        EXPECT_NEAR(cf.weights[n], 2.0 / 3.0, 1e-15);
    write("ones.txt", "1\n1\n1\n");
    const Outcome r = run("integrate cf.json ones.txt");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(std::stod(r.out), 2.0, 1e-15);
}

TEST_F(Cli, IntegrateLengthMismatch)
{
    write("three.csv", "-1\n0\n1\n");
    ASSERT_EQ(run("construct --method mc --points three.csv --domain cube --weight const --out cf.json").code, 0);
    write("two.txt", "1\n1\n");
    const Outcome r = run("integrate cf.json two.txt");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find('2'), std::string::npos);
    EXPECT_NE(r.err.find('3'), std::string::npos);
}

TEST_F(Cli, IntegrateRejectsNaN)
{
    write("three.csv", "-1\n0\n1\n");
    ASSERT_EQ(run("construct --method mc --points three.csv --domain cube --weight const --out cf.json").code, 0);
    write("bad.txt", "1\nnan\n1\n");
    const Outcome r = run("integrate cf.json bad.txt");
    EXPECT_EQ(r.code, 2);
    EXPECT_TRUE(r.out.empty());
}

TEST_F(Cli, ExperimentRatioReportsFit)
{
    const Outcome r = run("experiment ratio --domain cube --q 2 --weight const --family halton --method ls "
                      "--sweep 4:20:4 --out ratio.csv");
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string csv = slurp(at("ratio.csv"));
    EXPECT_EQ(csv.rfind(csv_header, 0), 0u);
    const auto pos = csv.find("# fit,LS,C=");
    ASSERT_NE(pos, std::string::npos);
    const auto s_at = csv.find(",s=", pos);
    ASSERT_NE(s_at, std::string::npos);
    const double s = std::stod(csv.substr(s_at + 3));
    EXPECT_GT(s, 1.0);
    EXPECT_LT(s, 4.0);
    const auto m = nlohmann::json::parse(slurp(at("ratio.csv.manifest.json")));
    EXPECT_EQ(m["config"]["kind"], "ratio");
    EXPECT_EQ(m["version"], version_string);
}

TEST_F(Cli, ExperimentNoiseTestB)
{
    const Outcome r = run("experiment noise --test testB --epsilon 1e-6 --seed 11 --no-timing --out noise.csv");
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream is(slurp(at("noise.csv")));
    std::string line;
    std::getline(is, line);
    int rows = 0;
    while (std::getline(is, line))
    {
        if (line.empty() || line[0] == '#')
            continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string x;
        while (std::getline(ls, x, ','))
            f.push_back(x);
        ASSERT_EQ(f.size(), 8u) << line;
        EXPECT_GT(std::stod(f[5]), 1e-8) << line;
        ++rows;
    }
    EXPECT_GT(rows, 0);
    const auto m = nlohmann::json::parse(slurp(at("noise.csv.manifest.json")));
    EXPECT_EQ(m["config"]["noise_seed"], 12);
    EXPECT_EQ(m["config"]["epsilon"], 1e-6);
}

TEST_F(Cli, ExperimentSparsityWithinK)
{
    const Outcome r = run("experiment sparsity --domain cube --q 2 --weight cheb2 --family equid --sweep 4:16:2 --out sp.csv");
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream is(slurp(at("sp.csv")));
    std::string line;
    std::getline(is, line);
    int rows = 0;
    while (std::getline(is, line))
    {
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string x;
        while (std::getline(ls, x, ','))
            f.push_back(x);
        ASSERT_EQ(f.size(), 8u) << line;
        EXPECT_LE(std::stoll(f[6]), std::stoll(f[3])) << line;
        ++rows;
    }
    EXPECT_EQ(rows, 7);
}

TEST_F(Cli, ManifestRerunIsByteIdentical)
{
    ASSERT_EQ(run("experiment ratio --domain ball --q 2 --weight sqrt_radius --family uniform --seed 3 "
                  "--sweep 4:12:4 --no-timing --out first.csv")
                  .code,
              0);
    ASSERT_EQ(run("experiment --manifest first.csv.manifest.json --out second.csv").code, 0);
    EXPECT_EQ(slurp(at("first.csv")), slurp(at("second.csv")));
    auto a = nlohmann::json::parse(slurp(at("first.csv.manifest.json")));
    auto b = nlohmann::json::parse(slurp(at("second.csv.manifest.json")));
    a.erase("output");
    b.erase("output");
    EXPECT_EQ(a, b);
}

TEST_F(Cli, ExperimentNeedsTestFunction)
{
    EXPECT_EQ(run("experiment accuracy").code, 2);
    EXPECT_EQ(run("experiment bogus").code, 2);
}
