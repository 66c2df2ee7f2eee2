#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "qpurify/cli.hpp"

using namespace qpurify;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("qpurify_cli_" + name);
    fs::remove_all(p);
    return p;
}

nlohmann::json read_json(const fs::path& p)
{
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

int run(std::vector<std::string> args, const fs::path& out)
{
    args.push_back("--out");
    args.push_back(out.string());
    std::ostringstream log;
    return execute(parse_config(args), log);
}

}  // namespace

TEST(Execute, VerifyJacobsPasses)
{
    const auto out = fresh_dir("verify_ok");
    EXPECT_EQ(run({"verify", "--problem", "finite", "--cost", "linear"}, out), kExitOk);
    const auto res = read_json(out / "result.json");
    EXPECT_TRUE(res["pass"].get<bool>());
    for (const auto& c : res["criteria"])
        EXPECT_TRUE(c["pass"].get<bool>()) << c.dump();
    const auto man = read_json(out / "manifest.json");
    EXPECT_EQ(man["version"], kVersion);
    EXPECT_EQ(man["seed"], 0);
    EXPECT_TRUE(man.contains("wall_time_seconds"));
    EXPECT_TRUE(fs::exists(out / "config.txt"));
}

TEST(Execute, VerifyZeroValueFails)
{
    const auto out = fresh_dir("verify_zero");
    EXPECT_EQ(run({"verify", "--problem", "hitting", "--value", "zero"}, out), kExitCheckFailed);
    EXPECT_FALSE(read_json(out / "result.json")["pass"].get<bool>());
}

TEST(Execute, VerifyScaledFails)
{
    const auto out = fresh_dir("verify_scaled");
    EXPECT_EQ(run({"verify", "--problem", "hitting", "--scale", "1.01"}, out), kExitCheckFailed);
}

TEST(Execute, CompareRanksAlignedFirst)
{
    const auto out = fresh_dir("compare");
    EXPECT_EQ(run({"compare", "--strategies", "jacobs,aligned", "--goal", "hitting", "--h", "0.5", "--n", "2000"}, out),
              kExitOk);
    EXPECT_EQ(read_json(out / "result.json")["ranking"][0]["name"], "aligned");
}

TEST(Execute, HitWritesHistogram)
{
    const auto out = fresh_dir("hit");
    EXPECT_EQ(run({"hit", "--n", "500", "--bins", "10"}, out), kExitOk);
    EXPECT_TRUE(fs::exists(out / "hitting_histogram.csv"));
    const auto res = read_json(out / "result.json");
    EXPECT_EQ(res["summary"]["n"], 500);
}

TEST(Execute, SimulateDumpsTrajectories)
{
    const auto out = fresh_dir("simulate");
    EXPECT_EQ(run({"simulate", "--strategy", "aligned", "--n", "20", "--T", "0.01", "--dump", "2"}, out), kExitOk);
    EXPECT_TRUE(fs::exists(out / "trajectory_0.csv"));
    EXPECT_TRUE(fs::exists(out / "trajectory_1.csv"));
    EXPECT_FALSE(fs::exists(out / "trajectory_2.csv"));
}

TEST(Execute, SolveWritesGridAndPolicy)
{
    const auto out = fresh_dir("solve");
    EXPECT_EQ(run({"solve", "--problem", "hitting", "--n_s", "60", "--refine", "30,60"}, out), kExitOk);
    EXPECT_TRUE(fs::exists(out / "value_grid.csv"));
    EXPECT_TRUE(fs::exists(out / "policy.csv"));
    const auto meta = read_json(out / "value_grid.json");
    EXPECT_EQ(meta["convergence"].size(), 2u);

    // The exported policy drives a simulation.
    const auto out2 = fresh_dir("solve_policy_hit");
    EXPECT_EQ(run({"hit", "--strategy", "table:" + (out / "policy.csv").string(), "--n", "200"}, out2), kExitOk);
}

TEST(Execute, CrossvalAndProbe)
{
    const auto out = fresh_dir("crossval");
    EXPECT_EQ(run({"crossval", "--T", "0.05"}, out), kExitOk);
    EXPECT_LT(read_json(out / "result.json")["rho_vs_bloch"].get<double>(), 1e-10);
    const auto out2 = fresh_dir("probe");
    EXPECT_EQ(run({"probe", "--T", "0.05", "--n", "50", "--gains", "10,100"}, out2), kExitOk);
    EXPECT_TRUE(fs::exists(out2 / "probe.csv"));
}

TEST(Execute, DomainErrorExitCode)
{
    const auto out = fresh_dir("domain");
    // Unreadable policy file surfaces at run time.
    EXPECT_EQ(run({"hit", "--strategy", "table:/nonexistent.csv", "--n", "10"}, out), kExitDomain);
}

TEST(Execute, FilesystemErrorExitCode)
{
    const auto blocker = fresh_dir("blocker");
    {
        std::ofstream os(blocker);
        os << "x";
    }
    EXPECT_EQ(run({"verify"}, blocker / "sub"), kExitFilesystem);
    fs::remove(blocker);
}

TEST(Execute, ManifestReproducesRun)
{
    const auto out = fresh_dir("repro_a");
    EXPECT_EQ(run({"hit", "--n", "300", "--seed", "4"}, out), kExitOk);
    RunConfig again = config_from_manifest(read_json(out / "manifest.json"));
    const auto out2 = fresh_dir("repro_b");
    again.out = out2.string();
    std::ostringstream log;
    EXPECT_EQ(execute(again, log), kExitOk);
    EXPECT_EQ(read_json(out / "result.json"), read_json(out2 / "result.json"));
}

#ifdef QPURIFY_CLI_PATH
TEST(Binary, ExitCodesAndFlags)
{
    const auto out = fresh_dir("binary");
    const std::string exe = QPURIFY_CLI_PATH;
    auto code = [](const std::string& cmd) {
        const int st = std::system((cmd + " > /dev/null 2>&1").c_str());
        return WEXITSTATUS(st);
    };
    EXPECT_EQ(code(exe + " verify --out " + out.string()), 0);
    EXPECT_EQ(code(exe + " verify --problem hitting --value zero --out " + out.string()), 2);
    EXPECT_EQ(code(exe + " hit --h 1.5 --out " + out.string()), 1);
    EXPECT_EQ(code(exe + " hit --temperture 3 --out " + out.string()), 1);
    EXPECT_EQ(code(exe + " hit --n 100 --seed 3 --workers 2 --out " + out.string()), 0);
    const auto man = read_json(out / "manifest.json");
    EXPECT_EQ(man["seed"], 3);
    EXPECT_EQ(man["workers"], 2);
}
#endif
