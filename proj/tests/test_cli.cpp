#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fmlab/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

Run invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "fmlab");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Run r;
    r.code = fmlab::cli::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() / ("fmlab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    std::string write(const std::string& name, const std::string& text) {
        const auto p = dir / name;
        std::ofstream(p) << text;
        return p.string();
    }

    fs::path dir;
};

}  // namespace

TEST_F(Cli, VerifyHappyPath) {
    const auto cfg = write("c.json", R"({"experiment": "thm1", "grid": {"N_list": [256, 512]}})");
    const auto out = (dir / "r.json").string();
    const auto r = invoke({"verify", "thm1", "--config", cfg, "--out", out, "--csv", (dir / "csv").string()});
    EXPECT_EQ(r.code, 0) << r.out << r.err;
    ASSERT_TRUE(fs::exists(out));
    std::ifstream in(out);
    const auto j = nlohmann::json::parse(in);
    EXPECT_TRUE(j["pass"].get<bool>());
    EXPECT_FALSE(fs::is_empty(dir / "csv"));
}

TEST_F(Cli, MissingConfigExitsTwo) {
    const auto r = invoke({"verify", "thm1", "--config", (dir / "absent.json").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("not found"), std::string::npos);
}

TEST_F(Cli, UnknownSubcommandPrintsUsage) {
    const auto r = invoke({"frobnicate"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("verify"), std::string::npos);
    EXPECT_EQ(invoke({}).code, 2);
    EXPECT_EQ(invoke({"verify", "thm7"}).code, 2);
}

TEST_F(Cli, HelpExitsZero) { EXPECT_EQ(invoke({"--help"}).code, 0); }

TEST_F(Cli, InvalidRelationExitsTwo) {
    const auto cfg = write("c.json", R"({"experiment": "thm1", "lambda": 0.25})");
    EXPECT_EQ(invoke({"verify", "thm1", "--config", cfg}).code, 2);
    const auto bad = write("bad.json", "{ not json");
    EXPECT_EQ(invoke({"verify", "thm1", "--config", bad}).code, 2);
    const auto other = write("o.json", R"({"experiment": "cor3"})");
    EXPECT_EQ(invoke({"verify", "thm1", "--config", other}).code, 2);
}

TEST_F(Cli, Thm2CounterProbeExitsOneWithReport) {
    const auto cfg = write("c.json", R"({"experiment": "thm2", "corpus": {"families": ["log"]}})");
    const auto out = (dir / "r.json").string();
    const auto r = invoke({"verify", "thm2", "--config", cfg, "--out", out});
    EXPECT_EQ(r.code, 1);
    ASSERT_TRUE(fs::exists(out));
    std::ifstream in(out);
    const auto j = nlohmann::json::parse(in);
    EXPECT_FALSE(j["pass"].get<bool>());
    bool explained = false;
    for (const auto& n : j["notes"]) explained = explained || n.get<std::string>().find("excluded") != std::string::npos;
    EXPECT_TRUE(explained);
}

TEST_F(Cli, GenCorpusThenNorms) {
    const auto cfg = write("c.json", R"({"experiment": "thm1", "grid": {"N_list": [128]}, "corpus": {"families": ["log", "power"], "count": 1}})");
    const auto manifest = (dir / "m.json").string();
    const auto mgf = (dir / "mgf").string();
    ASSERT_EQ(invoke({"gen-corpus", "--config", cfg, "--out", manifest, "--mgf", mgf}).code, 0);
    std::ifstream in(manifest);
    const auto j = nlohmann::json::parse(in);
    ASSERT_EQ(j["levels"][0]["functions"].size(), 2u);
    const std::string file = j["levels"][0]["functions"][0]["file"];
    const auto r = invoke({"norms", file, "--p", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto n = nlohmann::json::parse(r.out);
    EXPECT_GT(n["bmo"]["value"].get<double>(), 0.0);
    EXPECT_EQ(n["grid"]["N"], 128);
    EXPECT_EQ(invoke({"norms", (dir / "absent.mgf").string()}).code, 2);
    const auto junk = write("junk.mgf", "not a grid file");
    EXPECT_EQ(invoke({"norms", junk}).code, 2);
}

TEST_F(Cli, ReportMerge) {
    const auto pass = write("p.json", R"({"experiment": "a", "pass": true})");
    const auto fail = write("f.json", R"({"experiment": "b", "pass": false})");
    const auto out = (dir / "m.json").string();
    EXPECT_EQ(invoke({"report-merge", pass, pass, "--out", out}).code, 0);
    EXPECT_TRUE(fs::exists(out));
    EXPECT_EQ(invoke({"report-merge", pass, fail}).code, 1);
    EXPECT_EQ(invoke({"report-merge", (dir / "absent.json").string()}).code, 2);
}
