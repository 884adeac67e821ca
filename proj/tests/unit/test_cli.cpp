#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "dclnas/nn.hpp"
#include "dclnas/oracle.hpp"

using namespace dclnas;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "dclnas");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() /
              ("dclnas_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
        config = (dir / "config.json").string();
        std::ofstream(config) << R"({"N": 10, "fes_max": 25, "N_infill": 5, "t_gap": 2, "d_e": 16,
            "finetune": {"epochs": 3, "batch_size": 16},
            "pretrain": {"epochs": 2, "batch_size": 32, "cluster_sizes": [3, 4]}})";
    }
    void TearDown() override { fs::remove_all(dir); }
    std::string p(const std::string& name) const { return (dir / name).string(); }

    fs::path dir;
    std::string config;
};

}  // namespace

TEST_F(Cli, NoSubcommandIsUsageError) { EXPECT_EQ(run({}).code, kExitUsage); }

TEST_F(Cli, UnknownOptionIsUsageError) { EXPECT_EQ(run({"search", "--bogus"}).code, kExitUsage); }

TEST_F(Cli, MissingConfigNamesPath) {
    const auto r = run({"--config", p("nope.json"), "search"});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_NE(r.err.find("nope.json"), std::string::npos);
}

TEST_F(Cli, BadAblationIsUsageError) {
    EXPECT_EQ(run({"--config", config, "--ablation", "sideways", "search"}).code, kExitUsage);
}

TEST_F(Cli, InvalidConfigIsUsageError) {
    std::ofstream(p("bad.json")) << R"({"N": 0})";
    const auto r = run({"--config", p("bad.json"), "search"});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_NE(r.err.find("N must be"), std::string::npos);
}

TEST_F(Cli, GenSyntheticWritesLoadableTable) {
    const auto r = run({"--config", config, "--out", p("syn.jsonl"), "gen-synthetic", "--count", "30"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto s = nasbench201_space();
    EXPECT_EQ(TabularOracle::load(p("syn.jsonl"), s).size(), 30u);
}

TEST_F(Cli, PretrainWritesCheckpoint) {
    const auto r = run({"--config", config, "--out", p("ckpt.json"), "pretrain", "--epochs", "2"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto m = PredictorModel::load(p("ckpt.json"));
    EXPECT_EQ(m.dims().d_e, 16);
    EXPECT_EQ(PredictorModel::from_json(m.to_json()), m);
}

TEST_F(Cli, SearchTwiceIsByteIdenticalAndExports) {
    for (const char* d : {"a", "b"}) {
        const auto r = run({"--config", config, "--seed", "7", "--out", p(d), "search"});
        ASSERT_EQ(r.code, kExitOk) << r.err;
    }
    for (const char* f : {"config.json", "run_log.jsonl", "archive.jsonl", "best.json", "history.csv"})
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    const auto e = run({"--config", config, "--out", p("top.jsonl"), "export", "--run", p("a"), "--top", "3"});
    ASSERT_EQ(e.code, kExitOk) << e.err;
    const auto top = TabularOracle::load(p("top.jsonl"), nasbench201_space());
    ASSERT_EQ(top.size(), 3u);
    EXPECT_GE(top.entries()[0].val_acc, top.entries()[1].val_acc);
    EXPECT_GE(top.entries()[1].val_acc, top.entries()[2].val_acc);
}

TEST_F(Cli, SearchMissingCheckpointIsUsageError) {
    EXPECT_EQ(run({"--config", config, "--out", p("r"), "search", "--checkpoint", p("none.json")}).code, kExitUsage);
}

TEST_F(Cli, ExportMissingRunIsUsageError) {
    EXPECT_EQ(run({"--config", config, "export", "--run", p("nothing")}).code, kExitUsage);
}

TEST_F(Cli, EvalPredictorWritesReport) {
    const auto r = run({"--config", config, "--out", p("rep"), "eval-predictor", "--labels", "10", "20", "--repeats",
                        "2", "--validation", "5", "--test-size", "50"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_TRUE(fs::exists(dir / "rep" / "summary.json"));
    EXPECT_TRUE(fs::exists(dir / "rep" / "sweep.csv"));
    EXPECT_NE(r.out.find("budget,test_size"), std::string::npos);
}
