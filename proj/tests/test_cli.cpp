#include "dcflr/cli.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace dcflr;
namespace fs = std::filesystem;

namespace {

const char* kConfig = R"({
  "scenario": {"p": 0.5, "theta": 0.5, "sigma": 0.5, "truncation": 40},
  "grid_size": 129,
  "N_list": [32, 64, 128, 256],
  "replicates": 2,
  "seed": 9,
  "lowerbound": {"M_list": [8], "kl_draws": 2000},
  "effective_dim": {"lambdas": [0.01, 1.0]},
  "deviation": {"lambdas": [0.5], "n_blocks": [32], "trials": 100},
  "risk": {"mc_draws": 2000}
})";

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run(std::vector<std::string> args, std::string* err_text = nullptr) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    if (err_text) *err_text = err.str();
    return code;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

} // namespace

TEST(Cli, EverySubcommandIsDeterministic) {
    TempDir tmp("dcflr_cli_determinism");
    const auto config = (tmp.path / "config.json").string();
    write(config, kConfig);
    const std::vector<std::vector<std::string>> commands{
        {"generate", "--n", "20"}, {"fit", "--lambda", "0.05", "--m", "4"}, {"risk"},
        {"rate-sweep"},          {"lowerbound"},                       {"effective-dim"},
        {"deviation-prob"},
    };
    for (const char* run_name : {"a", "b"}) {
        const auto out_dir = (tmp.path / run_name).string();
        for (auto cmd : commands) {
            cmd.insert(cmd.end(), {"--config", config, "--out", out_dir});
            std::string err;
            EXPECT_EQ(run(cmd, &err), kExitOk) << cmd.front() << ": " << err;
        }
    }
    int files = 0;
    for (const auto& entry : fs::directory_iterator(tmp.path / "a")) {
        ++files;
        const auto name = entry.path().filename();
        EXPECT_EQ(slurp(entry.path()), slurp(tmp.path / "b" / name)) << name;
    }
    EXPECT_EQ(files, 12);
}

TEST(Cli, FitReadsGeneratedDataset) {
    TempDir tmp("dcflr_cli_pipeline");
    const auto config = (tmp.path / "config.json").string();
    write(config, kConfig);
    const auto dir = tmp.path.string();
    ASSERT_EQ(run({"generate", "--n", "16", "--config", config, "--out", dir}), kExitOk);
    ASSERT_EQ(run({"fit", "--data", (tmp.path / "dataset.csv").string(), "--lambda", "0.1", "--m", "2", "--config",
                   config, "--out", dir}),
              kExitOk);
    auto sidecar = nlohmann::json::parse(slurp(tmp.path / "model.json"));
    EXPECT_EQ(sidecar["n_per_block"], 8);
    ASSERT_EQ(run({"risk", "--config", config, "--out", dir}), kExitOk);
    const auto risk = slurp(tmp.path / "risk.csv");
    EXPECT_EQ(risk.rfind("N,m,lambda,theta,p,sigma,excess_risk,approx_error,sample_error,method\n16,2,", 0), 0u);
}

TEST(Cli, SeedFlagOverridesConfig) {
    TempDir tmp("dcflr_cli_seed");
    const auto config = (tmp.path / "config.json").string();
    write(config, kConfig);
    ASSERT_EQ(run({"generate", "--config", config, "--out", (tmp.path / "a").string()}), kExitOk);
    ASSERT_EQ(run({"generate", "--seed", "10", "--config", config, "--out", (tmp.path / "b").string()}), kExitOk);
    EXPECT_NE(slurp(tmp.path / "a" / "dataset.csv"), slurp(tmp.path / "b" / "dataset.csv"));
}

TEST(Cli, InvalidConfigExitsWithTwo) {
    TempDir tmp("dcflr_cli_invalid");
    const auto bad_json = (tmp.path / "bad.json").string();
    write(bad_json, "{ not json");
    EXPECT_EQ(run({"rate-sweep", "--config", bad_json, "--out", tmp.path.string()}), kExitInvalidConfig);
    const auto bad_theta = (tmp.path / "theta.json").string();
    write(bad_theta, R"({"scenario": {"theta": 0.9}})");
    EXPECT_EQ(run({"generate", "--config", bad_theta, "--out", tmp.path.string()}), kExitInvalidConfig);
    const auto unsorted = (tmp.path / "unsorted.json").string();
    write(unsorted, R"({"N_list": [512, 256, 1024, 2048]})");
    EXPECT_EQ(run({"rate-sweep", "--config", unsorted, "--out", tmp.path.string()}), kExitInvalidConfig);
    EXPECT_EQ(run({"generate", "--config", (tmp.path / "missing.json").string()}), kExitInvalidConfig);
    EXPECT_EQ(run({"frobnicate"}), kExitInvalidConfig);
}

TEST(Cli, FailedCheckExitsWithThree) {
    TempDir tmp("dcflr_cli_check");
    const auto config = (tmp.path / "config.json").string();
    auto j = nlohmann::json::parse(kConfig);
    j["check"] = {{"slope_tolerance", 0.0}};
    write(config, j.dump());
    EXPECT_EQ(run({"rate-sweep", "--check", "--config", config, "--out", tmp.path.string()}), kExitCheckFailed);
}
