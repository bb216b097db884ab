#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sskf/csv.hpp"
#include "sskf/experiment.hpp"

namespace fs = std::filesystem;
using namespace sskf;

namespace {

fs::path scratch(const std::string& name) {
    auto d = fs::temp_directory_path() / ("sskf_cli_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

int cli(const std::string& args) {
    const std::string cmd = std::string(SSKF_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const fs::path& dir, const std::string& json) {
    const auto p = dir / "config.json";
    std::ofstream(p) << json;
    return p;
}

std::string slurp(const fs::path& p) { return csv::read_file(p); }

const char* minimal =
    R"({"design": "synthetic", "methods": ["sskf"], "n": 500, "repetitions": 2, "folds": 5, "grid": 20,
        "synthetic": {"p": 4, "m": 8, "binary_covariates": 4}})";

}  // namespace

TEST(Cli, MinimalConfigDeterministic) {
    const auto dir = scratch("minimal");
    const auto cfg = write_config(dir, minimal);
    ASSERT_EQ(cli("run --config " + cfg.string() + " --out " + (dir / "a").string() + " --no-timestamp"), 0);
    ASSERT_EQ(cli("run --config " + cfg.string() + " --out " + (dir / "b").string() + " --no-timestamp --jobs 2"), 0);
    const auto a = slurp(dir / "a" / "metrics.csv");
    EXPECT_EQ(a, slurp(dir / "b" / "metrics.csv"));
    const auto t = csv::parse(a);
    EXPECT_EQ(t.header, (std::vector<std::string>{"method", "n", "seed", "fdp", "power", "homogeneity", "heterogeneity"}));
    EXPECT_EQ(t.rows.size(), 2u);
    EXPECT_TRUE(fs::exists(dir / "a" / "discoveries" / "sskf_n500_rep1.csv"));
    EXPECT_TRUE(fs::exists(dir / "a" / "discoveries" / "sskf_n500_rep2.csv"));
}

TEST(Cli, RowsPerMethodSizeAndRepetition) {
    const auto dir = scratch("grid");
    const auto cfg = write_config(dir, R"({"methods": ["vanilla", "naive"], "n": [200, 300], "repetitions": 2, "folds": 5,
        "grid": 10, "synthetic": {"p": 3, "m": 4, "binary_covariates": 2}})");
    ASSERT_EQ(cli("run --config " + cfg.string() + " --out " + dir.string()), 0);
    const auto t = csv::parse(slurp(dir / "metrics.csv"));
    ASSERT_EQ(t.rows.size(), 8u);
    EXPECT_EQ(t.rows[0][0], "vanilla");
    EXPECT_EQ(t.rows[7][0], "naive");
    EXPECT_EQ(csv::parse(slurp(dir / "metrics_extended.csv")).rows.size(), 8u);
}

TEST(Cli, InvalidConfigExitsTwo) {
    const auto dir = scratch("invalid");
    EXPECT_EQ(cli("run --config " + write_config(dir, R"({"q": 1.5})").string()), 2);
    EXPECT_EQ(cli("run --config " + write_config(dir, R"({"colour": 1})").string()), 2);
    EXPECT_EQ(cli("run --config " + write_config(dir, "not json").string()), 2);
    EXPECT_EQ(cli("run --config " + (dir / "missing.json").string()), 2);
    EXPECT_EQ(cli("run"), 2);
}

TEST(Cli, RuntimeFailureExitsOne) {
    const auto dir = scratch("runtime");
    const auto cfg = write_config(dir, R"({"design": "blood", "n": 100, "covariates": {"path": "/nonexistent/covariates.csv",
        "schema": {"Male": "binary"}}})");
    EXPECT_EQ(cli("run --config " + cfg.string() + " --out " + dir.string()), 1);
}

TEST(Cli, BloodDiagnosticsHaveTenColumns) {
    const auto dir = scratch("diag");
    const auto cfg = write_config(dir, R"({"design": "blood", "n": 20000})");
    ASSERT_EQ(cli("diagnose-knockoffs --config " + cfg.string() + " --out " + dir.string() + " --no-timestamp"), 0);
    const auto s = csv::parse(slurp(dir / "knockoff_summary.csv"));
    EXPECT_EQ(s.rows.size(), 10u);
    EXPECT_EQ(s.rows[5][0], "Reminder knockoff");
    const auto c = csv::parse(slurp(dir / "knockoff_correlation.csv"));
    EXPECT_EQ(c.header.size(), 11u);
}

TEST(Cli, IidDiagnosticsMeansAgree) {
    const auto dir = scratch("iid");
    const auto cfg = write_config(dir, R"({"n": 5000, "synthetic": {"p": 5, "m": 4, "binary_covariates": 2}})");
    ASSERT_EQ(cli("diagnose-knockoffs --config " + cfg.string() + " --out " + dir.string() + " --no-timestamp"), 0);
    const auto s = csv::parse(slurp(dir / "knockoff_summary.csv"));
    ASSERT_EQ(s.rows.size(), 10u);
    for (int j = 0; j < 5; ++j) EXPECT_NEAR(std::stod(s.rows[j][1]), std::stod(s.rows[j + 5][1]), 0.02);
}

TEST(Cli, SimulateWritesDatasetAndSidecar) {
    const auto dir = scratch("simulate");
    const auto cfg = write_config(dir, R"({"design": "transfer", "n": 50, "synthetic": {"p": 4, "m": 8, "binary_covariates": 4}})");
    ASSERT_EQ(cli("simulate --config " + cfg.string() + " --out " + dir.string()), 0);
    const auto base = dir / "data" / "transfer_n50_rep1";
    const auto side = nlohmann::json::parse(slurp(base.string() + ".json"));
    const auto d = read_dataset(slurp(base.string() + ".csv"), side);
    EXPECT_EQ(d.n(), 50u);
    EXPECT_TRUE(fs::exists(base.string() + "_knockoffs.csv"));
    EXPECT_TRUE(fs::exists(base.string() + "_shifted.csv"));
}

TEST(Cli, TimestampComment) {
    const auto dir = scratch("stamp");
    const auto cfg = write_config(dir, R"({"methods": ["vanilla"], "n": 100, "folds": 5, "grid": 10,
        "synthetic": {"p": 3, "m": 4, "binary_covariates": 2}})");
    ASSERT_EQ(cli("run --config " + cfg.string() + " --out " + dir.string()), 0);
    EXPECT_EQ(slurp(dir / "metrics.csv").rfind("# generated ", 0), 0u);
}
