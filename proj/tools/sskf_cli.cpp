#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "sskf/sskf.hpp"

namespace {

struct Common {
    std::string config;
    std::size_t jobs = 1;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool no_timestamp = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "experiment config (JSON)")->required();
    cmd->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", c.seed, "master seed, overrides the config");
    cmd->add_option("--out", c.out, "output directory, overrides the config");
    cmd->add_flag("--no-timestamp", c.no_timestamp, "omit the generated-at line");
}

sskf::ExperimentConfig resolve(const Common& c) {
    auto cfg = sskf::load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (!c.out.empty()) cfg.output = c.out;
    return cfg;
}

int run(const Common& c) {
    const auto cfg = resolve(c);
    const auto rows = sskf::run_and_write(cfg, cfg.output, c.jobs, !c.no_timestamp);
    std::cout << "wrote " << rows.size() << " metric rows to " << (std::filesystem::path(cfg.output) / "metrics.csv").string() << "\n";
    return 0;
}

int diagnose(const Common& c) {
    const auto cfg = resolve(c);
    const auto d = sskf::diagnose_knockoffs(cfg);
    const std::filesystem::path out(cfg.output);
    std::string head = c.no_timestamp ? "" : "# " + sskf::timestamp_line() + "\n";
    sskf::csv::write_atomic(out / "knockoff_summary.csv", head + d.summary_csv());
    sskf::csv::write_atomic(out / "knockoff_correlation.csv", head + d.correlation_csv());
    std::cout << "wrote knockoff diagnostics to " << out.string() << "\n";
    return 0;
}

int simulate(const Common& c) {
    const auto cfg = resolve(c);
    sskf::simulate_and_write(cfg, cfg.output);
    std::cout << "wrote datasets to " << (std::filesystem::path(cfg.output) / "data").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Subgroup-selective knockoff filter experiments"};
    app.require_subcommand(1);
    Common common;
    auto* run_cmd = app.add_subcommand("run", "run methods over an n grid and repetitions");
    auto* diag_cmd = app.add_subcommand("diagnose-knockoffs", "means, SDs and correlations of variables and knockoffs");
    auto* sim_cmd = app.add_subcommand("simulate", "write generated datasets only");
    auto* ver_cmd = app.add_subcommand("version", "print the version");
    for (auto* cmd : {run_cmd, diag_cmd, sim_cmd}) add_common(cmd, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (ver_cmd->parsed()) {
            std::cout << "sskf " << sskf::version << "\n";
            return 0;
        }
        if (run_cmd->parsed()) return run(common);
        if (diag_cmd->parsed()) return diagnose(common);
        if (sim_cmd->parsed()) return simulate(common);
    } catch (const sskf::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const sskf::CellError& e) {
        std::cerr << "failed: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
