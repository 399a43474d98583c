// cpce: run conformal PCE coverage experiments.
//
//   cpce run --config cfg.json [--seed S] [--out DIR] [--threads N]
//   cpce reproduce --figure ishigami-full [--seed S] [--out DIR] [--threads N] [--replications N]
//   cpce validate [--seed S]
//
// Exit codes: 0 success, 1 run failure, 2 usage or configuration error.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cpce/errors.hpp"
#include "cpce/experiment.hpp"
#include "cpce/testing/validation.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kRunFailure = 1;
constexpr int kUsage = 2;

int report_error(const std::string& kind, const std::string& message, int code) {
    std::cerr << nlohmann::json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << '\n';
    return code;
}

struct RunFlags {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> threads;
    std::optional<std::size_t> replications;
};

int execute(cpce::ExperimentConfig cfg, const RunFlags& flags) {
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.threads) cfg.threads = *flags.threads;
    if (flags.replications) cfg.n_replications = *flags.replications;
    try {
        cpce::validate(cfg);
    } catch (const cpce::ConfigError& e) {
        return report_error("config", e.what(), kUsage);
    }
    const auto dir = cpce::resolve_output_dir(cfg, flags.out);
    cfg.output_dir = dir.string();
    cpce::ExperimentReport report;
    try {
        report = cpce::run_experiment(cfg);
        cpce::emit_report(report, dir);
    } catch (const std::exception& e) {
        return report_error("run", e.what(), kRunFailure);
    }
    std::printf("%-26s %-7s %s\n", "engine", "level", "mean coverage");
    for (std::size_t e = 0; e < cfg.engines.size(); ++e) {
        for (std::size_t l = 0; l < cfg.levels.size(); ++l) {
            std::printf("%-26s %-7.3g %.4f\n", cfg.engines[e].name().c_str(), cfg.levels[l],
                        report.mean_coverage(e, l));
        }
    }
    std::printf("errored replications: %zu of %zu; output in %s\n", report.errored_replications(),
                report.replications.size(), dir.string().c_str());
    if (report.failed()) {
        return report_error("run", "more than 20% of replications hit an error", kRunFailure);
    }
    return kOk;
}

int validate_cmd(std::uint64_t seed) {
    const auto checks = cpce::testing::run_oracle_suite(seed);
    bool all = true;
    std::printf("%-46s %-12s %-10s %s\n", "oracle", "worst", "tolerance", "result");
    for (const auto& c : checks) {
        std::printf("%-46s %-12.3g %-10.3g %s\n", c.name.c_str(), c.discrepancy, c.tolerance,
                    c.passed ? "PASS" : "FAIL");
        all = all && c.passed;
    }
    return all ? kOk : kRunFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conformal prediction intervals for polynomial chaos surrogates"};
    app.require_subcommand(1);

    RunFlags flags;
    std::string config_path;
    std::string figure;
    std::uint64_t validate_seed = 1;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", flags.seed, "master seed (overrides the config)");
        sub->add_option("--out", flags.out, "output directory (overrides CPCE_OUT_DIR and the config)");
        sub->add_option("--threads", flags.threads, "worker threads")->check(CLI::PositiveNumber);
    };

    auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
    run->add_option("--config", config_path, "config file")->required();
    add_common(run);

    auto* reproduce = app.add_subcommand("reproduce", "run a canned benchmark setting");
    reproduce->add_option("--figure", figure, "setting id")
        ->required()
        ->check(CLI::IsMember(cpce::figure_ids()));
    reproduce->add_option("--replications", flags.replications, "replication count")->check(CLI::PositiveNumber);
    add_common(reproduce);

    auto* validate = app.add_subcommand("validate", "check fast solvers against slow oracles");
    validate->add_option("--seed", validate_seed, "seed of the random test problems");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << app.help();
        return report_error("usage", e.what(), kUsage);
    }

    try {
        if (run->parsed()) {
            cpce::ExperimentConfig cfg;
            try {
                cfg = cpce::load_config(config_path);
            } catch (const cpce::IoError& e) {
                return report_error("usage", e.what(), kUsage);
            } catch (const cpce::ConfigError& e) {
                return report_error("config", e.what(), kUsage);
            }
            return execute(cfg, flags);
        }
        if (reproduce->parsed()) return execute(cpce::canned_config(figure), flags);
        return validate_cmd(validate_seed);
    } catch (const cpce::ConfigError& e) {
        return report_error("config", e.what(), kUsage);
    } catch (const std::exception& e) {
        return report_error("internal", e.what(), kRunFailure);
    }
}
