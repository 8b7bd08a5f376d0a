#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ssmamp/errors.hpp"
#include "ssmamp/experiments.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Sufficient-statistic memory AMP experiments"};
    app.require_subcommand(1);

    ssmamp::RunnerOptions opts;
    std::string config_path;
    bool algebra_only = false;
    app.add_option("--out", opts.out_dir, "output directory (overrides the config)");
    app.add_option("--workers", opts.workers, "seeds run concurrently")->check(CLI::PositiveNumber);
    app.add_option("--seed-offset", opts.seed_offset, "added to every configured seed");

    auto* run = app.add_subcommand("run", "plain and ss runs, SE and summary");
    auto* verify = app.add_subcommand("verify", "invariant battery");
    auto* se = app.add_subcommand("se", "state evolution only");
    for (auto* sub : {run, verify, se}) {
        sub->add_option("config", config_path, "config file")->required();
        sub->fallthrough();
    }
    verify->add_flag("--algebra-only", algebra_only, "only the closed-form algebra checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : ssmamp::kExitConfig;
    }

    ssmamp::ExperimentConfig cfg;
    try {
        cfg = ssmamp::load_config(config_path);
    } catch (const ssmamp::Error& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return ssmamp::kExitConfig;
    }
    if (algebra_only) cfg.algebra_only = true;

    if (run->parsed()) return ssmamp::run_experiment(cfg, opts, std::cout);
    if (se->parsed()) return ssmamp::run_se_only(cfg, opts, std::cout);
    return ssmamp::verify_suite(cfg, opts, std::cout);
}
