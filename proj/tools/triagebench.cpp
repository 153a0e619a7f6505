// triagebench: command-line front end.
//
//   triagebench <command> --input FILE [--schema FILE] [--policy FILE] ...
//
// The report goes to stdout unless --out is given, in which case report.json
// and any CSV extracts are written there.

#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "triagebench/commands.hpp"
#include "triagebench/report.hpp"

namespace tb = triagebench;

namespace {

std::uint64_t default_seed() {
    if (const char* env = std::getenv("TRIAGEBENCH_SEED")) {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(env, &used);
            if (used == std::string(env).size()) return v;
        } catch (const std::exception&) {
        }
        std::cerr << "warning: ignoring malformed TRIAGEBENCH_SEED='" << env << "'\n";
    }
    return tb::kDefaultSeed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decision-threshold and clinical-workflow evaluation toolkit"};
    app.set_version_flag("--version", std::string(tb::kVersion));

    tb::commands::RunConfig cfg;
    cfg.seed = default_seed();
    double t_low = 0, t_high = 0, threshold = 0, cut = 0;

    app.add_option("command", cfg.command, "Analysis to run")
        ->required()
        ->check(CLI::IsMember(tb::commands::command_names()));
    app.add_option("-i,--input", cfg.inputs, "Input CSV (cohort, reader, survival, paired or metric table)");
    app.add_option("--schema", cfg.schema, "Cohort schema JSON");
    app.add_option("--policy", cfg.policy, "Threshold policy JSON");
    app.add_option("--registry", cfg.registry, "Locked-threshold registry")->capture_default_str();
    app.add_option("--external", cfg.external, "External cohort for prioritize");
    app.add_option("--counts", cfg.counts, "Per-threshold counts CSV for second-review");
    app.add_option("--seed", cfg.seed, "Bootstrap seed (default 20240212, or TRIAGEBENCH_SEED)");
    app.add_option("--resamples", cfg.resamples, "Bootstrap resamples")->capture_default_str();
    app.add_option("--level", cfg.level, "Confidence level")->capture_default_str();
    app.add_option("--threads", cfg.threads, "Worker threads (results do not depend on this)")->capture_default_str();
    app.add_option("-o,--out", cfg.out, "Output directory");
    app.add_flag("--relock", cfg.relock, "Allow replacing a locked threshold");
    app.add_flag("--stratify", cfg.stratify, "Stratify bootstrap resampling by class");
    app.add_flag("--wald", cfg.wald, "Wald intervals for Cox hazard ratios instead of bootstrap");
    app.add_flag("--lower-is-better", cfg.lower_is_better, "compare: smaller metric values rank first");
    auto* o_low = app.add_option("--t-low", t_low, "Rule-out threshold");
    auto* o_high = app.add_option("--t-high", t_high, "Rule-in threshold");
    auto* o_thr = app.add_option("--threshold", threshold, "second-review: single threshold");
    auto* o_cut = app.add_option("--cut", cut, "survival: risk-group cut point (default median)");
    app.add_option("--rates", cfg.rates, "prioritize: testing rates in (0,1]")->delimiter(',');
    app.add_option("--covariates", cfg.covariates, "survival: covariates for the multivariable model")->delimiter(',');
    app.add_option("--tag", cfg.tag, "subgroup: tag to filter on");
    app.add_option("--reference", cfg.reference, "compare: reference model");
    app.add_option("--bins", cfg.bins, "Bins for binned trend")->capture_default_str();

    CLI11_PARSE(app, argc, argv);
    if (*o_low) cfg.t_low = t_low;
    if (*o_high) cfg.t_high = t_high;
    if (*o_thr) cfg.threshold = threshold;
    if (*o_cut) cfg.cut = cut;
    if (cfg.threads == 0) cfg.threads = 1;

    try {
        const auto result = tb::commands::run(cfg);
        if (cfg.out.empty()) {
            std::cout << tb::report::dump(result.report);
        } else {
            tb::commands::write_outputs(cfg, result);
            std::cerr << "wrote " << cfg.out << "/report.json\n";
        }
        for (const auto& f : result.report["failures"]) {
            std::cerr << "failed: " << f["analysis"].get<std::string>() << ": " << f["error"].get<std::string>() << "\n";
        }
        return result.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
