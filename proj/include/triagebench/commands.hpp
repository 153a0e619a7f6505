#pragma once

// Command implementations behind the CLI. Each command returns its report
// as JSON plus optional CSV extracts, so tests can run them in-process.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "triagebench/common.hpp"

namespace triagebench::commands {

struct RunConfig {
    std::string command;
    std::vector<std::string> inputs;
    std::string schema;
    std::string policy;
    std::string registry = "locked_thresholds.json";
    std::string external;  // prioritize: external cohort
    std::string counts;    // second-review: published per-threshold counts
    std::string out;       // output directory; not part of the report
    std::uint64_t seed = kDefaultSeed;
    int resamples = kDefaultResamples;
    double level = 0.95;
    unsigned threads = 1;  // never changes results; not part of the report
    bool relock = false;
    bool stratify = false;
    bool wald = false;
    bool lower_is_better = false;
    std::optional<double> t_low, t_high, threshold, cut;
    std::vector<double> rates;
    std::vector<std::string> covariates;
    std::string tag;
    std::string reference;
    std::size_t bins = 10;
};

struct CommandResult {
    nlohmann::json report;
    // 0 = every analysis completed, 2 = some analyses failed (listed in the report)
    int exit_code = 0;
    std::vector<std::pair<std::string, std::string>> extracts;  // file name, CSV text
};

std::vector<std::string> command_names();

// Throws InputError for bad input or an unknown command.
CommandResult run(const RunConfig& cfg);

nlohmann::json config_json(const RunConfig& cfg);

// Writes report.json and every extract under cfg.out (created if needed).
void write_outputs(const RunConfig& cfg, const CommandResult& result);

}  // namespace triagebench::commands
