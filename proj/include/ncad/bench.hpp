#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ncad/evalkit.hpp"
#include "ncad/synthgen.hpp"

// Config-driven experiment runner: a suite config names the data (generated
// width suite or a manifest on disk), a base training config, a grid or
// random search space, and the seeds. Every (overrides, width, seed) cell
// trains, scores, and evaluates; finished cells persist as JSON so an
// interrupted suite resumes where it stopped, and groups of seeds consolidate
// into mean +/- std tables.
namespace ncad::bench {

struct SuiteConfig {
    std::string name = "bench";
    std::vector<std::uint64_t> seeds{0};
    EvalMode mode = EvalMode::adjusted;
    std::string threshold_from = "test";  // test | val (manifest data only)
    int jobs = 1;

    bool synth = true;  // false: manifest data
    SynthConfig synth_config;
    std::vector<double> widths{0.0};
    std::filesystem::path manifest;
    std::string train_split = "train";
    std::string validation_split = "validation";
    std::string test_split = "test";

    nlohmann::json base_config = nlohmann::json::object();
    // Dotted config path -> candidate values, expanded as a cartesian product.
    std::map<std::string, std::vector<nlohmann::json>> grid;

    void validate() const;
};

SuiteConfig suite_config_from_json(const nlohmann::json& j);

struct Cell {
    std::string name;  // file stem, unique within the suite
    std::map<std::string, nlohmann::json> overrides;
    double width = 0.0;  // synth suites only
    std::uint64_t seed = 0;
};

// Grid-major, then width, then seed; deterministic order.
std::vector<Cell> enumerate_cells(const SuiteConfig& suite);

// Applies `value` at a dotted path like "augment.mixup_rate", creating
// intermediate objects.
void set_dotted(nlohmann::json& j, const std::string& dotted_key, const nlohmann::json& value);

// Trains and evaluates one cell; pure given the suite config and cell.
nlohmann::json run_cell(const SuiteConfig& suite, const Cell& cell);

// Runs every cell (skipping finished ones), writes cells/<name>.json files,
// a consolidated bench_report.json, and a plain-text table next to it.
// Returns the consolidated report. jobs > 1 forks one process per cell.
nlohmann::json run_bench(const SuiteConfig& suite, const std::filesystem::path& out_dir,
                         bool quiet = false);

// mean and sample standard deviation (n-1; zero when n < 2).
std::pair<double, double> mean_std(std::span<const double> values);

std::string bench_table(const nlohmann::json& report);

}  // namespace ncad::bench
