#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncad/detector.hpp"
#include "ncad/evalkit.hpp"
#include "ncad/series.hpp"
#include "ncad/trainer.hpp"

// Command implementations behind the ncad binary. Each cmd_* does the whole
// job (load, compute, write artifacts) and throws the usual error taxonomy;
// the binary maps exceptions to exit codes. Keeping them callable as plain
// functions lets tests drive full runs without spawning processes.
namespace ncad::cli {

// FNV-1a over the compact dump; stable across runs, used to name run dirs.
std::uint64_t fnv1a(const std::string& text);
std::string run_dir_name(const nlohmann::json& resolved_config, std::uint64_t seed);

// json parse with file/position context; parse failures are config errors.
nlohmann::json load_config_file(const std::filesystem::path& path);

// Rejects config keys outside the training schema, recursively, so a typo
// fails loudly instead of silently falling back to a default.
void require_train_config_keys(const nlohmann::json& j);

// Fills NaN cells in every series (forward fill, zero-filled lead); returns
// total cells imputed.
std::int64_t impute_dataset(Dataset& dataset);

// Loads every <id>.csv under dir (sorted by name) as a score trace.
std::vector<ScoreTrace> load_traces_dir(const std::filesystem::path& dir);

// Scoring options reconstructed from a checkpoint: fixed-center models score
// against their stored center, contextual models against the context.
struct CheckpointBundle {
    ParameterSet params;
    TrainConfig config;
    std::optional<StandardizationStats> stats;
    std::vector<double> center;
};
CheckpointBundle load_model(const std::filesystem::path& checkpoint_path);

struct TrainArgs {
    std::filesystem::path config_path;
    std::filesystem::path manifest;
    std::filesystem::path out_root;
    std::string train_split = "train";
    std::string validation_split = "validation";
    bool no_validation = false;  // ignore the validation split even if present
    std::optional<std::uint64_t> seed;  // overrides the config seed
    bool quiet = false;
};

struct TrainOutcome {
    std::filesystem::path run_dir;  // holds model.ckpt, report.json, resolved_config.json
    TrainReport report;
    std::optional<double> threshold;  // selected on validation when present
};

TrainOutcome cmd_train(const TrainArgs& args);

struct ScoreArgs {
    std::filesystem::path checkpoint;
    std::filesystem::path manifest;
    std::string split = "test";
    std::filesystem::path out_dir;
    std::string aggregation = "mean";
    std::string transform = "exp-sq";
    bool pad_warmup = false;
    bool quiet = false;
};

std::vector<ScoreTrace> cmd_score(const ScoreArgs& args);

struct EvaluateArgs {
    std::filesystem::path traces_dir;
    std::filesystem::path manifest;
    std::string split = "test";
    std::string mode = "adjusted";
    std::string threshold_from = "test";   // test | val | file
    std::filesystem::path threshold_file;  // threshold_from == file
    std::filesystem::path val_traces_dir;  // threshold_from == val
    std::string val_split = "validation";
    std::filesystem::path out_json;  // optional; empty skips the file
    bool quiet = false;
};

EvalResult cmd_evaluate(const EvaluateArgs& args);

struct InjectArgs {
    std::filesystem::path config_path;  // {"seed", "po": {...}, "slopes": {...}}
    std::filesystem::path manifest;
    std::string split = "train";
    std::filesystem::path out_dir;
};

// Returns the augmented dataset it wrote.
Dataset cmd_inject(const InjectArgs& args);

struct SynthArgs {
    std::filesystem::path config_path;  // SynthConfig keys + "widths" + "seeds"
    std::filesystem::path out_root;
};

// One canonical dataset dir per (width, seed); returns their paths.
std::vector<std::filesystem::path> cmd_synth(const SynthArgs& args);

struct ConvertArgs {
    std::string format;  // nasa | smd | yahoo | kpi
    std::filesystem::path input;
    std::filesystem::path out_dir;
};

void cmd_convert(const ConvertArgs& args);

}  // namespace ncad::cli
