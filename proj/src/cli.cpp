#include "ncad/cli.hpp"

#include <algorithm>
#include <iostream>

#include "ncad/augment.hpp"
#include "ncad/checkpoint.hpp"
#include "ncad/encoder.hpp"
#include "ncad/io.hpp"
#include "ncad/synthgen.hpp"

namespace ncad::cli {

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

std::string run_dir_name(const nlohmann::json& resolved_config, std::uint64_t seed) {
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a(resolved_config.dump())));
    return std::string(hex) + "-seed" + std::to_string(seed);
}

nlohmann::json load_config_file(const std::filesystem::path& path) {
    try {
        return read_json_file(path);
    } catch (const DataError& e) {
        // Malformed run configuration is a config error, not a data error.
        throw ConfigError(e.what());
    }
}

namespace {

// Nested schema of legal training-config keys; a leaf is marked by an empty
// subtree. Unknown keys abort instead of silently meaning a default.
struct KeyTree {
    const char* name;
    std::vector<KeyTree> children;
};

const KeyTree kTrainSchema{
    "",
    {
        {"b_s", {}},
        {"b_c", {}},
        {"augment",
         {{"coe_rate", {}},
          {"mixup_rate", {}},
          {"mixup_alpha", {}},
          {"po_count_per_series", {}},
          {"po_magnitude_lo", {}},
          {"po_magnitude_hi", {}},
          {"po_neighborhood", {}}}},
        {"epochs", {}},
        {"batches_per_epoch", {}},
        {"optimizer", {{"variant", {}}, {"lr", {}}, {"beta1", {}}, {"beta2", {}}, {"eps", {}}}},
        {"grad_clip_norm", {}},
        {"seed", {}},
        {"early_stopping", {{"enabled", {}}, {"patience", {}}}},
        {"distance", {}},
        {"loss_mode", {}},
        {"window", {{"context_length", {}}, {"suspect_length", {}}, {"stride", {}}}},
        {"encoder",
         {{"input_channels", {}},
          {"num_blocks", {}},
          {"kernel_size", {}},
          {"hidden_channels", {}},
          {"embedding_dim", {}},
          {"leaky_relu_slope", {}}}},
        {"standardize", {}},
        {"standardize_method", {}},
        {"unlabeled", {}},
    }};

void require_keys(const nlohmann::json& j, const KeyTree& tree, const std::string& prefix) {
    if (!j.is_object()) {
        throw ConfigError("config section '" + (prefix.empty() ? "<root>" : prefix) +
                          "' must be a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        const auto it = std::find_if(tree.children.begin(), tree.children.end(),
                                     [&](const KeyTree& c) { return key == c.name; });
        const auto path = prefix.empty() ? key : prefix + "." + key;
        if (it == tree.children.end()) {
            throw ConfigError("unknown config key '" + path + "'");
        }
        if (!it->children.empty()) require_keys(value, *it, path);
    }
}

Dataset take_split(std::vector<Dataset>& datasets, const std::string& split,
                   const std::filesystem::path& manifest) {
    for (auto& dataset : datasets) {
        if (dataset.split == split) return std::move(dataset);
    }
    throw DataError(manifest.string() + ": no series tagged split '" + split + "'");
}

bool has_split(const std::vector<Dataset>& datasets, const std::string& split) {
    return std::any_of(datasets.begin(), datasets.end(),
                       [&](const Dataset& d) { return d.split == split; });
}

std::int64_t channel_count(const Dataset& dataset, const std::string& what) {
    if (dataset.series.empty()) throw DataError(what + " split holds no series");
    const auto D = dataset.series.front().channels;
    for (const auto& s : dataset.series) {
        if (s.channels != D) {
            throw DataError("series '" + s.id + "' has " + std::to_string(s.channels) +
                            " channels, expected " + std::to_string(D));
        }
    }
    return D;
}

RollingScoreOptions score_options_for(const TrainConfig& config,
                                      const std::vector<double>& center) {
    RollingScoreOptions options;
    if (config.loss_mode == LossMode::fixed_center) options.center = center;
    return options;
}

std::vector<ScoreTrace> score_dataset(const Dataset& dataset, const ParameterSet& params,
                                      const TrainConfig& config,
                                      const RollingScoreOptions& options) {
    std::vector<ScoreTrace> traces;
    traces.reserve(dataset.series.size());
    for (const auto& series : dataset.series) {
        traces.push_back(
            rolling_score(series, config.window, params, config.encoder, config.distance, options));
    }
    return traces;
}

nlohmann::json stats_to_json(const std::optional<StandardizationStats>& stats) {
    if (!stats) return nullptr;
    return nlohmann::json{{"location", stats->location}, {"scale", stats->scale}};
}

}  // namespace

void require_train_config_keys(const nlohmann::json& j) { require_keys(j, kTrainSchema, ""); }

std::int64_t impute_dataset(Dataset& dataset) {
    std::int64_t filled = 0;
    for (auto& series : dataset.series) filled += impute_missing(series);
    return filled;
}

std::vector<ScoreTrace> load_traces_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw DataError("'" + dir.string() + "' is not a directory");
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("'" + dir.string() + "' holds no trace CSVs");
    std::vector<ScoreTrace> traces;
    traces.reserve(files.size());
    for (const auto& path : files) traces.push_back(read_trace_csv(path, path.stem().string()));
    return traces;
}

CheckpointBundle load_model(const std::filesystem::path& checkpoint_path) {
    auto ckpt = load_checkpoint(checkpoint_path);
    if (!ckpt.meta.contains("config")) {
        throw DataError(checkpoint_path.string() + ": checkpoint lacks an embedded config");
    }
    CheckpointBundle bundle;
    try {
        bundle.config = ckpt.meta.at("config").get<TrainConfig>();
        if (ckpt.meta.contains("stats") && !ckpt.meta.at("stats").is_null()) {
            StandardizationStats stats;
            ckpt.meta.at("stats").at("location").get_to(stats.location);
            ckpt.meta.at("stats").at("scale").get_to(stats.scale);
            bundle.stats = std::move(stats);
        }
        if (ckpt.meta.contains("center") && !ckpt.meta.at("center").is_null()) {
            ckpt.meta.at("center").get_to(bundle.center);
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(checkpoint_path.string() + ": bad checkpoint metadata: " + e.what());
    }
    bundle.params = ckpt.to_parameter_set();
    return bundle;
}

TrainOutcome cmd_train(const TrainArgs& args) {
    auto config_json = load_config_file(args.config_path);
    require_train_config_keys(config_json);
    TrainConfig config;
    try {
        config = config_json.get<TrainConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(args.config_path.string() + ": " + e.what());
    }
    if (args.seed) config.seed = *args.seed;

    auto datasets = load_datasets(args.manifest);
    auto train = take_split(datasets, args.train_split, args.manifest);
    std::optional<Dataset> validation;
    if (!args.no_validation && has_split(datasets, args.validation_split)) {
        validation = take_split(datasets, args.validation_split, args.manifest);
    }

    const auto filled = impute_dataset(train) + (validation ? impute_dataset(*validation) : 0);
    if (filled > 0 && !args.quiet) {
        std::cerr << "note: imputed " << filled << " missing cells\n";
    }

    // The channel count comes from the data unless the config pinned it.
    const auto D = channel_count(train, args.train_split);
    const bool pinned = config_json.contains("encoder") &&
                        config_json.at("encoder").contains("input_channels");
    if (pinned && config.encoder.input_channels != D) {
        throw ConfigError("config pins input_channels=" +
                          std::to_string(config.encoder.input_channels) + " but '" +
                          args.train_split + "' has " + std::to_string(D) + " channels");
    }
    config.encoder.input_channels = D;
    config.validate();

    if (const auto warning = receptive_field_warning(config.encoder, config.window)) {
        if (!args.quiet) std::cerr << "warning: " << *warning << "\n";
    }

    const nlohmann::json resolved = config;
    const auto run_dir = args.out_root / run_dir_name(resolved, config.seed);
    std::filesystem::create_directories(run_dir);
    write_json_file(run_dir / "resolved_config.json", resolved);

    auto result = fit(train, validation ? &*validation : nullptr, config);

    nlohmann::json meta{{"meta_version", 1},
                        {"config", resolved},
                        {"stats", stats_to_json(result.stats)},
                        {"center", result.center.empty() ? nlohmann::json(nullptr)
                                                         : nlohmann::json(result.center)}};
    save_checkpoint(run_dir / "model.ckpt", result.params, meta);

    TrainOutcome outcome;
    outcome.run_dir = run_dir;
    outcome.report = result.report;

    auto report_json = train_report_to_json(result.report);
    if (validation) {
        // Threshold from the returned (best-epoch) parameters, scored by the
        // model's own rule.
        Dataset scored = *validation;
        if (result.stats) {
            for (auto& s : scored.series) s = standardize(s, *result.stats);
        }
        const auto traces =
            score_dataset(scored, result.params, config, score_options_for(config, result.center));
        const auto choice = select_threshold(traces, scored.series, EvalMode::adjusted);
        write_threshold_json(run_dir / "threshold.json", choice.threshold);
        report_json["validation_threshold"] = choice.threshold;
        outcome.threshold = choice.threshold;
    }
    write_json_file(run_dir / "report.json", report_json);

    if (!args.quiet) {
        std::cout << "run " << run_dir.string() << ": " << result.report.epochs_run << " epochs";
        if (result.report.best_epoch > 0) {
            std::cout << ", best validation f1 " << result.report.best_validation_f1 << " at epoch "
                      << result.report.best_epoch;
        }
        std::cout << "\n";
    }
    return outcome;
}

std::vector<ScoreTrace> cmd_score(const ScoreArgs& args) {
    auto bundle = load_model(args.checkpoint);

    auto datasets = load_datasets(args.manifest);
    auto dataset = take_split(datasets, args.split, args.manifest);
    const auto filled = impute_dataset(dataset);
    if (filled > 0 && !args.quiet) {
        std::cerr << "note: imputed " << filled << " missing cells\n";
    }
    const auto D = channel_count(dataset, args.split);
    if (D != bundle.config.encoder.input_channels) {
        throw DataError("model expects " + std::to_string(bundle.config.encoder.input_channels) +
                        " channels, split '" + args.split + "' has " + std::to_string(D));
    }
    if (bundle.stats) {
        for (auto& s : dataset.series) s = standardize(s, *bundle.stats);
    }

    auto options = score_options_for(bundle.config, bundle.center);
    const std::string aggregation =
        args.aggregation == "max" ? "max-first-alert" : args.aggregation;
    options.aggregation = aggregation_from_string(aggregation);
    options.transform = score_transform_from_string(args.transform);
    options.pad_warmup = args.pad_warmup;

    std::filesystem::create_directories(args.out_dir);
    auto traces = score_dataset(dataset, bundle.params, bundle.config, options);
    for (const auto& trace : traces) {
        write_trace_csv(args.out_dir / (trace.series_id + ".csv"), trace);
    }
    write_json_file(args.out_dir / "score_config.json",
                    nlohmann::json{{"checkpoint", args.checkpoint.string()},
                                   {"manifest", args.manifest.string()},
                                   {"split", args.split},
                                   {"aggregation", to_string(options.aggregation)},
                                   {"transform", to_string(options.transform)},
                                   {"pad_warmup", options.pad_warmup},
                                   {"fixed_center", !options.center.empty()}});
    if (!args.quiet) {
        std::cout << "wrote " << traces.size() << " traces to " << args.out_dir.string() << "\n";
    }
    return traces;
}

EvalResult cmd_evaluate(const EvaluateArgs& args) {
    const auto mode = eval_mode_from_string(args.mode);
    const auto traces = load_traces_dir(args.traces_dir);
    auto datasets = load_datasets(args.manifest);
    const auto dataset = take_split(datasets, args.split, args.manifest);

    EvalResult result;
    if (args.threshold_from == "test") {
        result = select_threshold(traces, dataset.series, mode).result;
    } else if (args.threshold_from == "val") {
        if (args.val_traces_dir.empty()) {
            throw ConfigError("--threshold-from val needs --val-traces");
        }
        const auto val_traces = load_traces_dir(args.val_traces_dir);
        auto val_datasets = load_datasets(args.manifest);
        const auto val = take_split(val_datasets, args.val_split, args.manifest);
        const auto choice = select_threshold(val_traces, val.series, mode);
        result = evaluate_dataset(traces, dataset.series, choice.threshold, mode);
    } else if (args.threshold_from == "file") {
        if (args.threshold_file.empty()) {
            throw ConfigError("--threshold-from file needs --threshold-file");
        }
        result = evaluate_dataset(traces, dataset.series,
                                  read_threshold_json(args.threshold_file), mode);
    } else {
        throw ConfigError("unknown threshold source '" + args.threshold_from +
                          "' (expected test, val, or file)");
    }

    if (!args.out_json.empty()) {
        auto j = eval_result_to_json(result);
        j["threshold_source"] = args.threshold_from;
        write_json_file(args.out_json, j);
    }
    if (!args.quiet) std::cout << eval_result_table(result);
    return result;
}

namespace {

const KeyTree kInjectSchema{
    "",
    {
        {"seed", {}},
        {"po",
         {{"po_count_per_series", {}},
          {"po_magnitude_lo", {}},
          {"po_magnitude_hi", {}},
          {"po_neighborhood", {}}}},
        {"slopes",
         {{"count", {}},
          {"duration_lo", {}},
          {"duration_hi", {}},
          {"magnitude_lo", {}},
          {"magnitude_hi", {}}}},
    }};

SlopeParams slope_params_from_json(const nlohmann::json& j) {
    SlopeParams params;
    if (j.contains("count")) j.at("count").get_to(params.count);
    if (j.contains("duration_lo")) j.at("duration_lo").get_to(params.duration_lo);
    if (j.contains("duration_hi")) j.at("duration_hi").get_to(params.duration_hi);
    if (j.contains("magnitude_lo")) j.at("magnitude_lo").get_to(params.magnitude_lo);
    if (j.contains("magnitude_hi")) j.at("magnitude_hi").get_to(params.magnitude_hi);
    return params;
}

nlohmann::json slope_params_to_json(const SlopeParams& params) {
    return nlohmann::json{{"count", params.count},
                          {"duration_lo", params.duration_lo},
                          {"duration_hi", params.duration_hi},
                          {"magnitude_lo", params.magnitude_lo},
                          {"magnitude_hi", params.magnitude_hi}};
}

}  // namespace

Dataset cmd_inject(const InjectArgs& args) {
    auto config_json = load_config_file(args.config_path);
    require_keys(config_json, kInjectSchema, "");

    std::uint64_t seed = 0;
    if (config_json.contains("seed")) config_json.at("seed").get_to(seed);
    AugmentConfig po;
    if (config_json.contains("po")) config_json.at("po").get_to(po);
    po.validate();
    SlopeParams slopes;
    if (config_json.contains("slopes")) slopes = slope_params_from_json(config_json.at("slopes"));

    auto datasets = load_datasets(args.manifest);
    auto dataset = take_split(datasets, args.split, args.manifest);

    // One child stream per effect; series are visited in dataset order so a
    // seed pins every draw.
    const Rng root(seed);
    Rng po_rng = root.fork(1);
    Rng slope_rng = root.fork(2);
    for (auto& series : dataset.series) {
        if (po.po_count_per_series > 0) series = inject_point_outliers(series, po, po_rng);
        if (slopes.count > 0) series = inject_slopes(series, slopes, slope_rng);
    }

    const std::vector<Dataset> out{dataset};
    save_dataset(args.out_dir, out);
    write_json_file(args.out_dir / "provenance.json",
                    nlohmann::json{{"command", "inject"},
                                   {"seed", seed},
                                   {"po", nlohmann::json{{"po_count_per_series", po.po_count_per_series},
                                                         {"po_magnitude_lo", po.po_magnitude_lo},
                                                         {"po_magnitude_hi", po.po_magnitude_hi},
                                                         {"po_neighborhood", po.po_neighborhood}}},
                                   {"slopes", slope_params_to_json(slopes)},
                                   {"source_manifest", args.manifest.string()},
                                   {"split", args.split}});
    return dataset;
}

std::vector<std::filesystem::path> cmd_synth(const SynthArgs& args) {
    auto config_json = load_config_file(args.config_path);

    static const KeyTree kSynthSchema{"",
                                      {{"train_series", {}},
                                       {"test_series", {}},
                                       {"length", {}},
                                       {"period", {}},
                                       {"amplitude", {}},
                                       {"noise_std", {}},
                                       {"anomalies_per_series", {}},
                                       {"base_magnitude", {}},
                                       {"widths", {}},
                                       {"seeds", {}}}};
    require_keys(config_json, kSynthSchema, "");

    std::vector<double> widths{0.0};
    if (config_json.contains("widths")) {
        config_json.at("widths").get_to(widths);
        config_json.erase("widths");
    }
    std::vector<std::uint64_t> seeds{0};
    if (config_json.contains("seeds")) {
        config_json.at("seeds").get_to(seeds);
        config_json.erase("seeds");
    }
    SynthConfig config = config_json.get<SynthConfig>();

    const auto suite = make_width_suite(widths, seeds, config);
    std::vector<std::filesystem::path> dirs;
    dirs.reserve(suite.size());
    for (const auto& pair : suite) {
        const auto dir = args.out_root / ("width" + format_double(pair.width) + "-seed" +
                                          std::to_string(pair.seed));
        const std::vector<Dataset> datasets{pair.train, pair.test};
        save_dataset(dir, datasets);
        write_json_file(dir / "provenance.json",
                        nlohmann::json{{"command", "synth"},
                                       {"generator", config},
                                       {"width", pair.width},
                                       {"seed", pair.seed}});
        dirs.push_back(dir);
    }
    return dirs;
}

void cmd_convert(const ConvertArgs& args) {
    std::vector<Dataset> datasets;
    if (args.format == "nasa") {
        datasets = nasa_format(args.input);
    } else if (args.format == "smd") {
        datasets = smd_format(args.input);
    } else if (args.format == "yahoo") {
        datasets = yahoo_format(args.input);
    } else if (args.format == "kpi") {
        datasets = kpi_format(args.input);
    } else {
        throw ConfigError("unknown format '" + args.format +
                          "' (expected nasa, smd, yahoo, or kpi)");
    }
    save_dataset(args.out_dir, datasets);
    write_json_file(args.out_dir / "provenance.json",
                    nlohmann::json{{"command", "convert"},
                                   {"format", args.format},
                                   {"source", args.input.string()}});
}

}  // namespace ncad::cli
