#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ncad/bench.hpp"
#include "ncad/cli.hpp"
#include "ncad/io.hpp"

using namespace ncad;

namespace {

int dispatch(CLI::App& app, int argc, char** argv) {
    cli::TrainArgs train_args;
    std::uint64_t seed_override = 0;
    auto* train = app.add_subcommand("train", "Train a detector from a config and a manifest");
    train->add_option("--config", train_args.config_path, "Training config JSON")->required();
    train->add_option("--data", train_args.manifest, "Dataset manifest JSON")->required();
    train->add_option("--out", train_args.out_root, "Directory that receives the run dir")
        ->required();
    train->add_option("--train-split", train_args.train_split, "Split tag to train on");
    train->add_option("--validation-split", train_args.validation_split,
                      "Split tag watched for early stopping");
    train->add_flag("--no-validation", train_args.no_validation,
                    "Train without a validation split even if one exists");
    auto* seed_opt =
        train->add_option("--seed", seed_override, "Overrides the seed in the config");
    train->add_flag("--quiet", train_args.quiet, "Suppress progress output");

    cli::ScoreArgs score_args;
    auto* score = app.add_subcommand("score", "Emit rolling score traces for a split");
    score->add_option("--checkpoint", score_args.checkpoint, "model.ckpt from train")->required();
    score->add_option("--data", score_args.manifest, "Dataset manifest JSON")->required();
    score->add_option("--split", score_args.split, "Split tag to score");
    score->add_option("--out", score_args.out_dir, "Directory for trace CSVs")->required();
    score->add_option("--aggregation", score_args.aggregation,
                      "Overlap aggregation: mean or max");
    score->add_option("--transform", score_args.transform,
                      "Score to probability map: exp-sq or exp-abs");
    score->add_flag("--pad-warmup", score_args.pad_warmup,
                    "Score the warm-up prefix via edge padding");
    score->add_flag("--quiet", score_args.quiet, "Suppress progress output");

    cli::EvaluateArgs eval_args;
    auto* evaluate = app.add_subcommand("evaluate", "Score traces against labels");
    evaluate->add_option("--traces", eval_args.traces_dir, "Directory of trace CSVs")->required();
    evaluate->add_option("--data", eval_args.manifest, "Dataset manifest JSON")->required();
    evaluate->add_option("--split", eval_args.split, "Split tag holding the labels");
    evaluate->add_option("--mode", eval_args.mode, "adjusted or pointwise");
    evaluate->add_option("--threshold-from", eval_args.threshold_from,
                         "Threshold source: test, val, or file");
    evaluate->add_option("--threshold-file", eval_args.threshold_file,
                         "threshold.json (with --threshold-from file)");
    evaluate->add_option("--val-traces", eval_args.val_traces_dir,
                         "Validation trace dir (with --threshold-from val)");
    evaluate->add_option("--val-split", eval_args.val_split, "Validation split tag");
    evaluate->add_option("--out", eval_args.out_json, "Write the result JSON here");
    evaluate->add_flag("--quiet", eval_args.quiet, "Suppress the result table");

    cli::InjectArgs inject_args;
    auto* inject = app.add_subcommand("inject", "Write a copy of a split with synthetic anomalies");
    inject->add_option("--config", inject_args.config_path, "Injection config JSON")->required();
    inject->add_option("--data", inject_args.manifest, "Dataset manifest JSON")->required();
    inject->add_option("--split", inject_args.split, "Split tag to augment");
    inject->add_option("--out", inject_args.out_dir, "Directory for the augmented dataset")
        ->required();

    cli::SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Generate sinusoid datasets with spike anomalies");
    synth->add_option("--config", synth_args.config_path, "Generator config JSON")->required();
    synth->add_option("--out", synth_args.out_root, "Directory for the generated datasets")
        ->required();

    std::filesystem::path bench_config_path, bench_out;
    bool bench_quiet = false;
    auto* bench_cmd = app.add_subcommand("bench", "Run an experiment suite");
    bench_cmd->add_option("--config", bench_config_path, "Suite config JSON")->required();
    bench_cmd->add_option("--out", bench_out, "Directory for cell files and reports")->required();
    bench_cmd->add_flag("--quiet", bench_quiet, "Suppress progress output");

    cli::ConvertArgs convert_args;
    auto* convert = app.add_subcommand("convert", "Convert a benchmark dump to canonical CSVs");
    convert->add_option("--format", convert_args.format, "nasa, smd, yahoo, or kpi")->required();
    convert->add_option("--input", convert_args.input, "Benchmark file or directory")->required();
    convert->add_option("--out", convert_args.out_dir, "Directory for the canonical dataset")
        ->required();

    app.require_subcommand(1);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Help/version exit 0; anything else is a bad invocation.
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (*train) {
        if (*seed_opt) train_args.seed = seed_override;
        cli::cmd_train(train_args);
    } else if (*score) {
        cli::cmd_score(score_args);
    } else if (*evaluate) {
        cli::cmd_evaluate(eval_args);
    } else if (*inject) {
        cli::cmd_inject(inject_args);
    } else if (*synth) {
        for (const auto& dir : cli::cmd_synth(synth_args)) {
            std::cout << dir.string() << "\n";
        }
    } else if (*bench_cmd) {
        bench::run_bench(bench::suite_config_from_json(cli::load_config_file(bench_config_path)),
                         bench_out, bench_quiet);
    } else if (*convert) {
        cli::cmd_convert(convert_args);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Contextual anomaly detection for time series"};
    try {
        return dispatch(app, argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
