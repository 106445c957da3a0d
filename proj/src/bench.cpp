#include "ncad/bench.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "ncad/cli.hpp"
#include "ncad/common.hpp"
#include "ncad/io.hpp"
#include "ncad/trainer.hpp"

namespace ncad::bench {

void SuiteConfig::validate() const {
    if (seeds.empty()) throw ConfigError("bench: seeds must be non-empty");
    if (jobs < 1) throw ConfigError("bench: jobs must be >= 1");
    if (threshold_from != "test" && threshold_from != "val") {
        throw ConfigError("bench: threshold_from must be test or val");
    }
    if (synth) {
        if (widths.empty()) throw ConfigError("bench: widths must be non-empty");
        if (threshold_from == "val") {
            throw ConfigError("bench: generated suites have no validation split; "
                              "threshold_from must be test");
        }
        synth_config.validate();
    } else if (manifest.empty()) {
        throw ConfigError("bench: manifest data needs a manifest path");
    }
    for (const auto& [key, values] : grid) {
        if (values.empty()) throw ConfigError("bench: grid key '" + key + "' lists no values");
    }
}

SuiteConfig suite_config_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> top{"name", "seeds",       "mode", "threshold_from",
                                              "jobs", "data",        "base_config", "grid"};
    static const std::vector<std::string> data_keys{
        "kind", "synth", "widths", "manifest", "train_split", "validation_split", "test_split"};
    for (const auto& [key, value] : j.items()) {
        if (std::find(top.begin(), top.end(), key) == top.end()) {
            throw ConfigError("bench: unknown suite key '" + key + "'");
        }
    }

    SuiteConfig suite;
    if (j.contains("name")) j.at("name").get_to(suite.name);
    if (j.contains("seeds")) j.at("seeds").get_to(suite.seeds);
    if (j.contains("mode")) suite.mode = eval_mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("threshold_from")) j.at("threshold_from").get_to(suite.threshold_from);
    if (j.contains("jobs")) j.at("jobs").get_to(suite.jobs);

    if (j.contains("data")) {
        const auto& data = j.at("data");
        for (const auto& [key, value] : data.items()) {
            if (std::find(data_keys.begin(), data_keys.end(), key) == data_keys.end()) {
                throw ConfigError("bench: unknown data key '" + key + "'");
            }
        }
        const auto kind = data.value("kind", std::string("synth"));
        if (kind == "synth") {
            suite.synth = true;
            if (data.contains("synth")) suite.synth_config = data.at("synth").get<SynthConfig>();
            if (data.contains("widths")) data.at("widths").get_to(suite.widths);
            if (data.contains("manifest")) {
                throw ConfigError("bench: a synth suite takes no manifest");
            }
        } else if (kind == "manifest") {
            suite.synth = false;
            if (data.contains("synth") || data.contains("widths")) {
                throw ConfigError("bench: manifest data takes no synth/widths keys");
            }
            if (!data.contains("manifest")) {
                throw ConfigError("bench: manifest data needs a 'manifest' path");
            }
            suite.manifest = data.at("manifest").get<std::string>();
            if (data.contains("train_split")) data.at("train_split").get_to(suite.train_split);
            if (data.contains("validation_split")) {
                data.at("validation_split").get_to(suite.validation_split);
            }
            if (data.contains("test_split")) data.at("test_split").get_to(suite.test_split);
        } else {
            throw ConfigError("bench: unknown data kind '" + kind + "'");
        }
    }

    if (j.contains("base_config")) suite.base_config = j.at("base_config");
    cli::require_train_config_keys(suite.base_config);
    if (j.contains("grid")) {
        for (const auto& [key, values] : j.at("grid").items()) {
            if (!values.is_array()) {
                throw ConfigError("bench: grid key '" + key + "' must list values");
            }
            suite.grid[key] = std::vector<nlohmann::json>(values.begin(), values.end());
        }
    }
    suite.validate();
    return suite;
}

void set_dotted(nlohmann::json& j, const std::string& dotted_key, const nlohmann::json& value) {
    nlohmann::json* node = &j;
    std::size_t from = 0;
    for (;;) {
        const auto dot = dotted_key.find('.', from);
        const auto part = dotted_key.substr(from, dot - from);
        if (part.empty()) throw ConfigError("bench: bad config path '" + dotted_key + "'");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        from = dot + 1;
    }
}

namespace {

// Portable file stem from a human-readable cell label.
std::string sanitize(const std::string& label) {
    std::string out;
    for (char c : label) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-' || c == '=';
        out.push_back(ok ? c : '_');
    }
    return out;
}

std::string value_label(const nlohmann::json& v) {
    auto s = v.dump();
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

std::string cell_stem(const SuiteConfig& suite, const Cell& cell) {
    std::string label;
    for (const auto& [key, value] : cell.overrides) {
        label += key + "=" + value_label(value) + "_";
    }
    if (suite.synth) label += "width=" + format_double(cell.width) + "_";
    label += "seed=" + std::to_string(cell.seed);
    return sanitize(label);
}

}  // namespace

std::vector<Cell> enumerate_cells(const SuiteConfig& suite) {
    // Cartesian product over grid keys (map order: sorted by key).
    std::vector<std::map<std::string, nlohmann::json>> combos{{}};
    for (const auto& [key, values] : suite.grid) {
        std::vector<std::map<std::string, nlohmann::json>> next;
        next.reserve(combos.size() * values.size());
        for (const auto& combo : combos) {
            for (const auto& value : values) {
                auto extended = combo;
                extended[key] = value;
                next.push_back(std::move(extended));
            }
        }
        combos = std::move(next);
    }

    const std::vector<double> widths = suite.synth ? suite.widths : std::vector<double>{0.0};
    std::vector<Cell> cells;
    cells.reserve(combos.size() * widths.size() * suite.seeds.size());
    for (const auto& combo : combos) {
        for (const auto width : widths) {
            for (const auto seed : suite.seeds) {
                Cell cell;
                cell.overrides = combo;
                cell.width = width;
                cell.seed = seed;
                cell.name = cell_stem(suite, cell);
                cells.push_back(std::move(cell));
            }
        }
    }
    return cells;
}

namespace {

struct CellData {
    Dataset train;
    std::optional<Dataset> validation;
    Dataset test;
};

CellData load_cell_data(const SuiteConfig& suite, const Cell& cell) {
    CellData data;
    if (suite.synth) {
        const double width = cell.width;
        const std::uint64_t seed = cell.seed;
        auto suite_pairs = make_width_suite(std::span<const double>(&width, 1),
                                            std::span<const std::uint64_t>(&seed, 1),
                                            suite.synth_config);
        data.train = std::move(suite_pairs[0].train);
        data.test = std::move(suite_pairs[0].test);
        return data;
    }
    auto datasets = load_datasets(suite.manifest);
    auto grab = [&](const std::string& split) -> Dataset* {
        for (auto& d : datasets) {
            if (d.split == split) return &d;
        }
        return nullptr;
    };
    auto* train = grab(suite.train_split);
    if (!train) throw DataError("bench: manifest lacks split '" + suite.train_split + "'");
    auto* test = grab(suite.test_split);
    if (!test) throw DataError("bench: manifest lacks split '" + suite.test_split + "'");
    data.train = std::move(*train);
    data.test = std::move(*test);
    if (auto* val = grab(suite.validation_split)) data.validation = std::move(*val);
    cli::impute_dataset(data.train);
    cli::impute_dataset(data.test);
    if (data.validation) cli::impute_dataset(*data.validation);
    return data;
}

}  // namespace

nlohmann::json run_cell(const SuiteConfig& suite, const Cell& cell) {
    auto config_json = suite.base_config;
    for (const auto& [key, value] : cell.overrides) set_dotted(config_json, key, value);
    cli::require_train_config_keys(config_json);
    auto config = config_json.get<TrainConfig>();
    config.seed = cell.seed;

    auto data = load_cell_data(suite, cell);
    if (data.train.series.empty()) throw DataError("bench: empty train split");
    const auto D = data.train.series.front().channels;
    const bool pinned = config_json.contains("encoder") &&
                        config_json.at("encoder").contains("input_channels");
    if (pinned && config.encoder.input_channels != D) {
        throw ConfigError("bench: config pins input_channels=" +
                          std::to_string(config.encoder.input_channels) + " but data has " +
                          std::to_string(D));
    }
    config.encoder.input_channels = D;
    config.validate();

    auto result = fit(data.train, data.validation ? &*data.validation : nullptr, config);

    auto scored_copy = [&](const Dataset& dataset) {
        Dataset out = dataset;
        if (result.stats) {
            for (auto& s : out.series) s = standardize(s, *result.stats);
        }
        return out;
    };
    RollingScoreOptions options;
    if (config.loss_mode == LossMode::fixed_center) options.center = result.center;
    auto score_all = [&](const Dataset& dataset) {
        std::vector<ScoreTrace> traces;
        traces.reserve(dataset.series.size());
        for (const auto& series : dataset.series) {
            traces.push_back(rolling_score(series, config.window, result.params, config.encoder,
                                           config.distance, options));
        }
        return traces;
    };

    const auto test = scored_copy(data.test);
    const auto test_traces = score_all(test);

    EvalResult metrics;
    if (suite.threshold_from == "val") {
        if (!data.validation) {
            throw DataError("bench: threshold_from=val but the manifest has no '" +
                            suite.validation_split + "' split");
        }
        const auto val = scored_copy(*data.validation);
        const auto choice = select_threshold(score_all(val), val.series, suite.mode);
        metrics = evaluate_dataset(test_traces, test.series, choice.threshold, suite.mode);
    } else {
        metrics = select_threshold(test_traces, test.series, suite.mode).result;
    }

    nlohmann::json out{{"cell", cell.name},
                       {"overrides", cell.overrides},
                       {"seed", cell.seed},
                       {"metrics", eval_result_to_json(metrics)},
                       {"epochs_run", result.report.epochs_run},
                       {"best_epoch", result.report.best_epoch},
                       {"wall_clock_seconds", result.report.wall_clock_seconds}};
    if (suite.synth) out["width"] = cell.width;
    if (!result.report.train_loss.empty()) {
        out["final_train_loss"] = result.report.train_loss.back();
    }
    return out;
}

std::pair<double, double> mean_std(std::span<const double> values) {
    if (values.empty()) throw DataError("mean_std of empty range");
    const double m = mean_of(values);
    if (values.size() < 2) return {m, 0.0};
    double ss = 0.0;
    for (const double v : values) ss += (v - m) * (v - m);
    return {m, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

namespace {

void write_cell_file(const std::filesystem::path& path, const nlohmann::json& cell_json) {
    // Write-then-rename keeps interrupted runs from leaving half-written
    // cells that a resume would trust.
    const auto tmp = path.string() + ".tmp";
    write_json_file(tmp, cell_json);
    std::filesystem::rename(tmp, path);
}

int error_exit_code(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const DataError*>(&e)) return 3;
    if (dynamic_cast<const NumericError*>(&e)) return 4;
    return 1;
}

[[noreturn]] void child_main(const SuiteConfig& suite, const Cell& cell,
                             const std::filesystem::path& cell_path) {
    try {
        write_cell_file(cell_path, run_cell(suite, cell));
        _exit(0);
    } catch (const std::exception& e) {
        std::cerr << "cell " << cell.name << ": " << e.what() << "\n";
        _exit(error_exit_code(e));
    }
}

[[noreturn]] void rethrow_cell_failure(const std::string& name, int code) {
    const auto msg = "bench: cell '" + name + "' failed";
    if (code == 2) throw ConfigError(msg);
    if (code == 3) throw DataError(msg);
    throw NumericError(msg);
}

// Groups cells over seeds: one group per (overrides, width).
nlohmann::json consolidate(const SuiteConfig& suite, const std::vector<nlohmann::json>& cells) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<const nlohmann::json*>> groups;
    for (const auto& cell : cells) {
        auto key = cell.at("overrides").dump();
        if (cell.contains("width")) key += "|width=" + cell.at("width").dump();
        if (!groups.count(key)) order.push_back(key);
        groups[key].push_back(&cell);
    }

    nlohmann::json out = nlohmann::json::array();
    for (const auto& key : order) {
        const auto& members = groups.at(key);
        nlohmann::json group{{"overrides", members.front()->at("overrides")},
                             {"n", members.size()}};
        if (members.front()->contains("width")) group["width"] = members.front()->at("width");
        nlohmann::json seeds = nlohmann::json::array();
        for (const auto* m : members) seeds.push_back(m->at("seed"));
        group["seeds"] = seeds;
        for (const char* metric : {"f1", "precision", "recall", "threshold"}) {
            std::vector<double> values;
            values.reserve(members.size());
            for (const auto* m : members) {
                values.push_back(m->at("metrics").at(metric).get<double>());
            }
            const auto [mean, sd] = mean_std(values);
            group[metric] = nlohmann::json{{"mean", mean}, {"std", sd}};
        }
        out.push_back(std::move(group));
    }
    return nlohmann::json{{"name", suite.name},
                          {"mode", to_string(suite.mode)},
                          {"threshold_from", suite.threshold_from},
                          {"groups", out}};
}

std::string group_label(const nlohmann::json& group) {
    std::string label;
    for (const auto& [key, value] : group.at("overrides").items()) {
        if (!label.empty()) label += " ";
        label += key + "=" + value_label(value);
    }
    if (group.contains("width")) {
        if (!label.empty()) label += " ";
        label += "width=" + value_label(group.at("width"));
    }
    return label.empty() ? "(base)" : label;
}

}  // namespace

std::string bench_table(const nlohmann::json& report) {
    std::vector<std::array<std::string, 5>> rows;
    rows.push_back({"cell group", "n", "f1", "precision", "recall"});
    for (const auto& group : report.at("groups")) {
        auto fmt = [&](const char* metric) {
            std::ostringstream s;
            s.precision(4);
            s << std::fixed << group.at(metric).at("mean").get<double>() << " +/- "
              << group.at(metric).at("std").get<double>();
            return s.str();
        };
        rows.push_back({group_label(group), std::to_string(group.at("n").get<int>()), fmt("f1"),
                        fmt("precision"), fmt("recall")});
    }

    std::array<std::size_t, 5> width{};
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    std::ostringstream out;
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out << row[c] << std::string(width[c] - row[c].size(), ' ')
                << (c + 1 < row.size() ? "  " : "");
        }
        out << '\n';
    }
    return out.str();
}

nlohmann::json run_bench(const SuiteConfig& suite, const std::filesystem::path& out_dir,
                         bool quiet) {
    suite.validate();
    const auto cells = enumerate_cells(suite);
    const auto cell_dir = out_dir / "cells";
    std::filesystem::create_directories(cell_dir);

    std::vector<const Cell*> pending;
    for (const auto& cell : cells) {
        const auto path = cell_dir / (cell.name + ".json");
        bool finished = false;
        if (std::filesystem::exists(path)) {
            try {
                read_json_file(path);
                finished = true;  // resume: trust the completed cell
            } catch (const DataError&) {
                finished = false;
            }
        }
        if (!finished) pending.push_back(&cell);
    }
    if (!quiet) {
        std::cout << "bench '" << suite.name << "': " << cells.size() << " cells, "
                  << cells.size() - pending.size() << " already done\n";
    }

    if (suite.jobs <= 1) {
        for (const auto* cell : pending) {
            write_cell_file(cell_dir / (cell->name + ".json"), run_cell(suite, *cell));
            if (!quiet) std::cout << "cell " << cell->name << " done\n";
        }
    } else {
        std::map<pid_t, const Cell*> running;
        std::size_t next = 0;
        auto reap = [&]() {
            int status = 0;
            const pid_t pid = waitpid(-1, &status, 0);
            if (pid < 0) throw NumericError("bench: waitpid failed");
            const auto* cell = running.at(pid);
            running.erase(pid);
            const int code = WIFEXITED(status) ? WEXITSTATUS(status) : 1;
            if (code != 0) {
                // Let the siblings finish before failing the suite.
                while (!running.empty()) {
                    int s = 0;
                    const pid_t p = waitpid(-1, &s, 0);
                    if (p < 0) break;
                    running.erase(p);
                }
                rethrow_cell_failure(cell->name, code);
            }
            if (!quiet) std::cout << "cell " << cell->name << " done\n";
        };
        while (next < pending.size() || !running.empty()) {
            while (next < pending.size() && running.size() < static_cast<std::size_t>(suite.jobs)) {
                const auto* cell = pending[next++];
                const pid_t pid = fork();
                if (pid < 0) throw NumericError("bench: fork failed");
                if (pid == 0) child_main(suite, *cell, cell_dir / (cell->name + ".json"));
                running[pid] = cell;
            }
            reap();
        }
    }

    std::vector<nlohmann::json> results;
    results.reserve(cells.size());
    for (const auto& cell : cells) {
        results.push_back(read_json_file(cell_dir / (cell.name + ".json")));
    }
    auto report = consolidate(suite, results);
    write_json_file(out_dir / "bench_report.json", report);
    const auto table = bench_table(report);
    {
        std::ofstream out(out_dir / "bench_report.txt", std::ios::binary);
        if (!out) throw DataError("cannot write bench_report.txt");
        out << table;
    }
    if (!quiet) std::cout << table;
    return report;
}

}  // namespace ncad::bench
