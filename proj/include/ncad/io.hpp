#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncad/detector.hpp"
#include "ncad/series.hpp"

namespace ncad {

// Shortest decimal form that parses back to the same bits (std::to_chars).
std::string format_double(double v);
// Strict full-field parse; `context` names the file/field in the error.
double parse_double(std::string_view text, const std::string& context);

// One CSV per series: header `timestamp,ch_0,...,ch_{D-1},label`, one row per
// timestep, label in {-1, 0, 1}. Values round-trip bit-exactly.
void write_series_csv(const std::filesystem::path& path, const TimeSeries& series);
TimeSeries read_series_csv(const std::filesystem::path& path, const std::string& id);

inline constexpr int kManifestVersion = 1;

// Dataset directory layout: `{"version":1,"series":[{"file":...,"split":...}]}`
// with file paths relative to the manifest. save_dataset writes one
// subdirectory per split, one CSV per series named by its id.
void save_dataset(const std::filesystem::path& dir, std::span<const Dataset> splits,
                  const std::string& manifest_name = "manifest.json");
// All splits, in manifest row order (series id = file stem).
std::vector<Dataset> load_datasets(const std::filesystem::path& manifest_path);
// One split; a split absent from the manifest is an error.
Dataset load_dataset_split(const std::filesystem::path& manifest_path, const std::string& split);

// Per-series trace CSV: header `timestamp,score,probability`; rows outside
// the scored region carry nan in both value columns.
void write_trace_csv(const std::filesystem::path& path, const ScoreTrace& trace);
ScoreTrace read_trace_csv(const std::filesystem::path& path, const std::string& id);

void write_threshold_json(const std::filesystem::path& path, double threshold);
double read_threshold_json(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

// NumPy .npy subset: little-endian f8/f4, C order, rank 1 or 2. Rank-1 data
// reads as a single-channel matrix. write_npy always emits rank-2 <f8 v1.
struct NpyArray {
    std::int64_t rows = 0;
    std::int64_t cols = 1;
    std::vector<double> values;  // rows * cols, row-major
};
NpyArray read_npy(const std::filesystem::path& path);
void write_npy(const std::filesystem::path& path, const NpyArray& array);

// Benchmark layout adapters. Each returns canonical split datasets and
// passes parsed values through bit-exactly; layout deviations (unknown
// columns, missing files, length mismatches) raise DataError.

// Spacecraft telemetry dump: train/<chan>.npy, test/<chan>.npy and a
// labeled_anomalies.csv whose rows name each channel and its anomalous
// [start, end] ranges (inclusive, test indices). Train timesteps are
// unlabeled, test timesteps outside the ranges are normal.
std::vector<Dataset> nasa_format(const std::filesystem::path& dir);

// Server machine dump: train/<machine>.txt and test/<machine>.txt hold one
// comma-separated row of channel values per timestep; test_label/<machine>.txt
// holds one 0/1 per line. Train timesteps are normal by construction.
std::vector<Dataset> smd_format(const std::filesystem::path& dir);

// Webscope S5 dump: every *.csv under the directory is one univariate series,
// either `timestamp,value,is_anomaly` or the synthetic-benchmark layout
// `timestamps,value,anomaly,changepoint,trend,noise,seasonality1..3` (the
// extra generator columns are dropped). Each series is split 30/20/50 into
// train/validation/test by split_yahoo_style.
std::vector<Dataset> yahoo_format(const std::filesystem::path& dir);

// AIOps competition dump: a single CSV `timestamp,value,label,KPI ID`; rows
// group into one series per KPI id, in order of first appearance.
std::vector<Dataset> kpi_format(const std::filesystem::path& file);

}  // namespace ncad
