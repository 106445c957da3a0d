#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncad/detector.hpp"
#include "ncad/series.hpp"

namespace ncad {

enum class EvalMode { adjusted, pointwise };

std::string to_string(EvalMode mode);
EvalMode eval_mode_from_string(const std::string& name);

// Pooled confusion counts and the derived scores. True negatives are not
// tracked; precision and recall fall back to 0 on an empty denominator.
struct EvalResult {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double threshold = 0.0;
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    EvalMode mode = EvalMode::adjusted;
};

nlohmann::json eval_result_to_json(const EvalResult& result);
// Aligned two-column plain-text rendering for terminal output.
std::string eval_result_table(const EvalResult& result);

// Expands detections to whole true segments: every maximal run of 1s in
// y_true containing at least one predicted 1 becomes all 1s in the output.
// Predictions outside true runs pass through unchanged.
std::vector<std::uint8_t> point_adjust(std::span<const std::uint8_t> y_true,
                                       std::span<const std::uint8_t> y_pred);

struct LabeledPrediction {
    std::vector<std::uint8_t> y_true;
    std::vector<std::uint8_t> y_pred;
};

EvalResult prf(std::span<const std::uint8_t> y_true, std::span<const std::uint8_t> y_pred,
               EvalMode mode);
// Micro-average: counts pool across sequences before precision/recall/F1.
EvalResult prf(std::span<const LabeledPrediction> pairs, EvalMode mode);

// One maximal run of timesteps that are both scored and labeled. A true
// anomalous segment never spans a masked gap, so unscored or unlabeled
// timesteps act as segment boundaries.
struct MaskedStretch {
    std::vector<std::uint8_t> y_true;
    std::vector<double> scores;
};

std::vector<MaskedStretch> masked_stretches(const ScoreTrace& trace, const TimeSeries& series);

// Binarizes every trace at one global threshold (flag when score > threshold),
// masks unscored and unlabeled timesteps, pools counts across series. Traces
// without a matching series are ignored; a labeled series without a trace is
// an error.
EvalResult evaluate_dataset(std::span<const ScoreTrace> traces,
                            std::span<const TimeSeries> series, double threshold,
                            EvalMode mode);

}  // namespace ncad
