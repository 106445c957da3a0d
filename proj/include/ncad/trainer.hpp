#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncad/augment.hpp"
#include "ncad/detector.hpp"
#include "ncad/encoder.hpp"
#include "ncad/evalkit.hpp"
#include "ncad/optim.hpp"
#include "ncad/series.hpp"

namespace ncad {

// contextual: hypersphere center is the context embedding, per window.
// fixed_center: plain hypersphere classification against one shared center
// (the ablation baseline). Embeddings are unit-norm, so the center is taken
// as the mean embedding of an initial batch; a zero center would put every
// window at distance exactly 1.
enum class LossMode { contextual, fixed_center };

std::string to_string(LossMode mode);
LossMode loss_mode_from_string(const std::string& name);

struct EarlyStoppingConfig {
    bool enabled = true;
    std::int64_t patience = 5;  // consecutive non-improving epochs at which to stop
};

// Best-value bookkeeping for validation-driven stopping. observe() returns
// true when training should stop: the value failed to improve on the best and
// the run has now seen `patience` consecutive non-improving epochs (so
// patience 0 stops at the first non-improvement). A disabled stopper still
// tracks the best epoch but never asks to stop.
class EarlyStopper {
public:
    EarlyStopper(bool enabled, std::int64_t patience) : enabled_(enabled), patience_(patience) {}

    bool observe(double value);
    bool improved_last() const { return improved_last_; }
    std::int64_t best_epoch() const { return best_epoch_; }  // 1-based, -1 before any observe
    double best_value() const { return best_value_; }

private:
    bool enabled_;
    std::int64_t patience_;
    std::int64_t epoch_ = 0;
    std::int64_t best_epoch_ = -1;
    std::int64_t non_improving_ = 0;
    double best_value_ = 0.0;
    bool improved_last_ = false;
};

struct TrainConfig {
    std::int64_t b_s = 8;  // series per batch
    std::int64_t b_c = 4;  // crops per series
    AugmentConfig augment;
    std::int64_t epochs = 20;
    std::int64_t batches_per_epoch = 100;
    OptimizerConfig optimizer;
    double grad_clip_norm = 10.0;  // <= 0 disables clipping
    std::uint64_t seed = 0;
    EarlyStoppingConfig early_stopping;
    DistanceKind distance = DistanceKind::euclidean;
    LossMode loss_mode = LossMode::contextual;
    WindowSpec window;
    EncoderConfig encoder;
    bool standardize = true;
    StandardizeMethod standardize_method = StandardizeMethod::mean_std;
    UnlabeledPolicy unlabeled = UnlabeledPolicy::as_normal;

    void validate() const;
};

void to_json(nlohmann::json& j, const WindowSpec& spec);
void from_json(const nlohmann::json& j, WindowSpec& spec);
void to_json(nlohmann::json& j, const AugmentConfig& config);
void from_json(const nlohmann::json& j, AugmentConfig& config);
void to_json(nlohmann::json& j, const OptimizerConfig& config);
void from_json(const nlohmann::json& j, OptimizerConfig& config);
void to_json(nlohmann::json& j, const EarlyStoppingConfig& config);
void from_json(const nlohmann::json& j, EarlyStoppingConfig& config);
void to_json(nlohmann::json& j, const TrainConfig& config);
void from_json(const nlohmann::json& j, TrainConfig& config);

struct TrainReport {
    std::vector<double> train_loss;      // mean loss per epoch, always finite
    std::vector<double> validation_f1;   // empty when no validation labels
    std::int64_t best_epoch = -1;        // 1-based; -1 when no validation
    double best_validation_f1 = 0.0;
    std::int64_t epochs_run = 0;
    double wall_clock_seconds = 0.0;
    std::uint64_t seed = 0;
};

nlohmann::json train_report_to_json(const TrainReport& report);

// b_s * b_c uniform random crops, then floor(b_s*b_c*coe_rate) contextual
// outlier exposure windows, then floor(b_s*b_c*mixup_rate) mixup windows,
// all derived from the base crops and appended in that order.
std::vector<Window> assemble_batch(const Dataset& dataset, const TrainConfig& config, Rng& rng);

// Mean embedding of one batch of base crops; the fixed-center mode's center.
std::vector<double> initial_center(const Dataset& dataset, const ParameterSet& params,
                                   const TrainConfig& config, Rng& rng);

// batches_per_epoch optimizer steps over freshly assembled batches; returns
// the mean batch loss. Windows flagged skip_in_loss stay in the batch but are
// excluded from the loss mean. The dataset is consumed as-is: standardization
// and point-outlier injection are fit-time preparation, not repeated here.
// `center` selects the fixed-center loss; null means contextual.
double train_epoch(ParameterSet& params, Optimizer& optimizer, const Dataset& dataset,
                   const TrainConfig& config, Rng& rng,
                   const std::vector<double>* center = nullptr);

struct FitResult {
    ParameterSet params;
    TrainReport report;
    // Populated when config.standardize; apply to any series before scoring.
    std::optional<StandardizationStats> stats;
    // Populated in fixed_center mode.
    std::vector<double> center;
};

// Full training run. Preparation: fit the standardizer on the training split,
// standardize train (and validation) with it, then inject point outliers into
// the standardized training series. Per epoch: train, then, when validation
// labels exist, score validation and track the best adjusted F1 at the best
// threshold; stop once `patience` consecutive non-improving epochs accumulate
// and return the best epoch's parameters. Without usable validation labels
// the final epoch's parameters are returned.
//
// RNG streams derived from config.seed: fork(1) parameter init, fork(2) point
// outliers (series in dataset order), fork(3) center batch, fork(100 + e) for
// epoch e = 0, 1, ...
FitResult fit(const Dataset& train, const Dataset* validation, const TrainConfig& config);

struct ThresholdChoice {
    double threshold = 0.0;
    EvalResult result;  // at the chosen threshold, in the requested mode
};

// Single global threshold maximizing pooled F1 over the traces. Candidates
// are midpoints between consecutive unique scores plus one sentinel on each
// side (all-positive, all-negative). Ties on the objective break toward the
// higher pointwise F1, then toward the larger threshold. Runs one
// O(N log N) sweep, not a rescorer per candidate.
ThresholdChoice select_threshold(std::span<const ScoreTrace> traces,
                                 std::span<const TimeSeries> series,
                                 EvalMode mode = EvalMode::adjusted);

}  // namespace ncad
