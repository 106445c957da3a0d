#pragma once

#include <span>
#include <string>
#include <vector>

#include "ncad/encoder.hpp"
#include "ncad/series.hpp"
#include "ncad/tensor.hpp"

namespace ncad {

enum class DistanceKind { euclidean, cosine_log };
// Maps a window score to an anomaly probability: 1-exp(-d^2) matches the loss
// algebra and is the default; 1-exp(-|d|) is kept for comparison.
enum class ScoreTransform { exp_sq, exp_abs };
enum class Aggregation { mean, max_first_alert };

DistanceKind distance_kind_from_string(const std::string& s);
ScoreTransform score_transform_from_string(const std::string& s);
Aggregation aggregation_from_string(const std::string& s);
std::string to_string(DistanceKind k);
std::string to_string(ScoreTransform t);
std::string to_string(Aggregation a);

// Probability clamp bound: exp(-d^2) is clamped to [kProbEps, 1-kProbEps]
// before any log.
inline constexpr double kProbEps = 1e-9;
// Cosine clamp: (1+cossim)/2 is floored at kCosEps/2 near antipodal pairs.
inline constexpr double kCosEps = 1e-8;

double dist_l2(std::span<const double> x, std::span<const double> y);
double dist_cos(std::span<const double> x, std::span<const double> y);
double distance(std::span<const double> x, std::span<const double> y, DistanceKind kind);

// Row-wise distances between [B,E] tensors -> [B]; differentiable.
Tensor row_distance(const Tensor& a, const Tensor& b, DistanceKind kind);

// Contextual hypersphere loss per example, d = dist(z, z_c):
//   loss = (1-y) * d^2 - y * log(1 - exp(-d^2))
// Soft labels interpolate the two terms. Returns [B].
Tensor contextual_hsc_losses(const Tensor& z, const Tensor& z_context, const Tensor& labels,
                             DistanceKind kind);

// Same functional form against a fixed center, d = ||z - c||_2; the
// non-contextual ablation. Returns [B].
Tensor hsc_losses(const Tensor& z, const Tensor& labels, const std::vector<double>& center);

// Scalar conveniences over plain embedding vectors (no graph).
double contextual_hsc_loss(std::span<const double> z, std::span<const double> z_context, double y,
                           DistanceKind kind);
double hsc_loss(std::span<const double> z, double y, std::span<const double> center);

double apply_transform(double score, ScoreTransform transform);

struct WindowScore {
    double score = 0.0;        // distance between window and context embeddings
    double probability = 0.0;  // transform(score)
};

WindowScore score_window(const Window& window, const ParameterSet& params,
                         const EncoderConfig& cfg, DistanceKind kind,
                         ScoreTransform transform = ScoreTransform::exp_sq);

// Distance scores for many windows, encoded in bounded batches; equals
// score_window applied per window. A non-empty center switches from the
// contextual distance d(z, z_context) to the fixed-center rule ||z - c||_2
// used by the plain hypersphere classifier.
std::vector<double> score_windows(std::span<const Window> windows, const ParameterSet& params,
                                  const EncoderConfig& cfg, DistanceKind kind,
                                  std::size_t batch_cap = 256,
                                  std::span<const double> center = {});

struct ScoreTrace {
    std::string series_id;
    std::vector<double> timestamps;
    std::vector<double> scores;         // aggregated window scores, 0 where unscored
    std::vector<double> probabilities;  // transform(score), 0 where unscored
    std::vector<bool> scored;           // false in the warm-up prefix / uncovered tail
    Aggregation aggregation = Aggregation::mean;
};

struct RollingScoreOptions {
    Aggregation aggregation = Aggregation::mean;
    ScoreTransform transform = ScoreTransform::exp_sq;
    // Score the warm-up prefix by left edge-replication padding instead of
    // leaving [0, C) unscored.
    bool pad_warmup = false;
    std::size_t batch_cap = 256;
    // Non-empty: score windows by distance to this fixed center instead of to
    // their own context embedding (the non-contextual ablation).
    std::vector<double> center;
};

// Scores every suspect position under a rolling window sweep. A window
// starting at s contributes its score to timesteps [s+C, s+L); covered
// timesteps aggregate by mean or max. Series shorter than L are padded by
// edge replication for scoring only.
ScoreTrace rolling_score(const TimeSeries& series, const WindowSpec& spec,
                         const ParameterSet& params, const EncoderConfig& cfg, DistanceKind kind,
                         const RollingScoreOptions& options = {});

}  // namespace ncad
