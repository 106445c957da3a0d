#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ncad/common.hpp"

namespace ncad {

enum class LabelState : int { Normal = 0, Anomalous = 1, Unlabeled = -1 };

LabelState label_from_int(int v);
int label_to_int(LabelState s);

// Regularly sampled multivariate series. Values are row-major T x D; labels
// are per-timestep. NaN values are only legal before impute_missing runs.
struct TimeSeries {
    std::string id;
    std::int64_t length = 0;    // T
    std::int64_t channels = 0;  // D
    std::vector<double> values;  // length * channels, row-major
    std::vector<double> timestamps;
    std::vector<LabelState> labels;

    double at(std::int64_t t, std::int64_t d) const { return values[static_cast<std::size_t>(t * channels + d)]; }
    double& at(std::int64_t t, std::int64_t d) { return values[static_cast<std::size_t>(t * channels + d)]; }

    void validate() const;
};

// Builds a series with timestamps 0..T-1 and all labels Normal unless given.
TimeSeries make_series(std::string id, std::int64_t channels, std::vector<double> values,
                       std::vector<LabelState> labels = {});

struct WindowSpec {
    std::int64_t context_length = 1;  // C
    std::int64_t suspect_length = 1;  // S
    std::int64_t stride = 1;

    std::int64_t total() const { return context_length + suspect_length; }  // L
    void validate() const;
};

// One training/scoring example: rows [0,C) are context, rows [C,L) suspect.
struct Window {
    std::vector<double> values;       // L x D, row-major
    std::int64_t length = 0;          // L
    std::int64_t context_length = 0;  // C; suspect segment is rows [C, L)
    std::int64_t channels = 0;        // D
    double label = 0.0;          // soft after mixup
    bool skip_in_loss = false;   // fully-unlabeled suspect under the excluded policy
    std::string series_id;
    std::int64_t start = 0;  // origin index in the source series

    double at(std::int64_t t, std::int64_t d) const { return values[static_cast<std::size_t>(t * channels + d)]; }
    double& at(std::int64_t t, std::int64_t d) { return values[static_cast<std::size_t>(t * channels + d)]; }
};

struct Dataset {
    std::vector<TimeSeries> series;
    std::string split;  // train / validation / test

    void validate() const;
};

struct StandardizationStats {
    std::vector<double> location;
    std::vector<double> scale;  // strictly positive; degenerate channels get 1
};

enum class StandardizeMethod { mean_std, median_iqr };
enum class UnlabeledPolicy { as_normal, excluded };

StandardizeMethod standardize_method_from_string(const std::string& s);
UnlabeledPolicy unlabeled_policy_from_string(const std::string& s);
std::string to_string(StandardizeMethod m);
std::string to_string(UnlabeledPolicy p);

// Per-channel stats pooled over every series in the dataset.
StandardizationStats fit_standardizer(const Dataset& dataset,
                                      StandardizeMethod method = StandardizeMethod::mean_std);

TimeSeries standardize(const TimeSeries& series, const StandardizationStats& stats);
TimeSeries unstandardize(const TimeSeries& series, const StandardizationStats& stats);

// Forward-fill NaNs, zero-filling any leading gap. Returns number of cells filled.
std::int64_t impute_missing(TimeSeries& series);

struct WindowLabel {
    double label = 0.0;
    bool skip_in_loss = false;
};

// A window is anomalous when any suspect timestep is; unlabeled handling is
// policy-driven (treated as normal, or flagged out of the loss when the whole
// suspect segment is unlabeled).
WindowLabel window_label(std::span<const LabelState> suspect_labels, UnlabeledPolicy policy);

std::vector<Window> sliding_windows(const TimeSeries& series, const WindowSpec& spec,
                                    UnlabeledPolicy policy = UnlabeledPolicy::as_normal);

// Exactly b_s * b_c windows; series drawn uniformly with replacement among
// those long enough, starts uniform over the valid range.
std::vector<Window> random_crops(const Dataset& dataset, std::int64_t series_per_batch,
                                 std::int64_t crops_per_series, const WindowSpec& spec, Rng& rng,
                                 UnlabeledPolicy policy = UnlabeledPolicy::as_normal);

struct SeriesSplits {
    TimeSeries train;
    TimeSeries validation;
    TimeSeries test;
};

// Last half of the timesteps is test; the prefix splits 3:2 into train and
// validation, preserving temporal order.
SeriesSplits split_yahoo_style(const TimeSeries& series);

// Left-pad to target_len by replicating the first row; padded labels are
// Unlabeled and timestamps extrapolate backward by the leading delta.
TimeSeries pad_left_edge(const TimeSeries& series, std::int64_t target_len);

}  // namespace ncad
