#pragma once

#include <cstdint>
#include <vector>

#include "ncad/common.hpp"
#include "ncad/series.hpp"

namespace ncad {

struct AugmentConfig {
    double coe_rate = 0.0;
    double mixup_rate = 0.0;
    double mixup_alpha = 0.05;
    std::int64_t po_count_per_series = 0;
    double po_magnitude_lo = 0.5;
    double po_magnitude_hi = 3.0;
    std::int64_t po_neighborhood = 100;

    void validate() const;
};

// Contextual outlier exposure: floor(|batch| * rate) synthetic anomalies, each
// a copy of a random receiver with a contiguous chunk of its suspect segment
// overwritten by a distinct donor's values at the same positions. For D > 1
// only a uniformly chosen nonempty channel subset is swapped. All outputs are
// labeled 1.0. Draw order per output: receiver, donor, chunk endpoints,
// channel subset.
std::vector<Window> coe_augment(const std::vector<Window>& batch, double rate, Rng& rng);

// Convex combination lambda * wi + (1 - lambda) * wj of values and labels,
// computed as wj + lambda * (wi - wj); lambda 1 or 0 returns the parent
// bit-exactly. skip_in_loss is inherited from either parent.
Window mix_pair(const Window& wi, const Window& wj, double lambda);

// Window mixup: floor(|batch| * rate) mix_pair combinations of distinct pairs
// with lambda ~ Beta(alpha, alpha). Draw order per output: i, j, lambda.
std::vector<Window> mixup_augment(const std::vector<Window>& batch, double rate, double alpha,
                                  Rng& rng);

struct PointOutlierEvent {
    std::int64_t t = 0;
    std::vector<std::int64_t> channels;
    double sign = 1.0;
    double magnitude = 0.0;              // w ~ Uniform(po_magnitude range)
    std::vector<double> applied_delta;   // per affected channel, sign * w * scale
};

// Adds po_count_per_series single-point spikes at uniform timesteps; spike
// size is sign * w * IQR of the po_neighborhood points around the location
// (degenerate IQR falls back to the channel std, then to 1e-2). Spiked
// timesteps are labeled Anomalous. Draw order per event: t, channel subset,
// sign, magnitude.
TimeSeries inject_point_outliers(const TimeSeries& series, const AugmentConfig& config, Rng& rng,
                                 std::vector<PointOutlierEvent>* events = nullptr);

struct SlopeParams {
    std::int64_t count = 0;
    std::int64_t duration_lo = 1;
    std::int64_t duration_hi = 1;
    double magnitude_lo = 1.0;
    double magnitude_hi = 1.0;

    void validate(std::int64_t series_length) const;
};

struct SlopeEvent {
    std::int64_t start = 0;
    std::int64_t duration = 0;
    double magnitude = 0.0;  // m ~ Uniform(magnitude range)
};

// Adds linear ramps rising from 0 to m * scale over random regions, where
// scale is the channel standard deviation around the region (flat
// neighborhoods fall back to 1). Region timesteps are labeled Anomalous.
// Draw order per event: duration, start, magnitude.
TimeSeries inject_slopes(const TimeSeries& series, const SlopeParams& params, Rng& rng,
                         std::vector<SlopeEvent>* events = nullptr);

}  // namespace ncad
