#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncad/common.hpp"
#include "ncad/series.hpp"

namespace ncad {

// amplitude*sin(2*pi*t/period) + N(0, noise_std^2) per timestep, labels all
// Normal. One rng draw per timestep.
TimeSeries gen_sine(std::int64_t length, double period, double amplitude, double noise_std,
                    Rng& rng, std::string id = "sine");

// Adds base_magnitude * exp(-o^2 / (2*width^2)) around every spike position,
// kernel truncated at |o| <= floor(4*width). The kernel peaks at 1, so each
// isolated spike tops out at exactly base_magnitude regardless of width.
// Timesteps whose total added perturbation exceeds 10% of base_magnitude (in
// absolute value) are labeled Anomalous; overlapping spikes merge labels.
// width <= 0 degenerates to a pure point spike.
TimeSeries widen_anomalies(const TimeSeries& series, std::span<const std::int64_t> spike_positions,
                           double base_magnitude, double width);

struct SynthConfig {
    std::int64_t train_series = 40;
    std::int64_t test_series = 10;
    std::int64_t length = 2000;
    double period = 100.0;
    double amplitude = 1.0;
    double noise_std = 0.1;
    std::int64_t anomalies_per_series = 5;
    double base_magnitude = 2.0;

    void validate() const;
};

void to_json(nlohmann::json& j, const SynthConfig& config);
void from_json(const nlohmann::json& j, SynthConfig& config);

struct WidthDatasetPair {
    double width = 0.0;
    std::uint64_t seed = 0;
    Dataset train;  // clean sinusoids, no true anomalies
    Dataset test;   // widened spike anomalies
};

// One pair per (width, seed), width-major order. For a fixed seed the
// underlying sinusoids and spike positions are identical across widths: only
// the widening differs, so each width is a variation of the same base data.
std::vector<WidthDatasetPair> make_width_suite(std::span<const double> widths,
                                               std::span<const std::uint64_t> seeds,
                                               const SynthConfig& config);

}  // namespace ncad
