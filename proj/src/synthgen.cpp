#include "ncad/synthgen.hpp"

#include <cmath>

namespace ncad {

TimeSeries gen_sine(std::int64_t length, double period, double amplitude, double noise_std,
                    Rng& rng, std::string id) {
    if (length < 1) throw ConfigError("gen_sine: length must be positive");
    if (period <= 0.0) throw ConfigError("gen_sine: period must be positive");
    if (noise_std < 0.0) throw ConfigError("gen_sine: noise_std must be nonnegative");
    std::vector<double> values(static_cast<std::size_t>(length));
    for (std::int64_t t = 0; t < length; ++t) {
        const double clean = amplitude * std::sin(2.0 * M_PI * static_cast<double>(t) / period);
        values[static_cast<std::size_t>(t)] = clean + (noise_std > 0.0 ? rng.normal(0.0, noise_std) : 0.0);
    }
    return make_series(std::move(id), 1, std::move(values));
}

TimeSeries widen_anomalies(const TimeSeries& series, std::span<const std::int64_t> spike_positions,
                           double base_magnitude, double width) {
    series.validate();
    for (const std::int64_t p : spike_positions) {
        if (p < 0 || p >= series.length)
            throw ConfigError("widen_anomalies: spike position out of range");
    }
    const std::int64_t radius = width > 0.0 ? static_cast<std::int64_t>(std::floor(4.0 * width)) : 0;

    std::vector<double> perturbation(static_cast<std::size_t>(series.length), 0.0);
    for (const std::int64_t p : spike_positions) {
        for (std::int64_t o = -radius; o <= radius; ++o) {
            const std::int64_t t = p + o;
            if (t < 0 || t >= series.length) continue;
            const double k = radius == 0
                                 ? (o == 0 ? 1.0 : 0.0)
                                 : std::exp(-static_cast<double>(o * o) / (2.0 * width * width));
            perturbation[static_cast<std::size_t>(t)] += base_magnitude * k;
        }
    }

    TimeSeries out = series;
    const double support = 0.1 * std::fabs(base_magnitude);
    for (std::int64_t t = 0; t < series.length; ++t) {
        const auto ut = static_cast<std::size_t>(t);
        if (perturbation[ut] == 0.0) continue;
        for (std::int64_t d = 0; d < series.channels; ++d)
            out.values[static_cast<std::size_t>(t * series.channels + d)] += perturbation[ut];
        if (std::fabs(perturbation[ut]) > support) out.labels[ut] = LabelState::Anomalous;
    }
    return out;
}

void SynthConfig::validate() const {
    if (train_series < 0 || test_series < 0) throw ConfigError("SynthConfig: negative series count");
    if (train_series + test_series < 1) throw ConfigError("SynthConfig: no series requested");
    if (length < 1) throw ConfigError("SynthConfig: length must be positive");
    if (period <= 0.0) throw ConfigError("SynthConfig: period must be positive");
    if (noise_std < 0.0) throw ConfigError("SynthConfig: noise_std must be nonnegative");
    if (anomalies_per_series < 0) throw ConfigError("SynthConfig: negative anomaly count");
    if (anomalies_per_series > length) throw ConfigError("SynthConfig: more anomalies than timesteps");
}

void to_json(nlohmann::json& j, const SynthConfig& config) {
    j = nlohmann::json{{"train_series", config.train_series},
                       {"test_series", config.test_series},
                       {"length", config.length},
                       {"period", config.period},
                       {"amplitude", config.amplitude},
                       {"noise_std", config.noise_std},
                       {"anomalies_per_series", config.anomalies_per_series},
                       {"base_magnitude", config.base_magnitude}};
}

void from_json(const nlohmann::json& j, SynthConfig& config) {
    config = SynthConfig{};
    if (j.contains("train_series")) j.at("train_series").get_to(config.train_series);
    if (j.contains("test_series")) j.at("test_series").get_to(config.test_series);
    if (j.contains("length")) j.at("length").get_to(config.length);
    if (j.contains("period")) j.at("period").get_to(config.period);
    if (j.contains("amplitude")) j.at("amplitude").get_to(config.amplitude);
    if (j.contains("noise_std")) j.at("noise_std").get_to(config.noise_std);
    if (j.contains("anomalies_per_series")) j.at("anomalies_per_series").get_to(config.anomalies_per_series);
    if (j.contains("base_magnitude")) j.at("base_magnitude").get_to(config.base_magnitude);
}

namespace {

// Distinct positions drawn sequentially with rejection on repeats, then
// sorted. Width plays no part, so positions are shared across widths.
std::vector<std::int64_t> draw_positions(std::int64_t count, std::int64_t length, Rng& rng) {
    std::vector<std::int64_t> positions;
    positions.reserve(static_cast<std::size_t>(count));
    while (std::ssize(positions) < count) {
        const std::int64_t p = rng.index(length);
        if (std::find(positions.begin(), positions.end(), p) == positions.end())
            positions.push_back(p);
    }
    std::sort(positions.begin(), positions.end());
    return positions;
}

}  // namespace

std::vector<WidthDatasetPair> make_width_suite(std::span<const double> widths,
                                               std::span<const std::uint64_t> seeds,
                                               const SynthConfig& config) {
    if (widths.empty() || seeds.empty())
        throw ConfigError("make_width_suite: widths and seeds must be non-empty");
    config.validate();

    std::vector<WidthDatasetPair> out;
    for (const double width : widths) {
        for (const std::uint64_t seed : seeds) {
            const Rng root(seed);
            WidthDatasetPair pair;
            pair.width = width;
            pair.seed = seed;
            pair.train.split = "train";
            pair.test.split = "test";
            for (std::int64_t i = 0; i < config.train_series; ++i) {
                auto rng = root.fork(static_cast<std::uint64_t>(i));
                pair.train.series.push_back(
                    gen_sine(config.length, config.period, config.amplitude, config.noise_std, rng,
                             "train-" + std::to_string(seed) + "-" + std::to_string(i)));
            }
            for (std::int64_t j = 0; j < config.test_series; ++j) {
                auto rng = root.fork(static_cast<std::uint64_t>(config.train_series + j));
                auto base = gen_sine(config.length, config.period, config.amplitude,
                                     config.noise_std, rng,
                                     "test-" + std::to_string(seed) + "-" + std::to_string(j));
                const auto positions = draw_positions(config.anomalies_per_series, config.length, rng);
                pair.test.series.push_back(
                    widen_anomalies(base, positions, config.base_magnitude, width));
            }
            pair.train.validate();
            pair.test.validate();
            out.push_back(std::move(pair));
        }
    }
    return out;
}

}  // namespace ncad
