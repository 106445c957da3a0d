#include "ncad/augment.hpp"

#include <algorithm>
#include <cmath>

namespace ncad {

void AugmentConfig::validate() const {
    if (coe_rate < 0.0) throw ConfigError("coe_rate must be >= 0");
    if (mixup_rate < 0.0) throw ConfigError("mixup_rate must be >= 0");
    if (mixup_alpha <= 0.0) throw ConfigError("mixup_alpha must be > 0");
    if (po_count_per_series < 0) throw ConfigError("po_count_per_series must be >= 0");
    if (po_magnitude_lo > po_magnitude_hi) {
        throw ConfigError("po_magnitude range is inverted");
    }
    if (po_magnitude_lo < 0.0) throw ConfigError("po_magnitude range must be nonnegative");
    if (po_neighborhood < 1) throw ConfigError("po_neighborhood must be >= 1");
}

namespace {

std::pair<std::size_t, std::size_t> distinct_pair(std::size_t n, Rng& rng) {
    const std::size_t a = rng.index(n);
    std::size_t b = rng.index(n - 1);
    if (b >= a) ++b;
    return {a, b};
}

}  // namespace

std::vector<Window> coe_augment(const std::vector<Window>& batch, double rate, Rng& rng) {
    if (rate < 0.0) throw ConfigError("coe rate must be >= 0");
    const auto count = static_cast<std::size_t>(std::floor(rate * static_cast<double>(batch.size())));
    if (count == 0) return {};
    if (batch.size() < 2) throw ConfigError("coe needs at least two windows in the batch");

    std::vector<Window> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const auto [r, d] = distinct_pair(batch.size(), rng);
        const Window& receiver = batch[r];
        const Window& donor = batch[d];
        if (donor.length != receiver.length || donor.channels != receiver.channels ||
            donor.context_length != receiver.context_length) {
            throw ConfigError("coe: batch windows disagree in shape");
        }
        const auto S = receiver.length - receiver.context_length;
        if (S < 1) throw ConfigError("coe: windows carry no suspect segment");

        Window w = receiver;
        std::int64_t t1 = 0, t2 = 0;
        if (S > 1) {
            auto [a, b] = distinct_pair(static_cast<std::size_t>(S), rng);
            t1 = static_cast<std::int64_t>(std::min(a, b));
            t2 = static_cast<std::int64_t>(std::max(a, b));
        }
        auto dims = rng.nonempty_subset(static_cast<std::size_t>(w.channels));
        for (std::int64_t t = t1; t <= t2; ++t) {
            const auto row = receiver.context_length + t;
            for (auto dch : dims) {
                w.at(row, static_cast<std::int64_t>(dch)) = donor.at(row, static_cast<std::int64_t>(dch));
            }
        }
        w.label = 1.0;
        w.skip_in_loss = false;
        out.push_back(std::move(w));
    }
    return out;
}

Window mix_pair(const Window& wi, const Window& wj, double lambda) {
    if (wi.values.size() != wj.values.size() || wi.channels != wj.channels) {
        throw ConfigError("mixup: windows disagree in shape");
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("mixup: lambda outside [0,1]");
    if (lambda == 1.0) return wi;
    if (lambda == 0.0) return wj;
    Window w = wj;
    for (std::size_t v = 0; v < w.values.size(); ++v) {
        w.values[v] = wj.values[v] + lambda * (wi.values[v] - wj.values[v]);
    }
    w.label = wj.label + lambda * (wi.label - wj.label);
    w.skip_in_loss = wi.skip_in_loss || wj.skip_in_loss;
    return w;
}

std::vector<Window> mixup_augment(const std::vector<Window>& batch, double rate, double alpha,
                                  Rng& rng) {
    if (rate < 0.0) throw ConfigError("mixup rate must be >= 0");
    if (alpha <= 0.0) throw ConfigError("mixup alpha must be > 0");
    const auto count = static_cast<std::size_t>(std::floor(rate * static_cast<double>(batch.size())));
    if (count == 0) return {};
    if (batch.size() < 2) throw ConfigError("mixup needs at least two windows in the batch");

    std::vector<Window> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const auto [i, j] = distinct_pair(batch.size(), rng);
        out.push_back(mix_pair(batch[i], batch[j], rng.beta(alpha, alpha)));
    }
    return out;
}

namespace {

// Window of ~n points containing t, shifted inward at the series edges.
std::pair<std::int64_t, std::int64_t> neighborhood_bounds(std::int64_t t, std::int64_t T,
                                                          std::int64_t n) {
    std::int64_t lo = std::max<std::int64_t>(0, t - n / 2);
    std::int64_t hi = std::min(T, lo + n);
    lo = std::max<std::int64_t>(0, hi - n);
    return {lo, hi};
}

double channel_stddev(const TimeSeries& s, std::int64_t d) {
    std::vector<double> col(static_cast<std::size_t>(s.length));
    for (std::int64_t t = 0; t < s.length; ++t) col[static_cast<std::size_t>(t)] = s.at(t, d);
    return stddev_of(col);
}

}  // namespace

TimeSeries inject_point_outliers(const TimeSeries& series, const AugmentConfig& config, Rng& rng,
                                 std::vector<PointOutlierEvent>* events) {
    config.validate();
    series.validate();
    TimeSeries out = series;
    std::vector<double> neigh;
    for (std::int64_t k = 0; k < config.po_count_per_series; ++k) {
        PointOutlierEvent ev;
        ev.t = static_cast<std::int64_t>(rng.index(static_cast<std::size_t>(out.length)));
        auto dims = rng.nonempty_subset(static_cast<std::size_t>(out.channels));
        ev.sign = rng.sign();
        ev.magnitude = rng.uniform(config.po_magnitude_lo, config.po_magnitude_hi);

        const auto [lo, hi] = neighborhood_bounds(ev.t, out.length, config.po_neighborhood);
        for (auto dch : dims) {
            const auto d = static_cast<std::int64_t>(dch);
            neigh.clear();
            for (std::int64_t t = lo; t < hi; ++t) neigh.push_back(out.at(t, d));
            std::sort(neigh.begin(), neigh.end());
            double scale = quantile_sorted(neigh, 0.75) - quantile_sorted(neigh, 0.25);
            if (!(scale > 0.0)) scale = channel_stddev(out, d);
            if (!(scale > 0.0)) scale = 1e-2;

            const double delta = ev.sign * ev.magnitude * scale;
            out.at(ev.t, d) += delta;
            ev.channels.push_back(d);
            ev.applied_delta.push_back(delta);
        }
        out.labels[static_cast<std::size_t>(ev.t)] = LabelState::Anomalous;
        if (events) events->push_back(std::move(ev));
    }
    return out;
}

void SlopeParams::validate(std::int64_t series_length) const {
    if (count < 0) throw ConfigError("slope count must be >= 0");
    if (duration_lo < 1 || duration_lo > duration_hi) {
        throw ConfigError("slope duration range is invalid");
    }
    if (duration_hi > series_length) {
        throw ConfigError("slope duration " + std::to_string(duration_hi) +
                          " exceeds series length " + std::to_string(series_length));
    }
    if (magnitude_lo > magnitude_hi) throw ConfigError("slope magnitude range is inverted");
}

TimeSeries inject_slopes(const TimeSeries& series, const SlopeParams& params, Rng& rng,
                         std::vector<SlopeEvent>* events) {
    series.validate();
    params.validate(series.length);
    TimeSeries out = series;
    std::vector<double> neigh;
    for (std::int64_t k = 0; k < params.count; ++k) {
        SlopeEvent ev;
        ev.duration = rng.range(params.duration_lo, params.duration_hi);
        ev.start = static_cast<std::int64_t>(
            rng.index(static_cast<std::size_t>(out.length - ev.duration + 1)));
        ev.magnitude = rng.uniform(params.magnitude_lo, params.magnitude_hi);

        // Scale against local variability so ramps stay visible after
        // standardization; a flat neighborhood falls back to unit scale.
        const std::int64_t nlo = std::max<std::int64_t>(0, ev.start - ev.duration);
        const std::int64_t nhi = std::min(out.length, ev.start + 2 * ev.duration);
        for (std::int64_t d = 0; d < out.channels; ++d) {
            neigh.clear();
            for (std::int64_t t = nlo; t < nhi; ++t) neigh.push_back(out.at(t, d));
            double scale = stddev_of(neigh);
            if (!(scale > 0.0)) scale = 1.0;
            const double top = ev.magnitude * scale;
            for (std::int64_t i = 0; i < ev.duration; ++i) {
                const double frac = ev.duration > 1
                                        ? static_cast<double>(i) / static_cast<double>(ev.duration - 1)
                                        : 1.0;
                out.at(ev.start + i, d) += top * frac;
            }
        }
        for (std::int64_t i = 0; i < ev.duration; ++i) {
            out.labels[static_cast<std::size_t>(ev.start + i)] = LabelState::Anomalous;
        }
        if (events) events->push_back(ev);
    }
    return out;
}

}  // namespace ncad
