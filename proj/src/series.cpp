#include "ncad/series.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace ncad {

LabelState label_from_int(int v) {
    switch (v) {
        case 0: return LabelState::Normal;
        case 1: return LabelState::Anomalous;
        case -1: return LabelState::Unlabeled;
        default: throw DataError("label value " + std::to_string(v) + " is not in {0,1,-1}");
    }
}

int label_to_int(LabelState s) { return static_cast<int>(s); }

void TimeSeries::validate() const {
    if (length < 1 || channels < 1) {
        throw DataError("series '" + id + "' must have at least one timestep and one channel");
    }
    if (static_cast<std::int64_t>(values.size()) != length * channels) {
        throw DataError("series '" + id + "' value buffer does not match T*D");
    }
    if (static_cast<std::int64_t>(labels.size()) != length) {
        throw DataError("series '" + id + "' has " + std::to_string(labels.size()) +
                        " labels for " + std::to_string(length) + " timesteps");
    }
    if (static_cast<std::int64_t>(timestamps.size()) != length) {
        throw DataError("series '" + id + "' has " + std::to_string(timestamps.size()) +
                        " timestamps for " + std::to_string(length) + " timesteps");
    }
}

TimeSeries make_series(std::string id, std::int64_t channels, std::vector<double> values,
                       std::vector<LabelState> labels) {
    if (channels < 1) throw DataError("make_series: channels must be >= 1");
    if (values.size() % static_cast<std::size_t>(channels) != 0) {
        throw DataError("make_series: value count not divisible by channel count");
    }
    TimeSeries s;
    s.id = std::move(id);
    s.channels = channels;
    s.length = static_cast<std::int64_t>(values.size()) / channels;
    s.values = std::move(values);
    s.timestamps.resize(static_cast<std::size_t>(s.length));
    for (std::int64_t t = 0; t < s.length; ++t) s.timestamps[static_cast<std::size_t>(t)] = static_cast<double>(t);
    if (labels.empty()) {
        s.labels.assign(static_cast<std::size_t>(s.length), LabelState::Normal);
    } else {
        s.labels = std::move(labels);
    }
    s.validate();
    return s;
}

void WindowSpec::validate() const {
    if (context_length < 1) throw ConfigError("window spec: context_length must be >= 1");
    if (suspect_length < 1) throw ConfigError("window spec: suspect_length must be >= 1");
    if (stride < 1) throw ConfigError("window spec: stride must be >= 1");
}

void Dataset::validate() const {
    std::unordered_set<std::string> ids;
    for (const auto& s : series) {
        s.validate();
        if (!ids.insert(s.id).second) {
            throw DataError("duplicate series id '" + s.id + "' in split '" + split + "'");
        }
    }
}

StandardizeMethod standardize_method_from_string(const std::string& s) {
    if (s == "mean-std") return StandardizeMethod::mean_std;
    if (s == "median-iqr") return StandardizeMethod::median_iqr;
    throw ConfigError("unknown standardize method '" + s + "'");
}

UnlabeledPolicy unlabeled_policy_from_string(const std::string& s) {
    if (s == "unlabeled-as-normal") return UnlabeledPolicy::as_normal;
    if (s == "unlabeled-excluded") return UnlabeledPolicy::excluded;
    throw ConfigError("unknown unlabeled policy '" + s + "'");
}

std::string to_string(StandardizeMethod m) {
    return m == StandardizeMethod::mean_std ? "mean-std" : "median-iqr";
}

std::string to_string(UnlabeledPolicy p) {
    return p == UnlabeledPolicy::as_normal ? "unlabeled-as-normal" : "unlabeled-excluded";
}

StandardizationStats fit_standardizer(const Dataset& dataset, StandardizeMethod method) {
    if (dataset.series.empty()) throw DataError("fit_standardizer: empty dataset");
    const std::int64_t D = dataset.series.front().channels;
    for (const auto& s : dataset.series) {
        if (s.channels != D) {
            throw DataError("fit_standardizer: series '" + s.id + "' has " +
                            std::to_string(s.channels) + " channels, expected " + std::to_string(D));
        }
    }

    StandardizationStats stats;
    stats.location.resize(static_cast<std::size_t>(D));
    stats.scale.resize(static_cast<std::size_t>(D));
    std::vector<double> pooled;
    for (std::int64_t d = 0; d < D; ++d) {
        pooled.clear();
        for (const auto& s : dataset.series) {
            for (std::int64_t t = 0; t < s.length; ++t) pooled.push_back(s.at(t, d));
        }
        double loc = 0.0, sc = 0.0;
        if (method == StandardizeMethod::mean_std) {
            loc = mean_of(pooled);
            sc = stddev_of(pooled);
        } else {
            std::sort(pooled.begin(), pooled.end());
            loc = quantile_sorted(pooled, 0.5);
            sc = quantile_sorted(pooled, 0.75) - quantile_sorted(pooled, 0.25);
        }
        if (!(sc > 0.0)) sc = 1.0;  // degenerate channel
        stats.location[static_cast<std::size_t>(d)] = loc;
        stats.scale[static_cast<std::size_t>(d)] = sc;
    }
    return stats;
}

namespace {

void require_stats_match(const TimeSeries& series, const StandardizationStats& stats) {
    if (static_cast<std::int64_t>(stats.location.size()) != series.channels ||
        static_cast<std::int64_t>(stats.scale.size()) != series.channels) {
        throw DataError("standardization stats cover " + std::to_string(stats.location.size()) +
                        " channels, series '" + series.id + "' has " +
                        std::to_string(series.channels));
    }
}

}  // namespace

TimeSeries standardize(const TimeSeries& series, const StandardizationStats& stats) {
    require_stats_match(series, stats);
    TimeSeries out = series;
    for (std::int64_t t = 0; t < out.length; ++t)
        for (std::int64_t d = 0; d < out.channels; ++d)
            out.at(t, d) = (out.at(t, d) - stats.location[static_cast<std::size_t>(d)]) /
                           stats.scale[static_cast<std::size_t>(d)];
    return out;
}

TimeSeries unstandardize(const TimeSeries& series, const StandardizationStats& stats) {
    require_stats_match(series, stats);
    TimeSeries out = series;
    for (std::int64_t t = 0; t < out.length; ++t)
        for (std::int64_t d = 0; d < out.channels; ++d)
            out.at(t, d) = out.at(t, d) * stats.scale[static_cast<std::size_t>(d)] +
                           stats.location[static_cast<std::size_t>(d)];
    return out;
}

std::int64_t impute_missing(TimeSeries& series) {
    std::int64_t filled = 0;
    for (std::int64_t d = 0; d < series.channels; ++d) {
        double last = 0.0;  // zero-fill a leading gap
        for (std::int64_t t = 0; t < series.length; ++t) {
            double& v = series.at(t, d);
            if (std::isnan(v)) {
                v = last;
                ++filled;
            } else {
                last = v;
            }
        }
    }
    return filled;
}

WindowLabel window_label(std::span<const LabelState> suspect_labels, UnlabeledPolicy policy) {
    if (suspect_labels.empty()) throw ConfigError("window_label: empty suspect segment");
    WindowLabel out;
    bool all_unlabeled = true;
    for (auto l : suspect_labels) {
        if (l == LabelState::Anomalous) out.label = 1.0;
        if (l != LabelState::Unlabeled) all_unlabeled = false;
    }
    if (policy == UnlabeledPolicy::excluded && all_unlabeled) out.skip_in_loss = true;
    return out;
}

namespace {

Window crop_window(const TimeSeries& series, const WindowSpec& spec, std::int64_t start,
                   UnlabeledPolicy policy) {
    const auto L = spec.total();
    Window w;
    w.length = L;
    w.context_length = spec.context_length;
    w.channels = series.channels;
    w.series_id = series.id;
    w.start = start;
    w.values.assign(series.values.begin() + static_cast<std::ptrdiff_t>(start * series.channels),
                    series.values.begin() + static_cast<std::ptrdiff_t>((start + L) * series.channels));
    const auto lbl = window_label(
        std::span<const LabelState>(series.labels.data() + start + spec.context_length,
                                    static_cast<std::size_t>(spec.suspect_length)),
        policy);
    w.label = lbl.label;
    w.skip_in_loss = lbl.skip_in_loss;
    return w;
}

}  // namespace

std::vector<Window> sliding_windows(const TimeSeries& series, const WindowSpec& spec,
                                    UnlabeledPolicy policy) {
    spec.validate();
    series.validate();
    const auto L = spec.total();
    if (series.length < L) {
        throw DataError("series '" + series.id + "' is too short (" +
                        std::to_string(series.length) + " < window length " + std::to_string(L) + ")");
    }
    const auto count = (series.length - L) / spec.stride + 1;
    std::vector<Window> out;
    out.reserve(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) {
        out.push_back(crop_window(series, spec, i * spec.stride, policy));
    }
    return out;
}

std::vector<Window> random_crops(const Dataset& dataset, std::int64_t series_per_batch,
                                 std::int64_t crops_per_series, const WindowSpec& spec, Rng& rng,
                                 UnlabeledPolicy policy) {
    spec.validate();
    if (series_per_batch < 1 || crops_per_series < 1) {
        throw ConfigError("random_crops: batch shape must be positive");
    }
    const auto L = spec.total();
    std::vector<const TimeSeries*> eligible;
    for (const auto& s : dataset.series) {
        if (s.length >= L) eligible.push_back(&s);
    }
    if (eligible.empty()) {
        throw DataError("random_crops: no series reaches window length " + std::to_string(L));
    }
    std::vector<Window> out;
    out.reserve(static_cast<std::size_t>(series_per_batch * crops_per_series));
    for (std::int64_t i = 0; i < series_per_batch; ++i) {
        const TimeSeries& s = *eligible[rng.index(eligible.size())];
        for (std::int64_t j = 0; j < crops_per_series; ++j) {
            const auto start = static_cast<std::int64_t>(rng.index(static_cast<std::size_t>(s.length - L + 1)));
            out.push_back(crop_window(s, spec, start, policy));
        }
    }
    return out;
}

SeriesSplits split_yahoo_style(const TimeSeries& series) {
    series.validate();
    const auto T = series.length;
    if (T < 10) {
        throw DataError("series '" + series.id + "' too short to split (" + std::to_string(T) +
                        " < 10 timesteps)");
    }
    const auto n_test = T / 2;
    const auto prefix = T - n_test;
    const auto n_train = prefix * 3 / 5;
    const auto n_val = prefix - n_train;
    if (n_train < 1 || n_val < 1 || n_test < 1) {
        throw DataError("series '" + series.id + "' cannot produce three non-empty splits");
    }

    auto slice = [&](std::int64_t from, std::int64_t count) {
        TimeSeries s;
        s.id = series.id;
        s.channels = series.channels;
        s.length = count;
        s.values.assign(series.values.begin() + static_cast<std::ptrdiff_t>(from * series.channels),
                        series.values.begin() + static_cast<std::ptrdiff_t>((from + count) * series.channels));
        s.timestamps.assign(series.timestamps.begin() + from, series.timestamps.begin() + from + count);
        s.labels.assign(series.labels.begin() + from, series.labels.begin() + from + count);
        return s;
    };
    return SeriesSplits{slice(0, n_train), slice(n_train, n_val), slice(n_train + n_val, n_test)};
}

TimeSeries pad_left_edge(const TimeSeries& series, std::int64_t target_len) {
    series.validate();
    if (series.length >= target_len) return series;
    const auto pad = target_len - series.length;
    TimeSeries out;
    out.id = series.id;
    out.channels = series.channels;
    out.length = target_len;
    out.values.reserve(static_cast<std::size_t>(target_len * series.channels));
    for (std::int64_t t = 0; t < pad; ++t) {
        out.values.insert(out.values.end(), series.values.begin(),
                          series.values.begin() + static_cast<std::ptrdiff_t>(series.channels));
    }
    out.values.insert(out.values.end(), series.values.begin(), series.values.end());
    const double dt = series.length > 1 ? series.timestamps[1] - series.timestamps[0] : 1.0;
    out.timestamps.resize(static_cast<std::size_t>(target_len));
    for (std::int64_t t = 0; t < pad; ++t) {
        out.timestamps[static_cast<std::size_t>(t)] =
            series.timestamps.front() - static_cast<double>(pad - t) * dt;
    }
    std::copy(series.timestamps.begin(), series.timestamps.end(), out.timestamps.begin() + pad);
    out.labels.assign(static_cast<std::size_t>(pad), LabelState::Unlabeled);
    out.labels.insert(out.labels.end(), series.labels.begin(), series.labels.end());
    return out;
}

}  // namespace ncad
