#include "ncad/detector.hpp"

#include <algorithm>
#include <cmath>

namespace ncad {

DistanceKind distance_kind_from_string(const std::string& s) {
    if (s == "euclidean") return DistanceKind::euclidean;
    if (s == "cosine-log") return DistanceKind::cosine_log;
    throw ConfigError("unknown distance '" + s + "' (expected euclidean or cosine-log)");
}

ScoreTransform score_transform_from_string(const std::string& s) {
    if (s == "exp-sq") return ScoreTransform::exp_sq;
    if (s == "exp-abs") return ScoreTransform::exp_abs;
    throw ConfigError("unknown score transform '" + s + "' (expected exp-sq or exp-abs)");
}

Aggregation aggregation_from_string(const std::string& s) {
    if (s == "mean") return Aggregation::mean;
    if (s == "max-first-alert") return Aggregation::max_first_alert;
    throw ConfigError("unknown aggregation '" + s + "' (expected mean or max-first-alert)");
}

std::string to_string(DistanceKind k) {
    return k == DistanceKind::euclidean ? "euclidean" : "cosine-log";
}

std::string to_string(ScoreTransform t) { return t == ScoreTransform::exp_sq ? "exp-sq" : "exp-abs"; }

std::string to_string(Aggregation a) {
    return a == Aggregation::mean ? "mean" : "max-first-alert";
}

namespace {

void require_same_dim(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw ConfigError("embedding dimension mismatch: " + std::to_string(x.size()) + " vs " +
                          std::to_string(y.size()));
    }
}

}  // namespace

double dist_l2(std::span<const double> x, std::span<const double> y) {
    require_same_dim(x, y);
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        ss += d * d;
    }
    return std::sqrt(ss);
}

double dist_cos(std::span<const double> x, std::span<const double> y) {
    require_same_dim(x, y);
    double dot = 0.0, nx = 0.0, ny = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        dot += x[i] * y[i];
        nx += x[i] * x[i];
        ny += y[i] * y[i];
    }
    if (nx == 0.0 || ny == 0.0) throw NumericError("cosine distance of a zero vector");
    const double cossim = dot / (std::sqrt(nx) * std::sqrt(ny));
    const double arg = std::clamp((1.0 + cossim) / 2.0, kCosEps / 2.0, 1.0);
    return -std::log(arg);
}

double distance(std::span<const double> x, std::span<const double> y, DistanceKind kind) {
    return kind == DistanceKind::euclidean ? dist_l2(x, y) : dist_cos(x, y);
}

Tensor row_distance(const Tensor& a, const Tensor& b, DistanceKind kind) {
    if (kind == DistanceKind::euclidean) {
        return row_l2_norm(sub(a, b));
    }
    auto cos = row_sum(mul(l2_normalize_rows(a), l2_normalize_rows(b)));
    auto arg = clamp(scale(add_scalar(cos, 1.0), 0.5), kCosEps / 2.0, 1.0);
    return neg(ncad::log(arg));
}

namespace {

// (1-y) * d^2 - y * log(1 - l), with l = exp(-d^2) clamped so the log stays
// finite. The clamp only guards the anomalous branch; the nominal d^2 pull
// is never truncated.
Tensor losses_from_distance(const Tensor& d, const Tensor& labels) {
    auto d2 = square(d);
    auto l = clamp(ncad::exp(neg(d2)), kProbEps, 1.0 - kProbEps);
    auto anomalous_term = neg(ncad::log(sub_from_scalar(1.0, l)));
    auto nominal_weight = sub_from_scalar(1.0, labels);
    return add(mul(nominal_weight, d2), mul(labels, anomalous_term));
}

}  // namespace

Tensor contextual_hsc_losses(const Tensor& z, const Tensor& z_context, const Tensor& labels,
                             DistanceKind kind) {
    return losses_from_distance(row_distance(z, z_context, kind), labels);
}

Tensor hsc_losses(const Tensor& z, const Tensor& labels, const std::vector<double>& center) {
    if (z.shape().size() != 2) throw ConfigError("hsc_losses expects [batch, embedding]");
    const auto B = z.dim(0), E = z.dim(1);
    if (static_cast<std::int64_t>(center.size()) != E) {
        throw ConfigError("hypersphere center has dimension " + std::to_string(center.size()) +
                          ", embeddings have " + std::to_string(E));
    }
    std::vector<double> tiled(static_cast<std::size_t>(B * E));
    for (std::int64_t b = 0; b < B; ++b) {
        std::copy(center.begin(), center.end(), tiled.begin() + b * E);
    }
    auto c = Tensor::from_values({B, E}, std::move(tiled));
    return losses_from_distance(row_l2_norm(sub(z, c)), labels);
}

double contextual_hsc_loss(std::span<const double> z, std::span<const double> z_context, double y,
                           DistanceKind kind) {
    if (!(y >= 0.0 && y <= 1.0)) throw ConfigError("label must lie in [0,1]");
    autograd::NoGradGuard guard;
    auto zt = Tensor::from_values({1, static_cast<std::int64_t>(z.size())}, {z.begin(), z.end()});
    auto ct = Tensor::from_values({1, static_cast<std::int64_t>(z_context.size())},
                                  {z_context.begin(), z_context.end()});
    auto yt = Tensor::from_values({1}, {y});
    return contextual_hsc_losses(zt, ct, yt, kind).values()[0];
}

double hsc_loss(std::span<const double> z, double y, std::span<const double> center) {
    if (!(y >= 0.0 && y <= 1.0)) throw ConfigError("label must lie in [0,1]");
    autograd::NoGradGuard guard;
    auto zt = Tensor::from_values({1, static_cast<std::int64_t>(z.size())}, {z.begin(), z.end()});
    auto yt = Tensor::from_values({1}, {y});
    return hsc_losses(zt, yt, {center.begin(), center.end()}).values()[0];
}

double apply_transform(double score, ScoreTransform transform) {
    const double arg = transform == ScoreTransform::exp_sq ? score * score : std::fabs(score);
    return 1.0 - std::exp(-arg);
}

WindowScore score_window(const Window& window, const ParameterSet& params,
                         const EncoderConfig& cfg, DistanceKind kind, ScoreTransform transform) {
    const Window* w = &window;
    auto scores = score_windows(std::span<const Window>(w, 1), params, cfg, kind);
    return {scores[0], apply_transform(scores[0], transform)};
}

std::vector<double> score_windows(std::span<const Window> windows, const ParameterSet& params,
                                  const EncoderConfig& cfg, DistanceKind kind,
                                  std::size_t batch_cap, std::span<const double> center) {
    if (batch_cap == 0) throw ConfigError("score_windows: batch_cap must be positive");
    if (!center.empty() && static_cast<std::int64_t>(center.size()) != cfg.embedding_dim) {
        throw ConfigError("score_windows: center has " + std::to_string(center.size()) +
                          " dims, embeddings have " + std::to_string(cfg.embedding_dim));
    }
    autograd::NoGradGuard guard;
    std::vector<double> out;
    out.reserve(windows.size());
    const auto E = cfg.embedding_dim;
    for (std::size_t base = 0; base < windows.size(); base += batch_cap) {
        const auto n = std::min(batch_cap, windows.size() - base);
        auto chunk = windows.subspan(base, n);
        const auto C = chunk.front().context_length;
        for (const auto& w : chunk) {
            if (w.context_length != C || w.context_length < 1 || w.length <= w.context_length) {
                throw ConfigError("score_windows: window lacks a context/suspect split");
            }
        }
        auto z = encode_batch(windows_to_tensor(chunk), params, cfg);
        if (!center.empty()) {
            for (std::size_t i = 0; i < n; ++i) {
                out.push_back(dist_l2(
                    z.values().subspan(i * static_cast<std::size_t>(E), static_cast<std::size_t>(E)),
                    center));
            }
            continue;
        }
        auto zc = encode_batch(windows_to_tensor(chunk, C), params, cfg);
        for (std::size_t i = 0; i < n; ++i) {
            out.push_back(distance(z.values().subspan(i * static_cast<std::size_t>(E), static_cast<std::size_t>(E)),
                                   zc.values().subspan(i * static_cast<std::size_t>(E), static_cast<std::size_t>(E)),
                                   kind));
        }
    }
    return out;
}

ScoreTrace rolling_score(const TimeSeries& series, const WindowSpec& spec,
                         const ParameterSet& params, const EncoderConfig& cfg, DistanceKind kind,
                         const RollingScoreOptions& options) {
    spec.validate();
    series.validate();
    const auto L = spec.total();
    const auto C = spec.context_length;

    // Scoring never reads labels; padding exists purely to grow the value
    // matrix. pad_warmup shifts the whole series right by C so even timestep 0
    // falls inside some suspect segment.
    TimeSeries padded = series;
    std::int64_t offset = 0;
    if (options.pad_warmup) {
        padded = pad_left_edge(series, series.length + C);
        offset = C;
    }
    if (padded.length < L) {
        const auto grow = L - padded.length;
        padded = pad_left_edge(padded, L);
        offset += grow;
    }

    auto windows = sliding_windows(padded, spec);
    auto window_scores =
        score_windows(windows, params, cfg, kind, options.batch_cap, options.center);

    const auto T = series.length;
    ScoreTrace trace;
    trace.series_id = series.id;
    trace.timestamps = series.timestamps;
    trace.aggregation = options.aggregation;
    trace.scores.assign(static_cast<std::size_t>(T), 0.0);
    trace.probabilities.assign(static_cast<std::size_t>(T), 0.0);
    trace.scored.assign(static_cast<std::size_t>(T), false);
    std::vector<std::int64_t> counts(static_cast<std::size_t>(T), 0);

    for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto s = windows[i].start;
        const double score = window_scores[i];
        for (std::int64_t u = s + C; u < s + L; ++u) {
            const auto t = u - offset;  // position in the original series
            if (t < 0 || t >= T) continue;
            auto& slot = trace.scores[static_cast<std::size_t>(t)];
            auto& cnt = counts[static_cast<std::size_t>(t)];
            if (options.aggregation == Aggregation::mean) {
                slot += score;
            } else {
                slot = cnt == 0 ? score : std::max(slot, score);
            }
            ++cnt;
        }
    }
    for (std::int64_t t = 0; t < T; ++t) {
        const auto cnt = counts[static_cast<std::size_t>(t)];
        if (cnt == 0) continue;
        if (options.aggregation == Aggregation::mean) {
            trace.scores[static_cast<std::size_t>(t)] /= static_cast<double>(cnt);
        }
        trace.scored[static_cast<std::size_t>(t)] = true;
        trace.probabilities[static_cast<std::size_t>(t)] =
            apply_transform(trace.scores[static_cast<std::size_t>(t)], options.transform);
    }
    return trace;
}

}  // namespace ncad
