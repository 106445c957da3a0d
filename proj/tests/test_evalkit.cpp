#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ncad/common.hpp"
#include "ncad/evalkit.hpp"

using namespace ncad;

namespace {

using Bits = std::vector<std::uint8_t>;

// Independent reference: for every detected anomalous point, expand left and
// right over the true run. Quadratic, but obviously correct.
Bits brute_adjust(const Bits& y_true, const Bits& y_pred) {
    Bits out = y_pred;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (!(y_true[i] && y_pred[i])) continue;
        std::size_t lo = i, hi = i;
        while (lo > 0 && y_true[lo - 1]) --lo;
        while (hi + 1 < y_true.size() && y_true[hi + 1]) ++hi;
        for (std::size_t j = lo; j <= hi; ++j) out[j] = 1;
    }
    return out;
}

Bits random_bits(std::size_t n, double p, Rng& rng) {
    Bits out(n);
    for (auto& b : out) b = rng.bernoulli(p) ? 1 : 0;
    return out;
}

ScoreTrace make_trace(std::string id, std::vector<double> scores, std::vector<bool> scored = {}) {
    ScoreTrace trace;
    trace.series_id = std::move(id);
    trace.scores = std::move(scores);
    if (scored.empty()) scored.assign(trace.scores.size(), true);
    trace.scored = std::move(scored);
    trace.probabilities.assign(trace.scores.size(), 0.0);
    for (std::size_t t = 0; t < trace.scores.size(); ++t) trace.timestamps.push_back(static_cast<double>(t));
    return trace;
}

TimeSeries labeled_series(std::string id, std::vector<int> labels) {
    std::vector<double> values(labels.size(), 0.0);
    auto series = make_series(std::move(id), 1, values);
    for (std::size_t t = 0; t < labels.size(); ++t) series.labels[t] = label_from_int(labels[t]);
    return series;
}

}  // namespace

TEST_CASE("point_adjust worked examples") {
    CHECK(point_adjust(Bits{0, 1, 1, 1, 0}, Bits{0, 0, 1, 0, 0}) == Bits{0, 1, 1, 1, 0});

    // No true segments: predictions pass through.
    CHECK(point_adjust(Bits{0, 0, 0, 0}, Bits{1, 0, 1, 0}) == Bits{1, 0, 1, 0});

    // First segment undetected stays undetected; detection outside segments
    // is untouched.
    CHECK(point_adjust(Bits{1, 1, 0, 1}, Bits{0, 0, 0, 1}) == Bits{0, 0, 0, 1});
    CHECK(point_adjust(Bits{1, 1, 0, 1}, Bits{0, 0, 1, 0}) == Bits{0, 0, 1, 0});

    CHECK_THROWS_AS(point_adjust(Bits{0, 1}, Bits{0}), ConfigError);
}

TEST_CASE("point_adjust matches a brute-force oracle and is idempotent") {
    Rng rng(401);
    for (int rep = 0; rep < 1000; ++rep) {
        const auto n = static_cast<std::size_t>(rng.range(1, 50));
        const auto y_true = random_bits(n, rng.uniform(0.1, 0.6), rng);
        const auto y_pred = random_bits(n, rng.uniform(0.1, 0.6), rng);
        const auto adjusted = point_adjust(y_true, y_pred);
        REQUIRE(adjusted == brute_adjust(y_true, y_pred));
        // Never decreases a prediction.
        for (std::size_t i = 0; i < n; ++i) REQUIRE(adjusted[i] >= y_pred[i]);
        // Idempotent.
        REQUIRE(point_adjust(y_true, adjusted) == adjusted);
    }
}

TEST_CASE("precision/recall/F1 worked example in both modes") {
    const Bits y_true{0, 1, 1, 1, 0};
    const Bits y_pred{0, 0, 1, 0, 0};

    auto pw = prf(y_true, y_pred, EvalMode::pointwise);
    CHECK(pw.tp == 1);
    CHECK(pw.fp == 0);
    CHECK(pw.fn == 2);
    CHECK(pw.precision == 1.0);
    CHECK(pw.recall == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(pw.f1 == doctest::Approx(0.5).epsilon(1e-12));

    auto adj = prf(y_true, y_pred, EvalMode::adjusted);
    CHECK(adj.tp == 3);
    CHECK(adj.fp == 0);
    CHECK(adj.fn == 0);
    CHECK(adj.precision == 1.0);
    CHECK(adj.recall == 1.0);
    CHECK(adj.f1 == 1.0);
}

TEST_CASE("prf edge cases") {
    // Perfect prediction.
    auto perfect = prf(Bits{0, 1, 1, 0}, Bits{0, 1, 1, 0}, EvalMode::adjusted);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f1 == 1.0);

    // All-negative prediction with true anomalies present.
    auto silent = prf(Bits{0, 1, 0}, Bits{0, 0, 0}, EvalMode::adjusted);
    CHECK(silent.recall == 0.0);
    CHECK(silent.f1 == 0.0);

    CHECK_THROWS_AS(prf(std::span<const LabeledPrediction>{}, EvalMode::adjusted), DataError);
}

TEST_CASE("adjusted counts dominate pointwise counts at the same predictions") {
    Rng rng(409);
    for (int rep = 0; rep < 200; ++rep) {
        const auto n = static_cast<std::size_t>(rng.range(2, 60));
        const auto y_true = random_bits(n, 0.3, rng);
        const auto y_pred = random_bits(n, 0.3, rng);
        if (std::none_of(y_true.begin(), y_true.end(), [](auto b) { return b; })) continue;
        auto pw = prf(y_true, y_pred, EvalMode::pointwise);
        auto adj = prf(y_true, y_pred, EvalMode::adjusted);
        REQUIRE(adj.tp >= pw.tp);
        REQUIRE(adj.fp == pw.fp);
        REQUIRE(adj.precision >= pw.precision);
        REQUIRE(adj.recall >= pw.recall);
        REQUIRE(adj.f1 >= pw.f1);
        // F1 identity.
        for (const auto& r : {pw, adj}) {
            if (r.precision + r.recall > 0.0) {
                REQUIRE(r.f1 == doctest::Approx(2.0 * r.precision * r.recall /
                                                (r.precision + r.recall))
                                    .epsilon(1e-12));
            } else {
                REQUIRE(r.f1 == 0.0);
            }
        }
    }
}

TEST_CASE("pooling sums counts across sequences") {
    std::vector<LabeledPrediction> pairs;
    pairs.push_back({Bits{0, 1, 1, 0}, Bits{0, 1, 0, 1}});
    pairs.push_back({Bits{1, 1, 0}, Bits{0, 0, 1}});
    auto pooled = prf(pairs, EvalMode::pointwise);

    auto a = prf(pairs[0].y_true, pairs[0].y_pred, EvalMode::pointwise);
    auto b = prf(pairs[1].y_true, pairs[1].y_pred, EvalMode::pointwise);
    CHECK(pooled.tp == a.tp + b.tp);
    CHECK(pooled.fp == a.fp + b.fp);
    CHECK(pooled.fn == a.fn + b.fn);
    // Micro-average differs from averaging per-series F1 in general; here the
    // pooled result reflects the summed counts exactly.
    CHECK(pooled.precision == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(pooled.recall == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("masked stretches split on unlabeled and unscored timesteps") {
    auto series = labeled_series("s", {0, 1, -1, 1, 0, 1});
    auto trace = make_trace("s", {0.1, 0.9, 0.5, 0.8, 0.2, 0.7},
                            {true, true, true, true, false, true});

    auto stretches = masked_stretches(trace, series);
    REQUIRE(stretches.size() == 3);
    CHECK(stretches[0].y_true == Bits{0, 1});
    CHECK(stretches[0].scores == std::vector<double>{0.1, 0.9});
    CHECK(stretches[1].y_true == Bits{1});
    CHECK(stretches[1].scores == std::vector<double>{0.8});
    CHECK(stretches[2].y_true == Bits{1});
    CHECK(stretches[2].scores == std::vector<double>{0.7});

    auto short_trace = make_trace("s", {0.1, 0.2});
    CHECK_THROWS_AS(masked_stretches(short_trace, series), DataError);
}

TEST_CASE("unlabeled gaps break true segments during adjustment") {
    // One physical anomaly interrupted by an unlabeled point. A detection on
    // the left half must not mark the right half as detected.
    auto series = labeled_series("s", {0, 1, -1, 1, 1, 0});
    auto trace = make_trace("s", {0.0, 1.0, 0.0, 0.0, 0.0, 0.0});

    std::vector<TimeSeries> ds{series};
    std::vector<ScoreTrace> traces{trace};
    auto r = evaluate_dataset(traces, ds, 0.5, EvalMode::adjusted);
    CHECK(r.tp == 1);
    CHECK(r.fn == 2);
    CHECK(r.fp == 0);
}

TEST_CASE("evaluate_dataset fixture agrees with a hand count") {
    // 20-point fixture, two series, warm-up masking on the second.
    auto s1 = labeled_series("a", {0, 0, 1, 1, 0, 0, 0, 1, 0, 0});
    auto t1 = make_trace("a", {0.1, 0.2, 0.9, 0.1, 0.3, 0.2, 0.1, 0.7, 0.2, 0.1});
    auto s2 = labeled_series("b", {1, 0, 0, 0, 1, 1, 0, 0, 0, 1});
    auto t2 = make_trace("b", {0.9, 0.1, 0.2, 0.3, 0.8, 0.1, 0.2, 0.1, 0.2, 0.4},
                         {false, false, true, true, true, true, true, true, true, true});

    std::vector<TimeSeries> ds{s1, s2};
    std::vector<ScoreTrace> traces{t2, t1};  // order must not matter

    const double threshold = 0.5;
    // Hand count, pointwise: flagged when score > 0.5 and timestep scored.
    // s1: flags at t=2 (true 1) and t=7 (true 1) → tp 2; misses t=3 → fn 1.
    // s2: t=0 masked; flags at t=4 (true 1) → tp 1; misses t=5, t=9 → fn 2.
    auto pw = evaluate_dataset(traces, ds, threshold, EvalMode::pointwise);
    CHECK(pw.tp == 3);
    CHECK(pw.fp == 0);
    CHECK(pw.fn == 3);
    CHECK(pw.threshold == threshold);

    // Adjusted: s1 segment {2,3} detected via t=2 → +1 tp; s2 segment {4,5}
    // detected via t=4 → +1 tp; segment {9} undetected.
    auto adj = evaluate_dataset(traces, ds, threshold, EvalMode::adjusted);
    CHECK(adj.tp == 5);
    CHECK(adj.fp == 0);
    CHECK(adj.fn == 1);

    // Threshold above every score: all-negative, recall 0.
    auto none = evaluate_dataset(traces, ds, 1.0, EvalMode::adjusted);
    CHECK(none.tp == 0);
    CHECK(none.recall == 0.0);
    CHECK(none.f1 == 0.0);

    // Threshold below every score: all-positive; precision equals the
    // anomalous fraction of included timesteps. s2's anomaly at t=0 sits in
    // the masked warm-up, so 6 of 18 included points are anomalous.
    for (auto mode : {EvalMode::pointwise, EvalMode::adjusted}) {
        auto all = evaluate_dataset(traces, ds, -1e300, mode);
        CHECK(all.fn == 0);
        CHECK(all.recall == 1.0);
        CHECK(all.precision == doctest::Approx(6.0 / 18.0).epsilon(1e-12));
    }
}

TEST_CASE("pooled evaluation equals separate evaluation with summed counts") {
    auto s1 = labeled_series("a", {0, 1, 1, 0, 0});
    auto t1 = make_trace("a", {0.1, 0.6, 0.2, 0.7, 0.1});
    auto s2 = labeled_series("b", {1, 0, 0, 1, 1});
    auto t2 = make_trace("b", {0.9, 0.2, 0.6, 0.1, 0.8});

    std::vector<TimeSeries> both{s1, s2};
    std::vector<ScoreTrace> traces{t1, t2};
    for (auto mode : {EvalMode::pointwise, EvalMode::adjusted}) {
        auto pooled = evaluate_dataset(traces, both, 0.5, mode);
        auto only1 = evaluate_dataset(std::vector<ScoreTrace>{t1}, std::vector<TimeSeries>{s1}, 0.5, mode);
        auto only2 = evaluate_dataset(std::vector<ScoreTrace>{t2}, std::vector<TimeSeries>{s2}, 0.5, mode);
        CHECK(pooled.tp == only1.tp + only2.tp);
        CHECK(pooled.fp == only1.fp + only2.fp);
        CHECK(pooled.fn == only1.fn + only2.fn);
    }
}

TEST_CASE("evaluate_dataset input validation") {
    auto s1 = labeled_series("a", {0, 1});
    std::vector<TimeSeries> ds{s1};

    // Labeled series with no trace is an error.
    CHECK_THROWS_AS(evaluate_dataset(std::vector<ScoreTrace>{}, ds, 0.5, EvalMode::adjusted),
                    DataError);

    // A fully unlabeled series without a trace is skipped.
    auto blank = labeled_series("u", {-1, -1, -1});
    auto t1 = make_trace("a", {0.1, 0.9});
    std::vector<TimeSeries> mixed{s1, blank};
    std::vector<ScoreTrace> traces{t1};
    auto r = evaluate_dataset(traces, mixed, 0.5, EvalMode::adjusted);
    CHECK(r.tp == 1);

    // Duplicate traces for one series are rejected.
    std::vector<ScoreTrace> dup{t1, t1};
    CHECK_THROWS_AS(evaluate_dataset(dup, ds, 0.5, EvalMode::adjusted), DataError);

    // Nothing included at all (every timestep masked) is an error.
    auto all_masked = make_trace("a", {0.1, 0.9}, {false, false});
    std::vector<ScoreTrace> masked_traces{all_masked};
    CHECK_THROWS_AS(evaluate_dataset(masked_traces, ds, 0.5, EvalMode::adjusted), DataError);
}

TEST_CASE("result serialization round-trips through JSON and renders a table") {
    EvalResult r;
    r.precision = 0.75;
    r.recall = 0.5;
    r.f1 = 0.6;
    r.threshold = 1.25;
    r.tp = 3;
    r.fp = 1;
    r.fn = 3;
    r.mode = EvalMode::pointwise;

    auto j = eval_result_to_json(r);
    CHECK(j["precision"] == 0.75);
    CHECK(j["mode"] == "pointwise");
    CHECK(eval_mode_from_string(j["mode"].get<std::string>()) == EvalMode::pointwise);
    CHECK_THROWS_AS(eval_mode_from_string("bogus"), ConfigError);

    auto table = eval_result_table(r);
    CHECK(table.find("precision") != std::string::npos);
    CHECK(table.find("0.75") != std::string::npos);
    CHECK(table.find("3/1/3") != std::string::npos);
}
