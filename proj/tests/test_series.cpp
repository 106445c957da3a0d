#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "ncad/common.hpp"
#include "ncad/series.hpp"

using namespace ncad;

namespace {

TimeSeries labeled_series(const std::string& id, std::vector<double> values,
                          std::vector<int> labels) {
    std::vector<LabelState> ls;
    ls.reserve(labels.size());
    for (int v : labels) ls.push_back(label_from_int(v));
    return make_series(id, 1, std::move(values), std::move(ls));
}

}  // namespace

TEST_CASE("label states round-trip through their integer codes") {
    for (int v : {0, 1, -1}) CHECK(label_to_int(label_from_int(v)) == v);
    CHECK_THROWS_AS(label_from_int(2), DataError);
}

TEST_CASE("series construction and validation") {
    auto s = make_series("a", 2, {1, 2, 3, 4, 5, 6});
    CHECK(s.length == 3);
    CHECK(s.channels == 2);
    CHECK(s.at(1, 0) == 3.0);
    CHECK(s.at(2, 1) == 6.0);
    CHECK(s.timestamps[2] == 2.0);
    CHECK(s.labels[0] == LabelState::Normal);

    CHECK_THROWS_AS(make_series("b", 2, {1, 2, 3}), DataError);
    Dataset d{{s, s}, "train"};
    CHECK_THROWS_AS(d.validate(), DataError);  // duplicate ids
}

TEST_CASE("standardizer fit examples") {
    SUBCASE("constant channel falls back to unit scale") {
        Dataset d{{make_series("a", 1, {5, 5, 5})}, "train"};
        auto st = fit_standardizer(d);
        CHECK(st.location[0] == 5.0);
        CHECK(st.scale[0] == 1.0);
    }
    SUBCASE("mean and population std") {
        Dataset d{{make_series("a", 1, {0, 2})}, "train"};
        auto st = fit_standardizer(d);
        CHECK(st.location[0] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(st.scale[0] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("stats pool across series") {
        Dataset d{{make_series("a", 1, {0, 0}), make_series("b", 1, {4, 4})}, "train"};
        auto st = fit_standardizer(d);
        CHECK(st.location[0] == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(st.scale[0] == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("median and interquartile range") {
        Dataset d{{make_series("a", 1, {4, 0, 2, 1, 3})}, "train"};
        auto st = fit_standardizer(d, StandardizeMethod::median_iqr);
        CHECK(st.location[0] == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(st.scale[0] == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("empty dataset is rejected") {
        CHECK_THROWS_AS(fit_standardizer(Dataset{{}, "train"}), DataError);
    }
}

TEST_CASE("standardize applies per channel and leaves labels alone") {
    auto s = labeled_series("a", {3, 5}, {0, 1});
    StandardizationStats st{{1.0}, {2.0}};
    auto z = standardize(s, st);
    CHECK(z.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(z.at(1, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(z.labels[0] == LabelState::Normal);
    CHECK(z.labels[1] == LabelState::Anomalous);

    StandardizationStats identity{{0.0}, {1.0}};
    auto same = standardize(s, identity);
    CHECK(same.at(0, 0) == 3.0);
    CHECK(same.at(1, 0) == 5.0);

    StandardizationStats wrong{{0.0, 0.0}, {1.0, 1.0}};
    CHECK_THROWS_AS(standardize(s, wrong), DataError);
}

TEST_CASE("standardize then unstandardize recovers the series") {
    Rng rng(61);
    std::vector<double> vals(200);
    for (auto& v : vals) v = rng.uniform(-50, 50);
    auto s = make_series("a", 2, std::move(vals));
    Dataset d{{s}, "train"};
    auto st = fit_standardizer(d);
    auto round = unstandardize(standardize(s, st), st);
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        CHECK(round.values[i] == doctest::Approx(s.values[i]).epsilon(1e-10));
    }
}

TEST_CASE("imputation forward-fills and zero-fills the leading gap") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto s = make_series("a", 1, {nan, 2.0, nan, nan, 5.0});
    CHECK(impute_missing(s) == 3);
    CHECK(s.values == std::vector<double>{0.0, 2.0, 2.0, 2.0, 5.0});
}

TEST_CASE("window label aggregation") {
    using enum LabelState;
    const LabelState any_anom[] = {Normal, Anomalous, Normal};
    CHECK(window_label(any_anom, UnlabeledPolicy::as_normal).label == 1.0);

    const LabelState with_unlabeled[] = {Normal, Unlabeled};
    auto wl = window_label(with_unlabeled, UnlabeledPolicy::as_normal);
    CHECK(wl.label == 0.0);
    CHECK_FALSE(wl.skip_in_loss);

    const LabelState all_unlabeled[] = {Unlabeled, Unlabeled};
    auto skip = window_label(all_unlabeled, UnlabeledPolicy::excluded);
    CHECK(skip.label == 0.0);
    CHECK(skip.skip_in_loss);
    // Same segment under as-normal is an ordinary nominal window.
    CHECK_FALSE(window_label(all_unlabeled, UnlabeledPolicy::as_normal).skip_in_loss);
}

TEST_CASE("window label is monotone in anomalous evidence") {
    Rng rng(67);
    for (int rep = 0; rep < 100; ++rep) {
        const auto S = 1 + static_cast<std::int64_t>(rng.index(6));
        std::vector<LabelState> base(static_cast<std::size_t>(S));
        for (auto& l : base) l = label_from_int(static_cast<int>(rng.index(3)) - 1);
        for (auto policy : {UnlabeledPolicy::as_normal, UnlabeledPolicy::excluded}) {
            const double before = window_label(base, policy).label;
            auto bumped = base;
            bumped[rng.index(bumped.size())] = LabelState::Anomalous;
            CHECK(window_label(bumped, policy).label >= before);
        }
    }
}

TEST_CASE("sliding windows enumerate strided starts") {
    WindowSpec spec{.context_length = 3, .suspect_length = 2, .stride = 1};
    auto s = make_series("a", 1, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
    auto ws = sliding_windows(s, spec);
    REQUIRE(ws.size() == 6);
    for (std::size_t i = 0; i < ws.size(); ++i) {
        CHECK(ws[i].start == static_cast<std::int64_t>(i));
        CHECK(ws[i].values.front() == static_cast<double>(i));
        CHECK(ws[i].length == 5);
    }

    spec.stride = 5;
    auto strided = sliding_windows(s, spec);
    REQUIRE(strided.size() == 2);
    CHECK(strided[0].start == 0);
    CHECK(strided[1].start == 5);

    auto exact = sliding_windows(make_series("b", 1, {1, 2, 3, 4, 5}), WindowSpec{3, 2, 1});
    CHECK(exact.size() == 1);

    CHECK_THROWS_AS(sliding_windows(make_series("c", 1, {1, 2}), WindowSpec{3, 2, 1}), DataError);
}

TEST_CASE("sliding window labels come from the suspect segment only") {
    auto s = labeled_series("a", {0, 1, 2, 3, 4, 5}, {1, 0, 0, 0, 1, 0});
    WindowSpec spec{.context_length = 2, .suspect_length = 2, .stride = 1};
    auto ws = sliding_windows(s, spec);
    REQUIRE(ws.size() == 3);
    CHECK(ws[0].label == 0.0);  // anomalous timestep 0 sits in the context
    CHECK(ws[1].label == 1.0);  // suspect covers timesteps {3,4}
    CHECK(ws[2].label == 1.0);  // suspect covers timesteps {4,5}
}

TEST_CASE("window count formula matches brute enumeration") {
    Rng rng(71);
    for (int rep = 0; rep < 200; ++rep) {
        const std::int64_t C = 1 + static_cast<std::int64_t>(rng.index(8));
        const std::int64_t S = 1 + static_cast<std::int64_t>(rng.index(4));
        const std::int64_t L = C + S;
        const std::int64_t T = L + static_cast<std::int64_t>(rng.index(30));
        const std::int64_t stride = 1 + static_cast<std::int64_t>(rng.index(6));
        std::vector<double> vals(static_cast<std::size_t>(T));
        auto s = make_series("a", 1, std::move(vals));
        auto ws = sliding_windows(s, WindowSpec{C, S, stride});

        std::int64_t brute = 0;
        for (std::int64_t start = 0; start + L <= T; start += stride) ++brute;
        CHECK(static_cast<std::int64_t>(ws.size()) == brute);
        CHECK(static_cast<std::int64_t>(ws.size()) == (T - L) / stride + 1);
    }
}

TEST_CASE("with stride at most S every scoreable timestep lands in a suspect segment") {
    Rng rng(73);
    for (int rep = 0; rep < 50; ++rep) {
        const std::int64_t C = 1 + static_cast<std::int64_t>(rng.index(6));
        const std::int64_t S = 1 + static_cast<std::int64_t>(rng.index(4));
        const std::int64_t L = C + S;
        const std::int64_t T = L + static_cast<std::int64_t>(rng.index(20));
        const std::int64_t stride = 1 + static_cast<std::int64_t>(rng.index(static_cast<std::size_t>(S)));
        auto s = make_series("a", 1, std::vector<double>(static_cast<std::size_t>(T)));
        auto ws = sliding_windows(s, WindowSpec{C, S, stride});

        std::vector<bool> covered(static_cast<std::size_t>(T), false);
        for (const auto& w : ws) {
            for (std::int64_t t = w.start + C; t < w.start + L; ++t) covered[static_cast<std::size_t>(t)] = true;
        }
        const std::int64_t last_start = ((T - L) / stride) * stride;
        for (std::int64_t t = L - 1; t < last_start + L; ++t) {
            CHECK(covered[static_cast<std::size_t>(t)]);
        }
    }
}

TEST_CASE("random crops return the requested batch and respect series length") {
    Dataset d{{make_series("a", 1, std::vector<double>(20, 1.0)),
               make_series("b", 1, std::vector<double>(3, 2.0))},
              "train"};
    WindowSpec spec{.context_length = 3, .suspect_length = 2, .stride = 1};
    Rng rng(79);
    auto crops = random_crops(d, 2, 4, spec, rng);
    CHECK(crops.size() == 8);
    for (const auto& w : crops) {
        CHECK(w.series_id == "a");  // series b is shorter than L and skipped
        CHECK(w.start >= 0);
        CHECK(w.start + spec.total() <= 20);
    }

    Dataset exact{{make_series("c", 1, {1, 2, 3, 4, 5})}, "train"};
    Rng rng2(79);
    auto forced = random_crops(exact, 1, 1, spec, rng2);
    REQUIRE(forced.size() == 1);
    CHECK(forced[0].start == 0);

    Dataset all_short{{make_series("d", 1, {1, 2})}, "train"};
    Rng rng3(79);
    CHECK_THROWS_AS(random_crops(all_short, 1, 1, spec, rng3), DataError);
}

TEST_CASE("random crops are reproducible under the same seed") {
    Dataset d{{make_series("a", 2, std::vector<double>(60, 0.5)),
               make_series("b", 2, std::vector<double>(40, 1.5))},
              "train"};
    WindowSpec spec{.context_length = 4, .suspect_length = 2, .stride = 1};
    Rng r1(83), r2(83);
    auto c1 = random_crops(d, 3, 2, spec, r1);
    auto c2 = random_crops(d, 3, 2, spec, r2);
    REQUIRE(c1.size() == c2.size());
    for (std::size_t i = 0; i < c1.size(); ++i) {
        CHECK(c1[i].series_id == c2[i].series_id);
        CHECK(c1[i].start == c2[i].start);
    }
}

TEST_CASE("yahoo-style split proportions") {
    SUBCASE("T=100 splits 30/20/50") {
        auto s = make_series("a", 1, std::vector<double>(100));
        auto sp = split_yahoo_style(s);
        CHECK(sp.train.length == 30);
        CHECK(sp.validation.length == 20);
        CHECK(sp.test.length == 50);
    }
    SUBCASE("T=10 splits 3/2/5") {
        auto s = make_series("a", 1, std::vector<double>(10));
        auto sp = split_yahoo_style(s);
        CHECK(sp.train.length == 3);
        CHECK(sp.validation.length == 2);
        CHECK(sp.test.length == 5);
    }
    SUBCASE("too-short series is rejected") {
        CHECK_THROWS_AS(split_yahoo_style(make_series("a", 1, std::vector<double>(9))), DataError);
    }
}

TEST_CASE("splits partition the series in order") {
    Rng rng(89);
    for (int rep = 0; rep < 50; ++rep) {
        const std::int64_t T = 10 + static_cast<std::int64_t>(rng.index(200));
        std::vector<double> vals(static_cast<std::size_t>(T));
        std::vector<LabelState> labels(static_cast<std::size_t>(T));
        for (std::int64_t t = 0; t < T; ++t) {
            vals[static_cast<std::size_t>(t)] = static_cast<double>(t) * 0.5;
            labels[static_cast<std::size_t>(t)] = label_from_int(static_cast<int>(rng.index(3)) - 1);
        }
        auto s = make_series("a", 1, vals, labels);
        auto sp = split_yahoo_style(s);
        CHECK(sp.train.length + sp.validation.length + sp.test.length == T);

        std::vector<double> rebuilt;
        std::vector<LabelState> rebuilt_labels;
        for (const auto* part : {&sp.train, &sp.validation, &sp.test}) {
            rebuilt.insert(rebuilt.end(), part->values.begin(), part->values.end());
            rebuilt_labels.insert(rebuilt_labels.end(), part->labels.begin(), part->labels.end());
        }
        CHECK(rebuilt == vals);
        CHECK(rebuilt_labels == labels);
    }
}

TEST_CASE("left edge padding replicates the first row and marks it unlabeled") {
    auto s = labeled_series("a", {4, 5, 6}, {1, 0, 0});
    auto padded = pad_left_edge(s, 6);
    CHECK(padded.length == 6);
    for (int t = 0; t < 3; ++t) {
        CHECK(padded.at(t, 0) == 4.0);
        CHECK(padded.labels[static_cast<std::size_t>(t)] == LabelState::Unlabeled);
    }
    CHECK(padded.at(3, 0) == 4.0);
    CHECK(padded.labels[3] == LabelState::Anomalous);
    CHECK(padded.timestamps[0] == doctest::Approx(-3.0).epsilon(1e-12));
    CHECK(padded.timestamps[3] == 0.0);

    auto untouched = pad_left_edge(s, 2);
    CHECK(untouched.length == 3);
}
