#include "ncad/evalkit.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>

#include "ncad/common.hpp"

namespace ncad {

std::string to_string(EvalMode mode) {
    return mode == EvalMode::adjusted ? "adjusted" : "pointwise";
}

EvalMode eval_mode_from_string(const std::string& name) {
    if (name == "adjusted") return EvalMode::adjusted;
    if (name == "pointwise") return EvalMode::pointwise;
    throw ConfigError("unknown evaluation mode: " + name);
}

nlohmann::json eval_result_to_json(const EvalResult& result) {
    return nlohmann::json{
        {"precision", result.precision}, {"recall", result.recall}, {"f1", result.f1},
        {"threshold", result.threshold}, {"tp", result.tp},         {"fp", result.fp},
        {"fn", result.fn},               {"mode", to_string(result.mode)},
    };
}

std::string eval_result_table(const EvalResult& result) {
    std::ostringstream out;
    out.precision(6);
    const auto row = [&out](const char* name, double value) {
        out << name;
        for (std::size_t i = std::string(name).size(); i < 12; ++i) out << ' ';
        out << value << '\n';
    };
    out << "mode        " << to_string(result.mode) << '\n';
    row("threshold", result.threshold);
    row("precision", result.precision);
    row("recall", result.recall);
    row("f1", result.f1);
    out << "tp/fp/fn    " << result.tp << '/' << result.fp << '/' << result.fn << '\n';
    return out.str();
}

std::vector<std::uint8_t> point_adjust(std::span<const std::uint8_t> y_true,
                                       std::span<const std::uint8_t> y_pred) {
    if (y_true.size() != y_pred.size())
        throw ConfigError("point_adjust: label/prediction length mismatch");
    std::vector<std::uint8_t> out(y_pred.begin(), y_pred.end());
    std::size_t i = 0;
    while (i < y_true.size()) {
        if (!y_true[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        bool detected = false;
        while (j < y_true.size() && y_true[j]) {
            if (y_pred[j]) detected = true;
            ++j;
        }
        if (detected) std::fill(out.begin() + static_cast<std::ptrdiff_t>(i),
                                out.begin() + static_cast<std::ptrdiff_t>(j), std::uint8_t{1});
        i = j;
    }
    return out;
}

namespace {

struct Counts {
    std::int64_t tp = 0, fp = 0, fn = 0, total = 0;
};

void tally(std::span<const std::uint8_t> y_true, std::span<const std::uint8_t> y_pred,
                EvalMode mode, Counts& counts) {
    if (y_true.size() != y_pred.size()) throw ConfigError("prf: label/prediction length mismatch");
    std::vector<std::uint8_t> adjusted;
    std::span<const std::uint8_t> pred = y_pred;
    if (mode == EvalMode::adjusted) {
        adjusted = point_adjust(y_true, y_pred);
        pred = adjusted;
    }
    for (std::size_t t = 0; t < y_true.size(); ++t) {
        counts.tp += y_true[t] && pred[t];
        counts.fp += !y_true[t] && pred[t];
        counts.fn += y_true[t] && !pred[t];
    }
    counts.total += static_cast<std::int64_t>(y_true.size());
}

EvalResult finish(const Counts& counts, EvalMode mode) {
    if (counts.total == 0) throw DataError("prf: no labeled timesteps to evaluate");
    EvalResult r;
    r.mode = mode;
    r.tp = counts.tp;
    r.fp = counts.fp;
    r.fn = counts.fn;
    if (counts.tp + counts.fp > 0)
        r.precision = static_cast<double>(counts.tp) / static_cast<double>(counts.tp + counts.fp);
    if (counts.tp + counts.fn > 0)
        r.recall = static_cast<double>(counts.tp) / static_cast<double>(counts.tp + counts.fn);
    if (r.precision + r.recall > 0.0)
        r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

}  // namespace

EvalResult prf(std::span<const std::uint8_t> y_true, std::span<const std::uint8_t> y_pred,
               EvalMode mode) {
    Counts counts;
    tally(y_true, y_pred, mode, counts);
    return finish(counts, mode);
}

EvalResult prf(std::span<const LabeledPrediction> pairs, EvalMode mode) {
    Counts counts;
    for (const auto& pair : pairs) tally(pair.y_true, pair.y_pred, mode, counts);
    return finish(counts, mode);
}

std::vector<MaskedStretch> masked_stretches(const ScoreTrace& trace, const TimeSeries& series) {
    if (trace.scores.size() != static_cast<std::size_t>(series.length) ||
        trace.scored.size() != trace.scores.size())
        throw DataError("masked_stretches: trace length does not match series " + series.id);
    std::vector<MaskedStretch> out;
    MaskedStretch current;
    const auto flush = [&] {
        if (!current.y_true.empty()) out.push_back(std::move(current));
        current = {};
    };
    for (std::int64_t t = 0; t < series.length; ++t) {
        const auto ut = static_cast<std::size_t>(t);
        if (!trace.scored[ut] || series.labels[ut] == LabelState::Unlabeled) {
            flush();
            continue;
        }
        current.y_true.push_back(series.labels[ut] == LabelState::Anomalous ? 1 : 0);
        current.scores.push_back(trace.scores[ut]);
    }
    flush();
    return out;
}

EvalResult evaluate_dataset(std::span<const ScoreTrace> traces,
                            std::span<const TimeSeries> series, double threshold,
                            EvalMode mode) {
    std::unordered_map<std::string, const ScoreTrace*> by_id;
    for (const auto& trace : traces) {
        if (!by_id.emplace(trace.series_id, &trace).second)
            throw DataError("evaluate_dataset: duplicate trace for series " + trace.series_id);
    }
    std::vector<LabeledPrediction> pairs;
    for (const auto& s : series) {
        const bool has_labels =
            std::any_of(s.labels.begin(), s.labels.end(),
                        [](LabelState l) { return l != LabelState::Unlabeled; });
        const auto it = by_id.find(s.id);
        if (it == by_id.end()) {
            if (has_labels) throw DataError("evaluate_dataset: no trace for labeled series " + s.id);
            continue;
        }
        for (auto& stretch : masked_stretches(*it->second, s)) {
            LabeledPrediction pair;
            pair.y_true = std::move(stretch.y_true);
            pair.y_pred.reserve(stretch.scores.size());
            for (double score : stretch.scores) pair.y_pred.push_back(score > threshold ? 1 : 0);
            pairs.push_back(std::move(pair));
        }
    }
    auto result = prf(pairs, mode);
    result.threshold = threshold;
    return result;
}

}  // namespace ncad
