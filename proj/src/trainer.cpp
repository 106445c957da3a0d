#include "ncad/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <unordered_map>

namespace ncad {

std::string to_string(LossMode mode) {
    return mode == LossMode::contextual ? "contextual" : "fixed-center";
}

LossMode loss_mode_from_string(const std::string& name) {
    if (name == "contextual") return LossMode::contextual;
    if (name == "fixed-center") return LossMode::fixed_center;
    throw ConfigError("unknown loss mode: " + name);
}

bool EarlyStopper::observe(double value) {
    ++epoch_;
    if (best_epoch_ < 0 || value > best_value_) {
        best_value_ = value;
        best_epoch_ = epoch_;
        non_improving_ = 0;
        improved_last_ = true;
        return false;
    }
    improved_last_ = false;
    ++non_improving_;
    return enabled_ && non_improving_ >= patience_ && patience_ >= 0;
}

void TrainConfig::validate() const {
    if (b_s < 1 || b_c < 1) throw ConfigError("TrainConfig: b_s and b_c must be >= 1");
    if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
    if (batches_per_epoch < 1) throw ConfigError("TrainConfig: batches_per_epoch must be >= 1");
    if (early_stopping.patience < 0) throw ConfigError("TrainConfig: patience must be >= 0");
    if (optimizer.lr < 0.0) throw ConfigError("TrainConfig: learning rate must be >= 0");
    augment.validate();
    window.validate();
    encoder.validate();
}

void to_json(nlohmann::json& j, const WindowSpec& spec) {
    j = nlohmann::json{{"context_length", spec.context_length},
                       {"suspect_length", spec.suspect_length},
                       {"stride", spec.stride}};
}

void from_json(const nlohmann::json& j, WindowSpec& spec) {
    spec = WindowSpec{};
    if (j.contains("context_length")) j.at("context_length").get_to(spec.context_length);
    if (j.contains("suspect_length")) j.at("suspect_length").get_to(spec.suspect_length);
    if (j.contains("stride")) j.at("stride").get_to(spec.stride);
}

void to_json(nlohmann::json& j, const AugmentConfig& config) {
    j = nlohmann::json{{"coe_rate", config.coe_rate},
                       {"mixup_rate", config.mixup_rate},
                       {"mixup_alpha", config.mixup_alpha},
                       {"po_count_per_series", config.po_count_per_series},
                       {"po_magnitude_lo", config.po_magnitude_lo},
                       {"po_magnitude_hi", config.po_magnitude_hi},
                       {"po_neighborhood", config.po_neighborhood}};
}

void from_json(const nlohmann::json& j, AugmentConfig& config) {
    config = AugmentConfig{};
    if (j.contains("coe_rate")) j.at("coe_rate").get_to(config.coe_rate);
    if (j.contains("mixup_rate")) j.at("mixup_rate").get_to(config.mixup_rate);
    if (j.contains("mixup_alpha")) j.at("mixup_alpha").get_to(config.mixup_alpha);
    if (j.contains("po_count_per_series")) j.at("po_count_per_series").get_to(config.po_count_per_series);
    if (j.contains("po_magnitude_lo")) j.at("po_magnitude_lo").get_to(config.po_magnitude_lo);
    if (j.contains("po_magnitude_hi")) j.at("po_magnitude_hi").get_to(config.po_magnitude_hi);
    if (j.contains("po_neighborhood")) j.at("po_neighborhood").get_to(config.po_neighborhood);
}

void to_json(nlohmann::json& j, const OptimizerConfig& config) {
    j = nlohmann::json{{"variant", to_string(config.variant)},
                       {"lr", config.lr},
                       {"beta1", config.beta1},
                       {"beta2", config.beta2},
                       {"eps", config.eps}};
}

void from_json(const nlohmann::json& j, OptimizerConfig& config) {
    config = OptimizerConfig{};
    if (j.contains("variant"))
        config.variant = optimizer_variant_from_string(j.at("variant").get<std::string>());
    if (j.contains("lr")) j.at("lr").get_to(config.lr);
    if (j.contains("beta1")) j.at("beta1").get_to(config.beta1);
    if (j.contains("beta2")) j.at("beta2").get_to(config.beta2);
    if (j.contains("eps")) j.at("eps").get_to(config.eps);
}

void to_json(nlohmann::json& j, const EarlyStoppingConfig& config) {
    j = nlohmann::json{{"enabled", config.enabled}, {"patience", config.patience}};
}

void from_json(const nlohmann::json& j, EarlyStoppingConfig& config) {
    config = EarlyStoppingConfig{};
    if (j.contains("enabled")) j.at("enabled").get_to(config.enabled);
    if (j.contains("patience")) j.at("patience").get_to(config.patience);
}

void to_json(nlohmann::json& j, const TrainConfig& config) {
    j = nlohmann::json{{"b_s", config.b_s},
                       {"b_c", config.b_c},
                       {"augment", config.augment},
                       {"epochs", config.epochs},
                       {"batches_per_epoch", config.batches_per_epoch},
                       {"optimizer", config.optimizer},
                       {"grad_clip_norm", config.grad_clip_norm},
                       {"seed", config.seed},
                       {"early_stopping", config.early_stopping},
                       {"distance", to_string(config.distance)},
                       {"loss_mode", to_string(config.loss_mode)},
                       {"window", config.window},
                       {"encoder", config.encoder},
                       {"standardize", config.standardize},
                       {"standardize_method", to_string(config.standardize_method)},
                       {"unlabeled", to_string(config.unlabeled)}};
}

void from_json(const nlohmann::json& j, TrainConfig& config) {
    config = TrainConfig{};
    if (j.contains("b_s")) j.at("b_s").get_to(config.b_s);
    if (j.contains("b_c")) j.at("b_c").get_to(config.b_c);
    if (j.contains("augment")) j.at("augment").get_to(config.augment);
    if (j.contains("epochs")) j.at("epochs").get_to(config.epochs);
    if (j.contains("batches_per_epoch")) j.at("batches_per_epoch").get_to(config.batches_per_epoch);
    if (j.contains("optimizer")) j.at("optimizer").get_to(config.optimizer);
    if (j.contains("grad_clip_norm")) j.at("grad_clip_norm").get_to(config.grad_clip_norm);
    if (j.contains("seed")) j.at("seed").get_to(config.seed);
    if (j.contains("early_stopping")) j.at("early_stopping").get_to(config.early_stopping);
    if (j.contains("distance"))
        config.distance = distance_kind_from_string(j.at("distance").get<std::string>());
    if (j.contains("loss_mode"))
        config.loss_mode = loss_mode_from_string(j.at("loss_mode").get<std::string>());
    if (j.contains("window")) j.at("window").get_to(config.window);
    if (j.contains("encoder")) config.encoder = j.at("encoder").get<EncoderConfig>();
    if (j.contains("standardize")) j.at("standardize").get_to(config.standardize);
    if (j.contains("standardize_method"))
        config.standardize_method =
            standardize_method_from_string(j.at("standardize_method").get<std::string>());
    if (j.contains("unlabeled"))
        config.unlabeled = unlabeled_policy_from_string(j.at("unlabeled").get<std::string>());
}

nlohmann::json train_report_to_json(const TrainReport& report) {
    nlohmann::json j{{"train_loss", report.train_loss},
                     {"epochs_run", report.epochs_run},
                     {"wall_clock_seconds", report.wall_clock_seconds},
                     {"seed", report.seed}};
    if (!report.validation_f1.empty()) {
        j["validation_f1"] = report.validation_f1;
        j["best_epoch"] = report.best_epoch;
        j["best_validation_f1"] = report.best_validation_f1;
    }
    return j;
}

std::vector<Window> assemble_batch(const Dataset& dataset, const TrainConfig& config, Rng& rng) {
    auto batch = random_crops(dataset, config.b_s, config.b_c, config.window, rng,
                              config.unlabeled);
    const std::vector<Window> base = batch;  // augmentation counts key off the base size
    if (config.augment.coe_rate > 0.0) {
        auto coe = coe_augment(base, config.augment.coe_rate, rng);
        batch.insert(batch.end(), std::make_move_iterator(coe.begin()),
                     std::make_move_iterator(coe.end()));
    }
    if (config.augment.mixup_rate > 0.0) {
        auto mixed = mixup_augment(base, config.augment.mixup_rate, config.augment.mixup_alpha, rng);
        batch.insert(batch.end(), std::make_move_iterator(mixed.begin()),
                     std::make_move_iterator(mixed.end()));
    }
    return batch;
}

std::vector<double> initial_center(const Dataset& dataset, const ParameterSet& params,
                                   const TrainConfig& config, Rng& rng) {
    autograd::NoGradGuard guard;
    auto crops = random_crops(dataset, config.b_s, config.b_c, config.window, rng,
                              config.unlabeled);
    auto z = encode_batch(windows_to_tensor(crops), params, config.encoder);
    const std::int64_t B = z.shape()[0], E = z.shape()[1];
    std::vector<double> center(static_cast<std::size_t>(E), 0.0);
    const auto values = z.values();
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t e = 0; e < E; ++e)
            center[static_cast<std::size_t>(e)] += values[static_cast<std::size_t>(b * E + e)];
    for (auto& c : center) c /= static_cast<double>(B);
    return center;
}

namespace {

std::string describe_batch(std::span<const Window> batch) {
    std::ostringstream out;
    out << batch.size() << " windows:";
    for (const auto& w : batch)
        out << " [" << w.series_id << " @" << w.start << " y=" << w.label << "]";
    return out.str();
}

double step_on_batch(ParameterSet& params, Optimizer& optimizer,
                     const std::vector<Window>& batch, const TrainConfig& config,
                     const std::vector<double>* center) {
    auto x = windows_to_tensor(batch);
    std::vector<double> labels, mask;
    labels.reserve(batch.size());
    std::int64_t active = 0;
    for (const auto& w : batch) {
        labels.push_back(w.label);
        mask.push_back(w.skip_in_loss ? 0.0 : 1.0);
        active += !w.skip_in_loss;
    }
    if (active == 0) throw DataError("train_epoch: every window in the batch is excluded from the loss");
    auto y = Tensor::from_values({static_cast<std::int64_t>(batch.size())}, std::move(labels));

    auto z = encode_batch(x, params, config.encoder);
    Tensor losses;
    if (center) {
        losses = hsc_losses(z, y, *center);
    } else {
        auto xc = windows_to_tensor(batch, config.window.context_length);
        auto zc = encode_batch(xc, params, config.encoder);
        losses = contextual_hsc_losses(z, zc, y, config.distance);
    }
    Tensor loss;
    if (active == std::ssize(batch)) {
        loss = mean_all(losses);
    } else {
        auto m = Tensor::from_values({static_cast<std::int64_t>(batch.size())}, std::move(mask));
        loss = scale(sum_all(mul(losses, m)), 1.0 / static_cast<double>(active));
    }
    const double value = loss.item();

    params.zero_grad();
    backward(loss);
    if (config.grad_clip_norm > 0.0) clip_grad_norm(params, config.grad_clip_norm);
    optimizer.step(params);
    return value;
}

}  // namespace

double train_epoch(ParameterSet& params, Optimizer& optimizer, const Dataset& dataset,
                   const TrainConfig& config, Rng& rng, const std::vector<double>* center) {
    config.validate();
    double total = 0.0;
    for (std::int64_t step = 0; step < config.batches_per_epoch; ++step) {
        auto batch = assemble_batch(dataset, config, rng);
        try {
            total += step_on_batch(params, optimizer, batch, config, center);
        } catch (const NumericError& e) {
            throw NumericError("train_epoch: step " + std::to_string(step) + ": " + e.what() +
                               "; batch " + describe_batch(batch));
        }
    }
    return total / static_cast<double>(config.batches_per_epoch);
}

FitResult fit(const Dataset& train_in, const Dataset* validation_in, const TrainConfig& config) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const Rng root(config.seed);

    Dataset train = train_in;
    std::optional<Dataset> validation;
    if (validation_in) validation = *validation_in;

    std::optional<StandardizationStats> stats;
    if (config.standardize) {
        stats = fit_standardizer(train, config.standardize_method);
        for (auto& s : train.series) s = standardize(s, *stats);
        if (validation)
            for (auto& s : validation->series) s = standardize(s, *stats);
    }
    if (config.augment.po_count_per_series > 0) {
        Rng po_rng = root.fork(2);
        for (auto& s : train.series) s = inject_point_outliers(s, config.augment, po_rng);
    }

    Rng init_rng = root.fork(1);
    ParameterSet params = init_encoder_params(config.encoder, init_rng);
    Optimizer optimizer(config.optimizer);

    std::vector<double> center;
    if (config.loss_mode == LossMode::fixed_center) {
        Rng center_rng = root.fork(3);
        center = initial_center(train, params, config, center_rng);
    }

    // Validation steers training only when both classes are present.
    bool has_validation = false;
    if (validation) {
        bool any_pos = false, any_neg = false;
        for (const auto& s : validation->series) {
            for (auto l : s.labels) {
                any_pos |= l == LabelState::Anomalous;
                any_neg |= l == LabelState::Normal;
            }
        }
        has_validation = any_pos && any_neg;
    }

    TrainReport report;
    report.seed = config.seed;
    ParameterSet best_params;
    EarlyStopper stopper(config.early_stopping.enabled, config.early_stopping.patience);

    for (std::int64_t e = 0; e < config.epochs; ++e) {
        Rng epoch_rng = root.fork(100 + static_cast<std::uint64_t>(e));
        const double loss = train_epoch(params, optimizer, train, config, epoch_rng,
                                        center.empty() ? nullptr : &center);
        report.train_loss.push_back(loss);
        report.epochs_run = e + 1;
        if (!has_validation) continue;

        // Fixed-center models are validated by their own scoring rule.
        RollingScoreOptions score_options;
        score_options.center = center;
        std::vector<ScoreTrace> traces;
        traces.reserve(validation->series.size());
        for (const auto& s : validation->series)
            traces.push_back(rolling_score(s, config.window, params, config.encoder,
                                           config.distance, score_options));
        const auto choice = select_threshold(traces, validation->series, EvalMode::adjusted);
        report.validation_f1.push_back(choice.result.f1);
        const bool stop = stopper.observe(choice.result.f1);
        if (stopper.improved_last()) best_params = params.clone();
        if (stop) break;
    }

    FitResult out;
    if (has_validation && stopper.best_epoch() > 0) {
        out.params = std::move(best_params);
        report.best_epoch = stopper.best_epoch();
        report.best_validation_f1 = stopper.best_value();
    } else {
        out.params = std::move(params);
    }
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.report = std::move(report);
    out.stats = std::move(stats);
    out.center = std::move(center);
    return out;
}

namespace {

struct SweepCounts {
    std::int64_t tp_adj = 0, tp_pw = 0, fp = 0;
};

double f1_of(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
    const double p = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double r = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

}  // namespace

ThresholdChoice select_threshold(std::span<const ScoreTrace> traces,
                                 std::span<const TimeSeries> series, EvalMode mode) {
    // Pooled per-segment stats and per-point score pools, mask-aware.
    struct Segment {
        std::int64_t length;
        double max_score;
    };
    std::vector<Segment> segments;
    std::vector<double> nominal, anomalous, all_scores;
    std::int64_t total_anom = 0;

    std::unordered_map<std::string, const ScoreTrace*> by_id;
    for (const auto& trace : traces) {
        if (!by_id.emplace(trace.series_id, &trace).second)
            throw DataError("select_threshold: duplicate trace for series " + trace.series_id);
    }
    for (const auto& s : series) {
        const bool has_labels =
            std::any_of(s.labels.begin(), s.labels.end(),
                        [](LabelState l) { return l != LabelState::Unlabeled; });
        const auto it = by_id.find(s.id);
        if (it == by_id.end()) {
            if (has_labels)
                throw DataError("select_threshold: no trace for labeled series " + s.id);
            continue;
        }
        for (const auto& stretch : masked_stretches(*it->second, s)) {
            std::size_t i = 0;
            while (i < stretch.y_true.size()) {
                if (!stretch.y_true[i]) {
                    nominal.push_back(stretch.scores[i]);
                    all_scores.push_back(stretch.scores[i]);
                    ++i;
                    continue;
                }
                Segment seg{0, stretch.scores[i]};
                while (i < stretch.y_true.size() && stretch.y_true[i]) {
                    seg.max_score = std::max(seg.max_score, stretch.scores[i]);
                    anomalous.push_back(stretch.scores[i]);
                    all_scores.push_back(stretch.scores[i]);
                    ++seg.length;
                    ++i;
                }
                total_anom += seg.length;
                segments.push_back(seg);
            }
        }
    }
    if (total_anom == 0 || nominal.empty())
        throw DataError("select_threshold: need at least one anomalous and one nominal timestep");

    // Candidates, descending: all-negative sentinel at the max score, the
    // midpoints between consecutive unique scores, all-positive sentinel
    // below the min.
    std::sort(all_scores.begin(), all_scores.end());
    all_scores.erase(std::unique(all_scores.begin(), all_scores.end()), all_scores.end());
    std::vector<double> candidates;
    candidates.push_back(all_scores.back());
    for (std::size_t i = all_scores.size(); i-- > 1;)
        candidates.push_back(0.5 * (all_scores[i - 1] + all_scores[i]));
    candidates.push_back(all_scores.front() - 1.0);

    // One descending sweep; each pool is consumed front-to-back as the
    // threshold drops past its scores.
    std::sort(segments.begin(), segments.end(),
              [](const Segment& a, const Segment& b) { return a.max_score > b.max_score; });
    std::sort(nominal.begin(), nominal.end(), std::greater<>());
    std::sort(anomalous.begin(), anomalous.end(), std::greater<>());

    SweepCounts counts;
    std::size_t si = 0, ni = 0, ai = 0;
    bool have_best = false;
    double best_primary = -1.0, best_secondary = -1.0, best_threshold = 0.0;
    SweepCounts best_counts;

    for (const double t : candidates) {
        while (si < segments.size() && segments[si].max_score > t)
            counts.tp_adj += segments[si++].length;
        while (ai < anomalous.size() && anomalous[ai] > t) ++ai;
        counts.tp_pw = static_cast<std::int64_t>(ai);
        while (ni < nominal.size() && nominal[ni] > t) ++ni;
        counts.fp = static_cast<std::int64_t>(ni);

        const double f1_adj = f1_of(counts.tp_adj, counts.fp, total_anom - counts.tp_adj);
        const double f1_pw = f1_of(counts.tp_pw, counts.fp, total_anom - counts.tp_pw);
        const double primary = mode == EvalMode::adjusted ? f1_adj : f1_pw;
        // Ties prefer tighter pointwise localization, then the larger
        // threshold (earlier in the descending order).
        if (!have_best || primary > best_primary ||
            (primary == best_primary && f1_pw > best_secondary)) {
            have_best = true;
            best_primary = primary;
            best_secondary = f1_pw;
            best_threshold = t;
            best_counts = counts;
        }
    }

    ThresholdChoice choice;
    choice.threshold = best_threshold;
    choice.result.mode = mode;
    choice.result.threshold = best_threshold;
    choice.result.tp = mode == EvalMode::adjusted ? best_counts.tp_adj : best_counts.tp_pw;
    choice.result.fp = best_counts.fp;
    choice.result.fn = total_anom - choice.result.tp;
    if (choice.result.tp + choice.result.fp > 0)
        choice.result.precision = static_cast<double>(choice.result.tp) /
                                  static_cast<double>(choice.result.tp + choice.result.fp);
    if (choice.result.tp + choice.result.fn > 0)
        choice.result.recall = static_cast<double>(choice.result.tp) /
                               static_cast<double>(choice.result.tp + choice.result.fn);
    if (choice.result.precision + choice.result.recall > 0.0)
        choice.result.f1 = 2.0 * choice.result.precision * choice.result.recall /
                           (choice.result.precision + choice.result.recall);
    return choice;
}

}  // namespace ncad
