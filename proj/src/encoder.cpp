#include "ncad/encoder.hpp"

#include <cmath>

namespace ncad {

void EncoderConfig::validate() const {
    if (input_channels < 1) throw ConfigError("encoder: input_channels must be >= 1");
    if (num_blocks < 1) throw ConfigError("encoder: num_blocks must be >= 1");
    if (kernel_size < 2) throw ConfigError("encoder: kernel_size must be >= 2");
    if (hidden_channels < 1) throw ConfigError("encoder: hidden_channels must be >= 1");
    if (embedding_dim < 1) throw ConfigError("encoder: embedding_dim must be >= 1");
    if (!(leaky_relu_slope > 0.0 && leaky_relu_slope < 1.0)) {
        throw ConfigError("encoder: leaky_relu_slope must lie in (0,1)");
    }
}

void to_json(nlohmann::json& j, const EncoderConfig& cfg) {
    j = nlohmann::json{{"input_channels", cfg.input_channels},
                       {"num_blocks", cfg.num_blocks},
                       {"kernel_size", cfg.kernel_size},
                       {"hidden_channels", cfg.hidden_channels},
                       {"embedding_dim", cfg.embedding_dim},
                       {"leaky_relu_slope", cfg.leaky_relu_slope}};
}

void from_json(const nlohmann::json& j, EncoderConfig& cfg) {
    EncoderConfig defaults;
    cfg.input_channels = j.value("input_channels", defaults.input_channels);
    cfg.num_blocks = j.value("num_blocks", defaults.num_blocks);
    cfg.kernel_size = j.value("kernel_size", defaults.kernel_size);
    cfg.hidden_channels = j.value("hidden_channels", defaults.hidden_channels);
    cfg.embedding_dim = j.value("embedding_dim", defaults.embedding_dim);
    cfg.leaky_relu_slope = j.value("leaky_relu_slope", defaults.leaky_relu_slope);
}

std::int64_t receptive_field(const EncoderConfig& cfg) {
    return 1 + 2 * (cfg.kernel_size - 1) * ((std::int64_t{1} << cfg.num_blocks) - 1);
}

std::optional<std::string> receptive_field_warning(const EncoderConfig& cfg,
                                                   const WindowSpec& spec) {
    const auto rf = receptive_field(cfg);
    if (rf >= spec.total()) return std::nullopt;
    return "receptive field " + std::to_string(rf) + " is smaller than the window length " +
           std::to_string(spec.total()) + "; the encoder cannot see the whole context";
}

namespace {

std::string block_prefix(std::int64_t l) { return "block" + std::to_string(l) + "."; }

}  // namespace

ParameterSet init_encoder_params(const EncoderConfig& cfg, Rng& rng) {
    cfg.validate();
    ParameterSet ps;
    std::int64_t in_ch = cfg.input_channels;
    for (std::int64_t l = 0; l < cfg.num_blocks; ++l) {
        const auto prefix = block_prefix(l);
        auto w1 = Tensor::zeros({cfg.hidden_channels, in_ch, cfg.kernel_size});
        init_uniform_fanin(w1, in_ch * cfg.kernel_size, rng);
        ps.add(prefix + "conv1.w", std::move(w1));
        ps.add(prefix + "conv1.b", Tensor::zeros({cfg.hidden_channels}));

        auto w2 = Tensor::zeros({cfg.hidden_channels, cfg.hidden_channels, cfg.kernel_size});
        init_uniform_fanin(w2, cfg.hidden_channels * cfg.kernel_size, rng);
        ps.add(prefix + "conv2.w", std::move(w2));
        ps.add(prefix + "conv2.b", Tensor::zeros({cfg.hidden_channels}));

        if (in_ch != cfg.hidden_channels) {
            auto ws = Tensor::zeros({cfg.hidden_channels, in_ch, 1});
            init_uniform_fanin(ws, in_ch, rng);
            ps.add(prefix + "skip.w", std::move(ws));
            ps.add(prefix + "skip.b", Tensor::zeros({cfg.hidden_channels}));
        }
        in_ch = cfg.hidden_channels;
    }
    auto wp = Tensor::zeros({cfg.embedding_dim, cfg.hidden_channels});
    init_uniform_fanin(wp, cfg.hidden_channels, rng);
    ps.add("proj.w", std::move(wp));
    ps.add("proj.b", Tensor::zeros({cfg.embedding_dim}));
    return ps;
}

Tensor encode_features(const Tensor& x, const ParameterSet& params, const EncoderConfig& cfg) {
    cfg.validate();
    if (x.shape().size() != 3) {
        throw ConfigError("encoder input must be [batch, channels, time], got " +
                          shape_str(x.shape()));
    }
    if (x.dim(1) != cfg.input_channels) {
        throw DataError("encoder configured for " + std::to_string(cfg.input_channels) +
                        " channels, input has " + std::to_string(x.dim(1)));
    }

    Tensor h = x;
    std::int64_t in_ch = cfg.input_channels;
    for (std::int64_t l = 0; l < cfg.num_blocks; ++l) {
        const auto prefix = block_prefix(l);
        const auto dilation = std::int64_t{1} << l;
        auto y = leaky_relu(conv1d_causal(h, params.at(prefix + "conv1.w"),
                                          params.at(prefix + "conv1.b"), dilation),
                            cfg.leaky_relu_slope);
        y = leaky_relu(conv1d_causal(y, params.at(prefix + "conv2.w"),
                                     params.at(prefix + "conv2.b"), dilation),
                       cfg.leaky_relu_slope);
        Tensor skip = h;
        if (in_ch != cfg.hidden_channels) {
            skip = conv1d_causal(h, params.at(prefix + "skip.w"), params.at(prefix + "skip.b"), 1);
        }
        h = add(y, skip);
        in_ch = cfg.hidden_channels;
    }
    return h;
}

Tensor encode_batch(const Tensor& x, const ParameterSet& params, const EncoderConfig& cfg) {
    auto pooled = max_pool_time(encode_features(x, params, cfg));
    auto projected = linear(pooled, params.at("proj.w"), params.at("proj.b"));
    return l2_normalize_rows(projected);
}

Tensor windows_to_tensor(std::span<const Window> windows, std::int64_t take_prefix) {
    if (windows.empty()) throw ConfigError("windows_to_tensor: empty batch");
    const auto L = take_prefix < 0 ? windows.front().length : take_prefix;
    const auto D = windows.front().channels;
    if (L < 1) throw ConfigError("windows_to_tensor: empty prefix");
    const auto B = static_cast<std::int64_t>(windows.size());
    std::vector<double> buf(static_cast<std::size_t>(B * D * L));
    for (std::int64_t b = 0; b < B; ++b) {
        const auto& w = windows[static_cast<std::size_t>(b)];
        if (w.channels != D || w.length < L) {
            throw ConfigError("windows_to_tensor: batch windows disagree in shape");
        }
        for (std::int64_t d = 0; d < D; ++d)
            for (std::int64_t t = 0; t < L; ++t)
                buf[static_cast<std::size_t>((b * D + d) * L + t)] = w.at(t, d);
    }
    return Tensor::from_values({B, D, L}, std::move(buf));
}

std::vector<double> encode(const std::vector<double>& values, std::int64_t channels,
                           const ParameterSet& params, const EncoderConfig& cfg) {
    if (channels < 1 || values.size() % static_cast<std::size_t>(channels) != 0) {
        throw DataError("encode: value count not divisible by channel count");
    }
    const auto T = static_cast<std::int64_t>(values.size()) / channels;
    std::vector<double> buf(values.size());
    for (std::int64_t d = 0; d < channels; ++d)
        for (std::int64_t t = 0; t < T; ++t)
            buf[static_cast<std::size_t>(d * T + t)] = values[static_cast<std::size_t>(t * channels + d)];

    autograd::NoGradGuard guard;
    auto emb = encode_batch(Tensor::from_values({1, channels, T}, std::move(buf)), params, cfg);
    return {emb.values().begin(), emb.values().end()};
}

}  // namespace ncad
