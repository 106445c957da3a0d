#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "ncad/optim.hpp"
#include "ncad/series.hpp"
#include "ncad/tensor.hpp"

namespace ncad {

// Dilated causal TCN: residual blocks (block l at dilation 2^l), adaptive max
// pooling over time, a linear projection, and L2 normalization onto the unit
// sphere. One parameter set serves inputs of any length, so the full window
// and the bare context share the encoder.
struct EncoderConfig {
    std::int64_t input_channels = 1;  // D
    std::int64_t num_blocks = 4;
    std::int64_t kernel_size = 3;
    std::int64_t hidden_channels = 32;
    std::int64_t embedding_dim = 64;  // E
    double leaky_relu_slope = 0.01;

    void validate() const;
};

void to_json(nlohmann::json& j, const EncoderConfig& cfg);
void from_json(const nlohmann::json& j, EncoderConfig& cfg);

// 1 + 2*(k-1)*(2^num_blocks - 1): two convs per block, dilation doubling.
std::int64_t receptive_field(const EncoderConfig& cfg);

// Warning text when the receptive field cannot cover a full window.
std::optional<std::string> receptive_field_warning(const EncoderConfig& cfg,
                                                   const WindowSpec& spec);

ParameterSet init_encoder_params(const EncoderConfig& cfg, Rng& rng);

// x: [B, D, T] -> pre-pooling features [B, hidden, T].
Tensor encode_features(const Tensor& x, const ParameterSet& params, const EncoderConfig& cfg);

// x: [B, D, T] -> unit-norm embeddings [B, E].
Tensor encode_batch(const Tensor& x, const ParameterSet& params, const EncoderConfig& cfg);

// Windows are stored time-major (L x D rows); the encoder wants channel-major
// planes. take_prefix < 0 keeps the full window, otherwise only rows
// [0, take_prefix) (the context) are packed.
Tensor windows_to_tensor(std::span<const Window> windows, std::int64_t take_prefix = -1);

// Single-series convenience: values are T' x D row-major. Runs without autograd.
std::vector<double> encode(const std::vector<double>& values, std::int64_t channels,
                           const ParameterSet& params, const EncoderConfig& cfg);

}  // namespace ncad
