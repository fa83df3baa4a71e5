#pragma once

#include "toxedge/tensor.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace toxedge {

struct ConvSpec {
    std::size_t channels = 0;
    std::size_t kernel = 0;
    std::size_t stride = 0;

    bool operator==(const ConvSpec&) const = default;
};

// Architecture hyperparameters. Vocabulary index 0 is the CTC blank.
struct ModelConfig {
    std::string preset = "custom";
    std::vector<ConvSpec> conv_layers;
    std::size_t hidden_dim = 0;
    std::size_t num_layers = 0;
    std::size_t num_heads = 0;
    std::size_t ffn_dim = 0;
    std::size_t vocab_size = 0;
    std::size_t num_classes = 2;

    static ModelConfig base_mirror();
    static ModelConfig tiny();
    static ModelConfig preset_named(const std::string& name);

    // Throws ErrorKind::Config on violated invariants.
    void validate() const;

    std::size_t feature_dim() const { return conv_layers.empty() ? 0 : conv_layers.back().channels; }
    std::size_t head_dim() const { return hidden_dim / num_heads; }

    // Frames produced for `samples` input samples; throws InputTooShort.
    std::size_t frame_count(std::size_t samples) const;
    // Shortest input that yields one output frame.
    std::size_t min_samples() const;

    bool operator==(const ModelConfig&) const = default;
};

struct TensorSpec {
    std::string name;
    Shape shape;
};

// Every parameter tensor implied by `cfg`, in forward order.
std::vector<TensorSpec> parameter_inventory(const ModelConfig& cfg);

// Closed form:
//   conv:  sum_i c_i * (c_{i-1} * k_i + 1)              with c_0 = 1
//   proj:  c_7 * d + d
//   layer: 4 * (d*d + d) + 2 * d * f + f + d + 4 * d    (attention, ffn, two norms)
//   classifier d*C + C, ctc head d*V + V
std::size_t analytic_parameter_count(const ModelConfig& cfg);

bool is_encoder_tensor(const std::string& name);
bool is_weight_tensor(const std::string& name);

} // namespace toxedge
