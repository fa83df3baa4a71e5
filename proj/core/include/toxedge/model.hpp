#pragma once

#include "toxedge/audio.hpp"
#include "toxedge/checkpoint.hpp"
#include "toxedge/config.hpp"
#include "toxedge/tensor.hpp"

#include <array>
#include <cstddef>
#include <functional>

namespace toxedge {

struct HiddenStates {
    Tensor frames; // [T x d], residual stream after the last layer
};

// Receives every attention probability matrix [T x T] during encode().
using AttentionObserver = std::function<void(std::size_t layer, std::size_t head, const Tensor& weights)>;

struct EncodeOptions {
    // Run only the first `max_layers` transformer layers (0 = all).
    std::size_t max_layers = 0;
    AttentionObserver observer;
};

// y = x * W^T + b, dispatching on the stored dtype of `weight_name`.
Tensor apply_linear(const Tensor& x, const Checkpoint& ckpt, const std::string& weight_name,
                    const std::string& bias_name);

// Conv frontend over raw samples; GELU after every layer. Returns [T x c].
Tensor feature_extract(const Waveform& w, const Checkpoint& params);

// Input projection + sinusoidal positions + pre-norm transformer stack.
// The stack is not followed by a norm, so zero layers give proj + positions.
HiddenStates encode(const Tensor& features, const Checkpoint& params, const EncodeOptions& options = {});

// Sinusoidal absolute position table [T x d].
Tensor positional_encoding(std::size_t frames, std::size_t dim);

// Mean over frames, then the d -> 2 classifier. Index 1 is toxic.
std::array<float, 2> classify(const HiddenStates& h, const Checkpoint& params);
Tensor pooled_embedding(const HiddenStates& h);
std::array<float, 2> classify_pooled(const Tensor& pooled, const Checkpoint& params);

// Per-frame d -> V logits, no softmax. [T x V].
Tensor ctc_logits(const HiddenStates& h, const Checkpoint& params);

struct ForwardOptions {
    // Pool the classifier input after this transformer layer (1-based,
    // 0 = last). The CTC head always reads the last layer.
    std::size_t pool_layer = 0;
};

struct ForwardResult {
    std::array<float, 2> toxicity_logits{};
    Tensor ctc_logits;
    Tensor pooled; // classifier input, [d]
};

struct Embedding {
    HiddenStates hidden; // last layer, feeds the CTC head
    Tensor pooled;       // classifier input, [d]
};

// Conv frontend and encoder, with pooling taken at `options.pool_layer`.
Embedding embed(const Waveform& w, const Checkpoint& params, const ForwardOptions& options = {});

// One shared encoder pass feeding both heads.
ForwardResult forward(const Waveform& w, const Checkpoint& params, const ForwardOptions& options = {});

} // namespace toxedge
