#include "toxedge/model.hpp"

#include "toxedge/compress.hpp"
#include "toxedge/error.hpp"
#include "toxedge/kernels.hpp"

#include <cmath>

namespace toxedge {

namespace {

const Tensor& bias_of(const Checkpoint& ckpt, const std::string& name) { return ckpt.f32(name); }

// Multi-head scaled dot-product attention over pre-projected q, k, v [T x d].
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads, std::size_t layer,
                 const AttentionObserver& observer) {
    const std::size_t frames = q.dim(0), d = q.dim(1), dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Tensor context({frames, d});
    Tensor weights({frames, frames});
    std::vector<double> scores(frames);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * dh;
        for (std::size_t i = 0; i < frames; ++i) {
            const float* qi = q.data() + i * d + off;
            for (std::size_t j = 0; j < frames; ++j) {
                const float* kj = k.data() + j * d + off;
                double s = 0.0;
                for (std::size_t c = 0; c < dh; ++c) s += static_cast<double>(qi[c]) * kj[c];
                scores[j] = s * scale;
            }
            const std::vector<double> p = softmax_t(scores, 1.0);
            for (std::size_t j = 0; j < frames; ++j) weights[i * frames + j] = static_cast<float>(p[j]);
            float* out = context.data() + i * d + off;
            for (std::size_t c = 0; c < dh; ++c) {
                double acc = 0.0;
                for (std::size_t j = 0; j < frames; ++j) acc += p[j] * v[j * d + off + c];
                out[c] = static_cast<float>(acc);
            }
        }
        if (observer) observer(layer, h, weights);
    }
    return context;
}

void add_inplace(Tensor& x, const Tensor& y) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
}

Tensor transformer_layer(const Tensor& x, const Checkpoint& p, std::size_t layer, const AttentionObserver& observer) {
    const std::string pre = "layers." + std::to_string(layer) + ".";
    Tensor out = x;

    const Tensor a = layer_norm(x, p.f32(pre + "ln1.gamma"), p.f32(pre + "ln1.beta"));
    const Tensor q = apply_linear(a, p, pre + "attn.q.weight", pre + "attn.q.bias");
    const Tensor k = apply_linear(a, p, pre + "attn.k.weight", pre + "attn.k.bias");
    const Tensor v = apply_linear(a, p, pre + "attn.v.weight", pre + "attn.v.bias");
    const Tensor ctx = attention(q, k, v, p.config.num_heads, layer, observer);
    add_inplace(out, apply_linear(ctx, p, pre + "attn.o.weight", pre + "attn.o.bias"));

    const Tensor b = layer_norm(out, p.f32(pre + "ln2.gamma"), p.f32(pre + "ln2.beta"));
    Tensor hidden = apply_linear(b, p, pre + "ffn.in.weight", pre + "ffn.in.bias");
    gelu_inplace(hidden);
    add_inplace(out, apply_linear(hidden, p, pre + "ffn.out.weight", pre + "ffn.out.bias"));
    require_finite(out, "transformer layer");
    return out;
}

// Runs the stack; when capture_after > 0 also returns the residual stream
// after that layer.
Tensor run_encoder(const Tensor& features, const Checkpoint& p, const EncodeOptions& options,
                   std::size_t capture_after, Tensor* captured) {
    const ModelConfig& cfg = p.config;
    if (features.rank() != 2 || features.dim(1) != cfg.feature_dim()) {
        fail(ErrorKind::Shape, "encoder expects [T x " + std::to_string(cfg.feature_dim()) + "] features, got " +
                                   shape_string(features.shape()));
    }
    Tensor x = apply_linear(features, p, "proj.weight", "proj.bias");
    add_inplace(x, positional_encoding(x.dim(0), cfg.hidden_dim));

    std::size_t layers = cfg.num_layers;
    if (options.max_layers > 0) {
        if (options.max_layers > layers) {
            fail(ErrorKind::Config, "requested " + std::to_string(options.max_layers) + " layers of " +
                                        std::to_string(layers));
        }
        layers = options.max_layers;
    }
    for (std::size_t l = 0; l < layers; ++l) {
        x = transformer_layer(x, p, l, options.observer);
        if (captured && capture_after == l + 1) *captured = x;
    }
    return x;
}

} // namespace

Tensor apply_linear(const Tensor& x, const Checkpoint& ckpt, const std::string& weight_name,
                    const std::string& bias_name) {
    const StoredTensor& w = ckpt.at(weight_name);
    const Tensor& b = bias_of(ckpt, bias_name);
    if (const auto* f = std::get_if<Tensor>(&w)) return linear(x, *f, b);
    return quantized_linear(x, std::get<QTensor>(w), b);
}

Tensor positional_encoding(std::size_t frames, std::size_t dim) {
    Tensor pe({frames, dim});
    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t i = 0; i < dim; i += 2) {
            const double angle = static_cast<double>(t) / std::pow(10000.0, static_cast<double>(i) / dim);
            pe[t * dim + i] = static_cast<float>(std::sin(angle));
            if (i + 1 < dim) pe[t * dim + i + 1] = static_cast<float>(std::cos(angle));
        }
    }
    return pe;
}

Tensor feature_extract(const Waveform& w, const Checkpoint& params) {
    const ModelConfig& cfg = params.config;
    const std::size_t min_len = cfg.min_samples();
    if (w.samples.size() < min_len) {
        fail(ErrorKind::InputTooShort, "waveform has " + std::to_string(w.samples.size()) +
                                           " samples; the conv stack needs at least " + std::to_string(min_len));
    }
    Tensor x({1, w.samples.size()}, std::span<const float>(w.samples));
    for (std::size_t i = 0; i < cfg.conv_layers.size(); ++i) {
        const std::string pre = "conv." + std::to_string(i) + ".";
        const Tensor cols = im2col(x, cfg.conv_layers[i].kernel, cfg.conv_layers[i].stride);
        Tensor y = apply_linear(cols, params, pre + "weight", pre + "bias"); // [L_out x c_out]
        gelu_inplace(y);
        x = (i + 1 == cfg.conv_layers.size()) ? std::move(y) : transpose(y);
    }
    return x;
}

HiddenStates encode(const Tensor& features, const Checkpoint& params, const EncodeOptions& options) {
    return {run_encoder(features, params, options, 0, nullptr)};
}

Tensor pooled_embedding(const HiddenStates& h) { return mean_pool(h.frames); }

std::array<float, 2> classify_pooled(const Tensor& pooled, const Checkpoint& params) {
    const Tensor logits = apply_linear(pooled.reshaped({1, pooled.size()}), params, "cls.weight", "cls.bias");
    return {logits[0], logits[1]};
}

std::array<float, 2> classify(const HiddenStates& h, const Checkpoint& params) {
    return classify_pooled(pooled_embedding(h), params);
}

Tensor ctc_logits(const HiddenStates& h, const Checkpoint& params) {
    return apply_linear(h.frames, params, "ctc.weight", "ctc.bias");
}

Embedding embed(const Waveform& w, const Checkpoint& params, const ForwardOptions& options) {
    const std::size_t layers = params.config.num_layers;
    if (options.pool_layer > layers) {
        fail(ErrorKind::Config, "pool layer " + std::to_string(options.pool_layer) + " exceeds " +
                                    std::to_string(layers) + " layers");
    }
    const Tensor features = feature_extract(w, params);
    Tensor captured;
    const bool early = options.pool_layer > 0 && options.pool_layer < layers;
    Embedding e;
    e.hidden.frames = run_encoder(features, params, {}, early ? options.pool_layer : 0, early ? &captured : nullptr);
    e.pooled = early ? mean_pool(captured) : pooled_embedding(e.hidden);
    return e;
}

ForwardResult forward(const Waveform& w, const Checkpoint& params, const ForwardOptions& options) {
    Embedding e = embed(w, params, options);
    ForwardResult r;
    r.toxicity_logits = classify_pooled(e.pooled, params);
    r.ctc_logits = ctc_logits(e.hidden, params);
    r.pooled = std::move(e.pooled);
    return r;
}

} // namespace toxedge
