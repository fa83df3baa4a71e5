#include "toxedge/config.hpp"

#include "toxedge/error.hpp"
#include "toxedge/kernels.hpp"

namespace toxedge {

namespace {

std::vector<ConvSpec> wav2vec2_frontend(std::size_t channels) {
    const std::size_t kernels[] = {10, 3, 3, 3, 3, 2, 2};
    const std::size_t strides[] = {5, 2, 2, 2, 2, 2, 2};
    std::vector<ConvSpec> layers;
    for (int i = 0; i < 7; ++i) layers.push_back({channels, kernels[i], strides[i]});
    return layers;
}

bool starts_with(const std::string& s, const char* prefix) { return s.rfind(prefix, 0) == 0; }

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

} // namespace

ModelConfig ModelConfig::base_mirror() {
    ModelConfig cfg;
    cfg.preset = "base-mirror";
    cfg.conv_layers = wav2vec2_frontend(512);
    cfg.hidden_dim = 768;
    cfg.num_layers = 12;
    cfg.num_heads = 8;
    cfg.ffn_dim = 3072;
    cfg.vocab_size = 32;
    return cfg;
}

ModelConfig ModelConfig::tiny() {
    ModelConfig cfg;
    cfg.preset = "tiny";
    cfg.conv_layers = wav2vec2_frontend(32);
    cfg.hidden_dim = 64;
    cfg.num_layers = 4;
    cfg.num_heads = 4;
    cfg.ffn_dim = 128;
    cfg.vocab_size = 8;
    return cfg;
}

ModelConfig ModelConfig::preset_named(const std::string& name) {
    if (name == "base-mirror") return base_mirror();
    if (name == "tiny") return tiny();
    fail(ErrorKind::Config, "unknown preset '" + name + "' (expected tiny or base-mirror)");
}

void ModelConfig::validate() const {
    auto bad = [](const std::string& msg) { fail(ErrorKind::Config, "invalid model config: " + msg); };
    if (conv_layers.empty()) bad("no conv layers");
    if (preset == "base-mirror" && conv_layers.size() != 7) bad("base-mirror needs exactly 7 conv layers");
    for (const ConvSpec& c : conv_layers) {
        if (c.channels == 0 || c.kernel == 0 || c.stride == 0) bad("conv layer with zero size");
    }
    if (hidden_dim == 0 || num_heads == 0 || ffn_dim == 0) bad("zero hidden/head/ffn size");
    if (hidden_dim % num_heads != 0) bad("hidden_dim not divisible by num_heads");
    if (num_layers < 1) bad("num_layers must be >= 1");
    if (vocab_size < 2) bad("vocab_size must be >= 2");
    if (num_classes != 2) bad("num_classes must be 2");
}

std::size_t ModelConfig::frame_count(std::size_t samples) const {
    std::size_t len = samples;
    for (const ConvSpec& c : conv_layers) {
        if (c.kernel > len) {
            fail(ErrorKind::InputTooShort, "input of " + std::to_string(samples) +
                                               " samples is shorter than the receptive field; need at least " +
                                               std::to_string(min_samples()));
        }
        len = conv_output_length(len, c.kernel, c.stride);
    }
    return len;
}

std::size_t ModelConfig::min_samples() const {
    std::size_t need = 1;
    for (auto it = conv_layers.rbegin(); it != conv_layers.rend(); ++it) {
        need = (need - 1) * it->stride + it->kernel;
    }
    return need;
}

std::vector<TensorSpec> parameter_inventory(const ModelConfig& cfg) {
    std::vector<TensorSpec> specs;
    std::size_t in_ch = 1;
    for (std::size_t i = 0; i < cfg.conv_layers.size(); ++i) {
        const ConvSpec& c = cfg.conv_layers[i];
        const std::string p = "conv." + std::to_string(i) + ".";
        specs.push_back({p + "weight", {c.channels, in_ch, c.kernel}});
        specs.push_back({p + "bias", {c.channels}});
        in_ch = c.channels;
    }
    const std::size_t d = cfg.hidden_dim, f = cfg.ffn_dim;
    specs.push_back({"proj.weight", {d, in_ch}});
    specs.push_back({"proj.bias", {d}});
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        const std::string p = "layers." + std::to_string(l) + ".";
        specs.push_back({p + "ln1.gamma", {d}});
        specs.push_back({p + "ln1.beta", {d}});
        for (const char* m : {"q", "k", "v", "o"}) {
            specs.push_back({p + "attn." + m + ".weight", {d, d}});
            specs.push_back({p + "attn." + m + ".bias", {d}});
        }
        specs.push_back({p + "ln2.gamma", {d}});
        specs.push_back({p + "ln2.beta", {d}});
        specs.push_back({p + "ffn.in.weight", {f, d}});
        specs.push_back({p + "ffn.in.bias", {f}});
        specs.push_back({p + "ffn.out.weight", {d, f}});
        specs.push_back({p + "ffn.out.bias", {d}});
    }
    specs.push_back({"cls.weight", {cfg.num_classes, d}});
    specs.push_back({"cls.bias", {cfg.num_classes}});
    specs.push_back({"ctc.weight", {cfg.vocab_size, d}});
    specs.push_back({"ctc.bias", {cfg.vocab_size}});
    return specs;
}

std::size_t analytic_parameter_count(const ModelConfig& cfg) {
    std::size_t total = 0;
    std::size_t in_ch = 1;
    for (const ConvSpec& c : cfg.conv_layers) {
        total += c.channels * (in_ch * c.kernel + 1);
        in_ch = c.channels;
    }
    const std::size_t d = cfg.hidden_dim, f = cfg.ffn_dim;
    total += in_ch * d + d;
    total += cfg.num_layers * (4 * (d * d + d) + 2 * d * f + f + d + 4 * d);
    total += d * cfg.num_classes + cfg.num_classes;
    total += d * cfg.vocab_size + cfg.vocab_size;
    return total;
}

bool is_encoder_tensor(const std::string& name) {
    return !starts_with(name, "cls.") && !starts_with(name, "ctc.");
}

bool is_weight_tensor(const std::string& name) { return ends_with(name, ".weight"); }

} // namespace toxedge
