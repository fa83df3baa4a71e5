#include "support.hpp"

#include <gtest/gtest.h>

using namespace toxedge;
using toxedge::test::error_kind;

namespace {

using Mat = std::vector<std::vector<double>>;

Mat to_mat(const Tensor& t) {
    Mat m(t.rows(), std::vector<double>(t.cols()));
    for (std::size_t r = 0; r < t.rows(); ++r)
        for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.at(r, c);
    return m;
}

Mat affine(const Mat& x, const Tensor& w, const Tensor& b) {
    Mat y(x.size(), std::vector<double>(w.rows()));
    for (std::size_t r = 0; r < x.size(); ++r)
        for (std::size_t o = 0; o < w.rows(); ++o) {
            double s = b[o];
            for (std::size_t i = 0; i < w.cols(); ++i) s += w.at(o, i) * x[r][i];
            y[r][o] = s;
        }
    return y;
}

Mat norm(const Mat& x, const Tensor& g, const Tensor& b) {
    Mat y = x;
    for (auto& row : y) {
        double mean = 0, var = 0;
        for (double v : row) mean += v;
        mean /= row.size();
        for (double v : row) var += (v - mean) * (v - mean);
        var /= row.size();
        for (std::size_t i = 0; i < row.size(); ++i) row[i] = (row[i] - mean) / std::sqrt(var + 1e-5) * g[i] + b[i];
    }
    return y;
}

// Straight-line transformer encoder in double, one loop per formula.
Mat naive_encoder(const Tensor& features, const Checkpoint& p) {
    const std::size_t d = p.config.hidden_dim, h = p.config.num_heads, dh = d / h;
    Mat x = affine(to_mat(features), p.f32("proj.weight"), p.f32("proj.bias"));
    const std::size_t T = x.size();
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t i = 0; i < d; ++i) {
            const double angle = static_cast<double>(t) / std::pow(10000.0, static_cast<double>(i - i % 2) / d);
            x[t][i] += i % 2 ? std::cos(angle) : std::sin(angle);
        }
    for (std::size_t l = 0; l < p.config.num_layers; ++l) {
        const std::string pre = "layers." + std::to_string(l) + ".";
        const Mat a = norm(x, p.f32(pre + "ln1.gamma"), p.f32(pre + "ln1.beta"));
        const Mat q = affine(a, p.f32(pre + "attn.q.weight"), p.f32(pre + "attn.q.bias"));
        const Mat k = affine(a, p.f32(pre + "attn.k.weight"), p.f32(pre + "attn.k.bias"));
        const Mat v = affine(a, p.f32(pre + "attn.v.weight"), p.f32(pre + "attn.v.bias"));
        Mat ctx(T, std::vector<double>(d, 0.0));
        for (std::size_t head = 0; head < h; ++head)
            for (std::size_t i = 0; i < T; ++i) {
                std::vector<double> s(T);
                double mx = -1e300;
                for (std::size_t j = 0; j < T; ++j) {
                    double dot = 0;
                    for (std::size_t c = 0; c < dh; ++c) dot += q[i][head * dh + c] * k[j][head * dh + c];
                    s[j] = dot / std::sqrt(static_cast<double>(dh));
                    mx = std::max(mx, s[j]);
                }
                double z = 0;
                for (double& e : s) z += (e = std::exp(e - mx));
                for (std::size_t j = 0; j < T; ++j)
                    for (std::size_t c = 0; c < dh; ++c) ctx[i][head * dh + c] += s[j] / z * v[j][head * dh + c];
            }
        const Mat o = affine(ctx, p.f32(pre + "attn.o.weight"), p.f32(pre + "attn.o.bias"));
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t i = 0; i < d; ++i) x[t][i] += o[t][i];
        Mat hidden = affine(norm(x, p.f32(pre + "ln2.gamma"), p.f32(pre + "ln2.beta")), p.f32(pre + "ffn.in.weight"),
                            p.f32(pre + "ffn.in.bias"));
        for (auto& row : hidden)
            for (double& e : row) e = 0.5 * e * (1.0 + std::erf(e / std::sqrt(2.0)));
        const Mat f = affine(hidden, p.f32(pre + "ffn.out.weight"), p.f32(pre + "ffn.out.bias"));
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t i = 0; i < d; ++i) x[t][i] += f[t][i];
    }
    return x;
}

// Tiny checkpoint with larger attention weights so softmax rows are far
// from uniform.
Checkpoint peaked_tiny(std::uint64_t seed) {
    Checkpoint c = init_checkpoint(ModelConfig::tiny(), seed);
    Rng rng(seed + 100);
    for (auto& [name, t] : c.tensors) {
        if (name.find("attn.q.weight") != std::string::npos || name.find("attn.k.weight") != std::string::npos) {
            for (float& v : std::get<Tensor>(t).values()) v = static_cast<float>(rng.normal(0.0, 0.4));
        }
    }
    return c;
}

Waveform clip(std::uint64_t seed, double seconds) {
    return normalize(synth_dataset(seed, 2, seconds, ModelConfig::tiny())[0].waveform);
}

} // namespace

TEST(Config, FrameCounts) {
    const ModelConfig base = ModelConfig::base_mirror();
    EXPECT_EQ(base.frame_count(16000), 49u);
    EXPECT_EQ(base.frame_count(32000), 99u);
    EXPECT_EQ(base.min_samples(), 400u);
    EXPECT_EQ(base.frame_count(400), 1u);
    EXPECT_EQ(error_kind([&] { (void)base.frame_count(399); }), ErrorKind::InputTooShort);
}

TEST(Config, PresetsAndValidation) {
    const ModelConfig base = ModelConfig::base_mirror();
    EXPECT_EQ(base.conv_layers.size(), 7u);
    EXPECT_EQ(base.hidden_dim, 768u);
    EXPECT_EQ(base.num_layers, 12u);
    EXPECT_EQ(base.num_heads, 8u);
    EXPECT_EQ(base.ffn_dim, 3072u);
    EXPECT_EQ(base.vocab_size, 32u);
    const ModelConfig tiny = ModelConfig::tiny();
    EXPECT_EQ(tiny.hidden_dim, 64u);
    EXPECT_EQ(tiny.num_layers, 4u);
    EXPECT_EQ(tiny.vocab_size, 8u);
    EXPECT_EQ(ModelConfig::preset_named("tiny"), tiny);
    EXPECT_EQ(error_kind([] { (void)ModelConfig::preset_named("huge"); }), ErrorKind::Config);

    ModelConfig bad = tiny;
    bad.num_heads = 3;
    EXPECT_EQ(error_kind([&] { bad.validate(); }), ErrorKind::Config);
    bad = tiny;
    bad.vocab_size = 1;
    EXPECT_EQ(error_kind([&] { bad.validate(); }), ErrorKind::Config);
    bad = base;
    bad.conv_layers.pop_back();
    EXPECT_EQ(error_kind([&] { bad.validate(); }), ErrorKind::Config);
}

TEST(Config, ParameterCountMatchesInventory) {
    for (const auto& cfg : {ModelConfig::tiny(), ModelConfig::base_mirror()}) {
        std::size_t sum = 0;
        for (const auto& spec : parameter_inventory(cfg)) sum += shape_size(spec.shape);
        EXPECT_EQ(sum, analytic_parameter_count(cfg)) << cfg.preset;
        EXPECT_EQ(init_checkpoint(cfg, 1).parameter_count(), sum);
    }
    // Independent tally for base-mirror: conv stack, projection, 12 layers, heads.
    const std::size_t conv = 512 * (10 + 1) + 4 * 512 * (512 * 3 + 1) + 2 * 512 * (512 * 2 + 1);
    const std::size_t layer = 4 * (768 * 768 + 768) + 2 * 768 * 3072 + 3072 + 768 + 4 * 768;
    const std::size_t expected = conv + (512 * 768 + 768) + 12 * layer + (2 * 768 + 2) + (32 * 768 + 32);
    EXPECT_EQ(expected, 89677602u);
    EXPECT_EQ(analytic_parameter_count(ModelConfig::base_mirror()), expected);
}

TEST(FeatureExtract, ZeroWeightsGiveBiasesThroughGelu) {
    Checkpoint c = init_checkpoint(ModelConfig::tiny(), 3);
    Rng rng(4);
    for (std::size_t i = 0; i < 7; ++i) {
        for (float& v : c.f32_mut("conv." + std::to_string(i) + ".weight").values()) v = 0.0f;
        for (float& v : c.f32_mut("conv." + std::to_string(i) + ".bias").values()) v = static_cast<float>(rng.normal());
    }
    const Tensor f = feature_extract(clip(1, 1.0), c);
    ASSERT_EQ(f.rows(), c.config.frame_count(16000));
    const Tensor& last = c.f32("conv.6.bias");
    for (std::size_t t = 0; t < f.rows(); ++t)
        for (std::size_t ch = 0; ch < f.cols(); ++ch) EXPECT_FLOAT_EQ(f.at(t, ch), static_cast<float>(gelu(last[ch])));
}

TEST(FeatureExtract, TooShortNamesMinimum) {
    const Checkpoint c = init_checkpoint(ModelConfig::tiny(), 3);
    Waveform w;
    w.samples.assign(399, 0.1f);
    try {
        (void)feature_extract(w, c);
        FAIL() << "expected input-too-short";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InputTooShort);
        EXPECT_NE(std::string(e.what()).find("400"), std::string::npos) << e.what();
    }
    w.samples.assign(400, 0.1f);
    EXPECT_EQ(feature_extract(w, c).rows(), 1u);
}

TEST(Encode, ZeroLayersIsProjectionPlusPositions) {
    ModelConfig cfg = ModelConfig::tiny();
    cfg.num_layers = 0;
    Checkpoint c;
    c.config = cfg;
    Rng rng(5);
    for (const auto& spec : parameter_inventory(cfg)) c.tensors.emplace(spec.name, test::random_tensor(rng, spec.shape, 0.1));
    const Tensor features = test::random_tensor(rng, {9, cfg.feature_dim()});
    Tensor expected = linear(features, c.f32("proj.weight"), c.f32("proj.bias"));
    const Tensor pe = positional_encoding(9, cfg.hidden_dim);
    for (std::size_t i = 0; i < expected.size(); ++i) expected[i] += pe[i];
    EXPECT_EQ(encode(features, c).frames, expected);
}

TEST(Encode, ShapeMismatch) {
    const Checkpoint c = init_checkpoint(ModelConfig::tiny(), 3);
    EXPECT_EQ(error_kind([&] { (void)encode(Tensor({5, 31}), c); }), ErrorKind::Shape);
}

TEST(Encode, SingleFrameAttentionIsOne) {
    const Checkpoint c = peaked_tiny(6);
    std::size_t calls = 0;
    EncodeOptions opts;
    opts.observer = [&](std::size_t, std::size_t, const Tensor& w) {
        ++calls;
        ASSERT_EQ(w.shape(), (Shape{1, 1}));
        EXPECT_EQ(w[0], 1.0f);
    };
    Rng rng(7);
    (void)encode(test::random_tensor(rng, {1, c.config.feature_dim()}), c, opts);
    EXPECT_EQ(calls, c.config.num_layers * c.config.num_heads);
}

TEST(Encode, AttentionRowsAreDistributions) {
    Rng rng(8);
    for (std::uint64_t seed : {1, 2, 3}) {
        const Checkpoint c = peaked_tiny(seed);
        EncodeOptions opts;
        opts.observer = [&](std::size_t, std::size_t, const Tensor& w) {
            for (std::size_t r = 0; r < w.rows(); ++r) {
                double s = 0;
                for (float v : w.row(r)) {
                    EXPECT_GE(v, 0.0f);
                    s += v;
                }
                EXPECT_NEAR(s, 1.0, 1e-6);
            }
        };
        (void)encode(test::random_tensor(rng, {3 + rng.index(20), c.config.feature_dim()}), c, opts);
    }
}

TEST(Encode, MatchesNaiveAttentionOracle) {
    const Checkpoint c = peaked_tiny(7);
    const Tensor features = feature_extract(clip(2, 0.5), c);
    const Tensor got = encode(features, c).frames;
    const Mat want = naive_encoder(features, c);
    double worst = 0;
    for (std::size_t t = 0; t < got.rows(); ++t)
        for (std::size_t i = 0; i < got.cols(); ++i) worst = std::max(worst, std::abs(got.at(t, i) - want[t][i]));
    EXPECT_LT(worst, 1e-5);
}

TEST(Classify, HeadExamples) {
    Checkpoint c = init_checkpoint(ModelConfig::tiny(), 7);
    const HiddenStates h = encode(feature_extract(clip(3, 1.0), c), c);
    for (float& v : c.f32_mut("cls.weight").values()) v = 0.0f;
    EXPECT_EQ(classify(h, c), (std::array<float, 2>{0.0f, 0.0f}));
    const double zero[2] = {0.0, 0.0};
    EXPECT_EQ(softmax_t(zero)[0], 0.5);
    c.f32_mut("cls.bias")[0] = 1.0f;
    c.f32_mut("cls.bias")[1] = -1.0f;
    EXPECT_EQ(classify(h, c), (std::array<float, 2>{1.0f, -1.0f}));
    const HiddenStates other = encode(feature_extract(clip(4, 0.7), c), c);
    EXPECT_EQ(classify(other, c), (std::array<float, 2>{1.0f, -1.0f}));
}

TEST(Classify, PoolThenProjectOracle) {
    const Checkpoint c = init_checkpoint(ModelConfig::tiny(), 7);
    const auto data = synth_dataset(42, 10, 1.0, c.config);
    const HiddenStates h = encode(feature_extract(normalize(data[0].waveform), c), c);
    const Tensor pooled = mean_pool(h.frames);
    const Tensor logits = matmul(pooled.reshaped({1, pooled.size()}), transpose(c.f32("cls.weight")));
    const auto got = classify(h, c);
    for (int k = 0; k < 2; ++k) EXPECT_NEAR(got[k], logits[k] + c.f32("cls.bias")[k], 1e-6);
}

TEST(CtcLogits, HeadExamples) {
    Checkpoint c = init_checkpoint(ModelConfig::tiny(), 7);
    const HiddenStates h = encode(feature_extract(clip(5, 1.0), c), c);
    const Tensor z = ctc_logits(h, c);
    ASSERT_EQ(z.shape(), (Shape{h.frames.rows(), c.config.vocab_size}));
    const Tensor oracle = matmul(h.frames, transpose(c.f32("ctc.weight")));
    for (std::size_t t = 0; t < z.rows(); ++t)
        for (std::size_t v = 0; v < z.cols(); ++v)
            EXPECT_NEAR(z.at(t, v), oracle.at(t, v) + c.f32("ctc.bias")[v], 1e-6);

    for (float& v : c.f32_mut("ctc.weight").values()) v = 0.0f;
    const Tensor flat = ctc_logits(h, c);
    for (float v : flat.values()) EXPECT_EQ(v, 0.0f);
    const DMatrix lp = log_softmax_rows(flat);
    for (double v : lp.data) EXPECT_NEAR(v, -std::log(8.0), 1e-12);
}

TEST(Forward, DeterministicAndCompositional) {
    const Checkpoint c = init_checkpoint(ModelConfig::tiny(), 7);
    const Waveform w = clip(6, 1.0);
    const ForwardResult a = forward(w, c);
    const ForwardResult b = forward(w, c);
    EXPECT_EQ(a.toxicity_logits, b.toxicity_logits);
    EXPECT_EQ(a.ctc_logits, b.ctc_logits);

    const HiddenStates h = encode(feature_extract(w, c), c);
    EXPECT_EQ(a.toxicity_logits, classify(h, c));
    EXPECT_EQ(a.ctc_logits, ctc_logits(h, c));
    // Shared encoder: the pooled vector is the mean of the frames the CTC head saw.
    EXPECT_EQ(a.pooled, pooled_embedding(h));
}

TEST(Forward, BaseMirrorOneSecondShape) {
    const Checkpoint c = init_checkpoint(ModelConfig::base_mirror(), 7);
    const ForwardResult r = forward(clip(7, 1.0), c);
    EXPECT_EQ(r.ctc_logits.shape(), (Shape{49, 32}));
}

TEST(Forward, AmplitudeInvarianceAfterNormalize) {
    const Checkpoint c = init_checkpoint(ModelConfig::tiny(), 7);
    const Waveform raw = synth_dataset(8, 2, 1.0, c.config)[1].waveform;
    const ForwardResult ref = forward(normalize(raw), c);
    // Power-of-two gains scale floats exactly, so the match is bitwise.
    for (float a : {0.25f, 0.5f, 2.0f}) {
        Waveform scaled = raw;
        for (float& v : scaled.samples) v *= a;
        const ForwardResult r = forward(normalize(scaled), c);
        EXPECT_EQ(r.toxicity_logits, ref.toxicity_logits) << a;
        EXPECT_EQ(r.ctc_logits, ref.ctc_logits) << a;
    }
    // Other gains round differently in float; equal to float precision.
    for (float a : {0.3f, 1.7f}) {
        Waveform scaled = raw;
        for (float& v : scaled.samples) v *= a;
        const ForwardResult r = forward(normalize(scaled), c);
        for (int k = 0; k < 2; ++k) EXPECT_NEAR(r.toxicity_logits[k], ref.toxicity_logits[k], 1e-4) << a;
    }
}

TEST(Forward, PoolLayerOverride) {
    const Checkpoint c = init_checkpoint(ModelConfig::tiny(), 7);
    const Waveform w = clip(9, 1.0);
    const ForwardResult last = forward(w, c);
    EXPECT_EQ(forward(w, c, {c.config.num_layers}).toxicity_logits, last.toxicity_logits);

    const ForwardResult early = forward(w, c, {2});
    EncodeOptions two;
    two.max_layers = 2;
    const HiddenStates h2 = encode(feature_extract(w, c), c, two);
    EXPECT_EQ(early.pooled, mean_pool(h2.frames));
    EXPECT_EQ(early.ctc_logits, last.ctc_logits);
    EXPECT_EQ(error_kind([&] { (void)forward(w, c, {5}); }), ErrorKind::Config);
}
