#include "support.hpp"

#include <gtest/gtest.h>

using namespace toxedge;
using toxedge::test::error_kind;

namespace {

Waveform clip(std::uint64_t seed) {
    return normalize(synth_dataset(seed, 2, 1.0, ModelConfig::tiny())[1].waveform);
}

// Dequantized value minus original, checked against half a step. Float
// dequantization rounds once more, hence the tiny relative slack.
double worst_step_fraction(const Tensor& w, const QTensor& q) {
    const Tensor back = dequantize(q);
    double worst = 0.0;
    for (std::size_t r = 0; r < w.rows(); ++r)
        for (std::size_t c = 0; c < w.cols(); ++c) {
            const double err = std::abs(static_cast<double>(back.at(r, c)) - w.at(r, c));
            worst = std::max(worst, err / q.params.scales[r]);
        }
    return worst;
}

std::size_t zeros(const Tensor& t) {
    return static_cast<std::size_t>(std::count(t.values().begin(), t.values().end(), 0.0f));
}

} // namespace

TEST(Quantize, ExactlyRepresentableChannel) {
    const QTensor q = quantize_tensor(Tensor({1, 3}, {-1.27f, 0.0f, 1.27f}));
    EXPECT_FLOAT_EQ(q.params.scales[0], 0.01f);
    EXPECT_EQ(q.params.zero_points[0], 0);
    EXPECT_EQ(std::vector<std::int8_t>(q.values.begin(), q.values.end()), (std::vector<std::int8_t>{-127, 0, 127}));
    const Tensor back = dequantize(q);
    EXPECT_FLOAT_EQ(back[0], -1.27f);
    EXPECT_EQ(back[1], 0.0f);
    EXPECT_FLOAT_EQ(back[2], 1.27f);
}

TEST(Quantize, ZeroChannelUsesScaleFloor) {
    const QTensor q = quantize_tensor(Tensor({2, 2}, {0.0f, 0.0f, 0.5f, -0.25f}));
    EXPECT_FLOAT_EQ(q.params.scales[0], 1e-12f);
    EXPECT_EQ(q.values[0], 0);
    EXPECT_EQ(q.values[1], 0);
    EXPECT_EQ(dequantize(q)[0], 0.0f);
    EXPECT_EQ(q.values[2], 127);
}

TEST(Quantize, RejectsNonMatrix) {
    EXPECT_EQ(error_kind([] { (void)quantize_tensor(Tensor({4}, {1, 2, 3, 4})); }), ErrorKind::Scheme);
    EXPECT_EQ(error_kind([] { (void)quantize_tensor(Tensor({2, 2, 2})); }), ErrorKind::Scheme);
}

TEST(Quantize, RoundtripWithinHalfStep) {
    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const Tensor w = test::random_tensor(rng, {1 + rng.index(16), 1 + rng.index(64)}, rng.uniform(0.01, 5.0));
        EXPECT_LE(worst_step_fraction(w, quantize_tensor(w)), 0.5 + 1e-5);
    }
}

TEST(Quantize, IdempotentAndUnbiased) {
    Rng rng(22);
    const Tensor w = test::random_tensor(rng, {32, 256});
    const QTensor q1 = quantize_tensor(w);
    const QTensor q2 = quantize_tensor(dequantize(q1));
    EXPECT_EQ(q1.values, q2.values);
    const Tensor back = dequantize(q1);
    double mean = 0.0, mean_scale = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) mean += back[i] - w[i];
    for (float s : q1.params.scales) mean_scale += s;
    mean /= static_cast<double>(w.size());
    mean_scale /= static_cast<double>(q1.params.scales.size());
    // Uniform rounding error has sd scale / sqrt(12); the mean over n
    // entries should sit well inside a few of those / sqrt(n).
    EXPECT_LT(std::abs(mean), 5.0 * mean_scale / std::sqrt(12.0 * static_cast<double>(w.size())));
}

TEST(ActivationQuant, AffineArithmetic) {
    Tensor x({1, 256});
    for (std::size_t i = 0; i < 256; ++i) x[i] = std::min(2.55f, static_cast<float>(i) * 0.01f);
    const ActivationQuant q = choose_activation_quant(x);
    EXPECT_NEAR(q.scale, 0.01f, 1e-7);
    EXPECT_EQ(q.zero_point, -128);
    EXPECT_EQ(quantize_value(1.28f, q), 0);
    EXPECT_EQ(quantize_value(0.0f, q), -128);
    EXPECT_EQ(quantize_value(2.55f, q), 127);
}

TEST(QuantizedLinear, ZeroWeightsGiveBias) {
    const QTensor w = quantize_tensor(Tensor({3, 4}));
    const Tensor bias({3}, {0.5f, -1.0f, 2.0f});
    Rng rng(23);
    const Tensor y = quantized_linear(test::random_tensor(rng, {5, 4}), w, bias);
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t o = 0; o < 3; ++o) EXPECT_EQ(y.at(r, o), bias[o]);
}

TEST(QuantizedLinear, ShapeErrors) {
    const QTensor w = quantize_tensor(Tensor({3, 4}));
    EXPECT_EQ(error_kind([&] { (void)quantized_linear(Tensor({2, 5}), w, Tensor({3})); }), ErrorKind::Shape);
    EXPECT_EQ(error_kind([&] { (void)quantized_linear(Tensor({2, 4}), w, Tensor({2})); }), ErrorKind::Shape);
}

TEST(QuantizedLinear, WithinDocumentedBound) {
    Rng rng(24);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 1 + rng.index(6), k = 1 + rng.index(80), out = 1 + rng.index(20);
        const Tensor x = test::random_tensor(rng, {n, k}, rng.uniform(0.1, 3.0));
        const Tensor w = test::random_tensor(rng, {out, k}, rng.uniform(0.01, 1.0));
        const Tensor b = test::random_tensor(rng, {out});
        const QTensor q = quantize_tensor(w);
        const Tensor y = quantized_linear(x, q, b);
        const auto ref = test::naive_matmul(x, transpose(w));

        float w_inf = 0, x_inf = 0, sw = 0;
        for (float v : w.values()) w_inf = std::max(w_inf, std::fabs(v));
        for (float v : x.values()) x_inf = std::max(x_inf, std::fabs(v));
        for (float s : q.params.scales) sw = std::max(sw, s);
        const double sx = choose_activation_quant(x).scale;
        const double bound = 2.0 * (sx * w_inf + sw * x_inf) * static_cast<double>(k);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t o = 0; o < out; ++o) EXPECT_LE(std::abs(y.at(i, o) - (ref[i * out + o] + b[o])), bound);
    }
}

TEST(QuantizedLinear, SmallRelativeErrorOnTinyLayers) {
    const Checkpoint c = init_checkpoint(ModelConfig::tiny(), 7);
    const Tensor x = encode(feature_extract(clip(3), c), c).frames;
    for (const char* name : {"layers.0.attn.q.weight", "layers.1.ffn.in.weight", "layers.3.attn.o.weight"}) {
        const Tensor& w = c.f32(name);
        const Tensor y = quantized_linear(x, quantize_tensor(w), Tensor());
        const auto ref = test::naive_matmul(x, transpose(w));
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < ref.size(); ++i) {
            num += (y[i] - ref[i]) * (y[i] - ref[i]);
            den += ref[i] * ref[i];
        }
        EXPECT_LT(std::sqrt(num / den), 0.02) << name;
    }
}

TEST(QuantizeModel, CoversEveryWeight) {
    const Checkpoint c = init_checkpoint(ModelConfig::tiny(), 7);
    const Checkpoint q = quantize_model(c);
    EXPECT_EQ(q.tensors.size(), c.tensors.size());
    for (const auto& [name, stored] : q.tensors) {
        EXPECT_EQ(shape_of(stored), shape_of(c.at(name))) << name;
        EXPECT_EQ(dtype_of(stored), is_weight_tensor(name) ? DType::Int8 : DType::F32) << name;
        if (const auto* t = std::get_if<QTensor>(&stored)) {
            const Tensor& w = c.f32(name);
            EXPECT_LE(worst_step_fraction(w.reshaped({w.rows(), w.cols()}), *t), 0.5 + 1e-5) << name;
            EXPECT_EQ(t->params.scheme, QuantScheme::SymmetricPerChannel);
            for (auto zp : t->params.zero_points) EXPECT_EQ(zp, 0);
        }
    }
    EXPECT_NO_THROW(check_inventory(q));
}

TEST(QuantizeModel, AlreadyQuantizedIsNoOpWithNotice) {
    const Checkpoint q = quantize_model(init_checkpoint(ModelConfig::tiny(), 7));
    std::vector<std::string> notices;
    EXPECT_EQ(quantize_model(q, &notices), q);
    ASSERT_EQ(notices.size(), 1u);
    EXPECT_NE(notices[0].find("already"), std::string::npos);
}

TEST(QuantizeModel, TinyForwardStaysClose) {
    const Checkpoint c = init_checkpoint(ModelConfig::tiny(), 7);
    const Checkpoint q = quantize_model(c);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Waveform w = clip(seed);
        const auto a = forward(w, c).toxicity_logits, b = forward(w, q).toxicity_logits;
        for (int k = 0; k < 2; ++k) EXPECT_NEAR(a[k], b[k], 0.05 * (1.0 + std::abs(a[k])));
    }
}

TEST(Prune, MagnitudeExample) {
    Checkpoint c;
    c.tensors.emplace("cls.weight", Tensor({1, 4}, {0.1f, -0.5f, 0.2f, 0.9f}));
    c.tensors.emplace("cls.bias", Tensor({1}, {0.01f}));
    const Checkpoint p = prune_magnitude(c, {0.5});
    EXPECT_EQ(p.f32("cls.weight"), Tensor({1, 4}, {0.0f, -0.5f, 0.0f, 0.9f}));
    EXPECT_EQ(p.f32("cls.bias"), c.f32("cls.bias"));
}

TEST(Prune, TiesGoToLowerIndex) {
    Checkpoint c;
    c.tensors.emplace("cls.weight", Tensor({1, 4}, {0.3f, -0.3f, 0.3f, 0.3f}));
    EXPECT_EQ(prune_magnitude(c, {0.5}).f32("cls.weight"), Tensor({1, 4}, {0.0f, 0.0f, 0.3f, 0.3f}));
}

TEST(Prune, SparsityZeroIsIdentityAndRangeChecked) {
    const Checkpoint c = init_checkpoint(ModelConfig::tiny(), 7);
    const Checkpoint p = prune_magnitude(c, {0.0});
    EXPECT_EQ(p.tensors, c.tensors);
    EXPECT_EQ(error_kind([&] { (void)prune_magnitude(c, {1.0}); }), ErrorKind::Parameter);
    EXPECT_EQ(error_kind([&] { (void)prune_magnitude(c, {-0.1}); }), ErrorKind::Parameter);
}

TEST(Prune, ExactFloorCountAndDenseSize) {
    const Checkpoint c = init_checkpoint(ModelConfig::tiny(), 7);
    for (double s : {0.1, 0.5, 0.77}) {
        const Checkpoint p = prune_magnitude(c, {s});
        for (const auto& [name, stored] : p.tensors) {
            const Tensor& t = std::get<Tensor>(stored);
            const auto expected = static_cast<std::size_t>(std::floor(s * static_cast<double>(t.size())));
            if (is_weight_tensor(name)) {
                EXPECT_EQ(zeros(t), expected) << name;
            } else {
                EXPECT_EQ(t, c.f32(name)) << name;
            }
        }
        EXPECT_EQ(serialize(p).size(), serialize(c).size());
    }
}

TEST(Prune, QuantizedCheckpointZeroesLevels) {
    const Checkpoint q = quantize_model(init_checkpoint(ModelConfig::tiny(), 7));
    const Checkpoint p = prune_magnitude(q, {0.5});
    for (const auto& [name, stored] : p.tensors) {
        if (const auto* t = std::get_if<QTensor>(&stored)) {
            const auto z = std::count(t->values.begin(), t->values.end(), std::int8_t{0});
            EXPECT_GE(static_cast<std::size_t>(z), t->values.size() / 2) << name;
        }
    }
}

TEST(Student, TruncatesLayers) {
    const Checkpoint teacher = init_checkpoint(ModelConfig::tiny(), 7);
    const Checkpoint s = make_student(teacher, 2);
    EXPECT_EQ(s.config.num_layers, 2u);
    EXPECT_EQ(s.parameter_count(), analytic_parameter_count(s.config));
    EXPECT_NO_THROW(check_inventory(s));
    for (const auto& [name, stored] : s.tensors) EXPECT_EQ(stored, teacher.at(name)) << name;

    EncodeOptions two;
    two.max_layers = 2;
    for (std::uint64_t seed : {1, 2, 3}) {
        const Waveform w = clip(seed);
        const HiddenStates h = encode(feature_extract(w, teacher), teacher, two);
        const ForwardResult r = forward(w, s);
        EXPECT_EQ(r.toxicity_logits, classify(h, teacher));
        EXPECT_EQ(r.ctc_logits, ctc_logits(h, teacher));
    }
}

TEST(Student, LayerRange) {
    const Checkpoint teacher = init_checkpoint(ModelConfig::tiny(), 7);
    EXPECT_EQ(error_kind([&] { (void)make_student(teacher, 0); }), ErrorKind::Config);
    EXPECT_EQ(error_kind([&] { (void)make_student(teacher, 4); }), ErrorKind::Config);
    EXPECT_EQ(default_student_layers(12), 5u);
    EXPECT_EQ(default_student_layers(4), 2u);
    EXPECT_EQ(default_student_layers(1), 1u);
}

TEST(Student, BaseMirrorSizesAreMonotone) {
    const Checkpoint base = init_checkpoint(ModelConfig::base_mirror(), 7);
    const std::size_t full = serialize(base).size();
    const std::size_t quant = serialize(quantize_model(base)).size();
    const Checkpoint student = make_student(base, default_student_layers(12));
    EXPECT_EQ(student.config.num_layers, 5u);
    EXPECT_EQ(student.parameter_count(), analytic_parameter_count(student.config));
    const std::size_t small = serialize(student).size();
    const std::size_t both = serialize(quantize_model(student)).size();
    EXPECT_LT(both, small);
    EXPECT_LT(small, full);
    EXPECT_LT(quant, full);
    const double combined = static_cast<double>(full) / both;
    EXPECT_GT(combined, static_cast<double>(full) / quant);
    EXPECT_GT(combined, static_cast<double>(full) / small);
}
