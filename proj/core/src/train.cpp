#include "toxedge/train.hpp"

#include "toxedge/ctc.hpp"
#include "toxedge/error.hpp"
#include "toxedge/kernels.hpp"
#include "toxedge/memory.hpp"
#include "toxedge/model.hpp"
#include "toxedge/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <future>

namespace toxedge {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
    if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        fail(ErrorKind::Parameter, "adam_step: parameter, gradient and state sizes differ");
    }
    const AdamHyper& h = state.hyper;
    ++state.t;
    const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = h.beta1 * state.m[i] + (1.0 - h.beta1) * g;
        state.v[i] = h.beta2 * state.v[i] + (1.0 - h.beta2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params[i] -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
    }
}

SplitIndices split_indices(std::span<const int> labels, const SplitRatios& ratios, std::uint64_t seed) {
    if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
        std::fabs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
        fail(ErrorKind::Parameter, "split ratios must be non-negative and sum to 1");
    }
    const std::size_t n = labels.size();
    const auto val_n = static_cast<std::size_t>(std::floor(ratios.val * static_cast<double>(n) + 1e-9));
    const auto test_n = static_cast<std::size_t>(std::floor(ratios.test * static_cast<double>(n) + 1e-9));
    if (val_n == 0 || test_n == 0 || val_n + test_n >= n) {
        fail(ErrorKind::Split, "cannot split " + std::to_string(n) + " items into non-empty train/val/test");
    }

    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < n; ++i) by_class[labels[i] == 1 ? 1 : 0].push_back(i);
    Rng rng(seed);
    rng.shuffle(by_class[0]);
    rng.shuffle(by_class[1]);

    const double toxic_fraction = static_cast<double>(by_class[1].size()) / static_cast<double>(n);
    std::array<std::size_t, 2> cursor{0, 0};
    auto take = [&](std::size_t count, std::vector<std::size_t>& out) {
        auto toxic = static_cast<std::size_t>(std::lround(toxic_fraction * static_cast<double>(count)));
        toxic = std::min(toxic, by_class[1].size() - cursor[1]);
        std::size_t clean = count - toxic;
        if (clean > by_class[0].size() - cursor[0]) {
            clean = by_class[0].size() - cursor[0];
            toxic = count - clean;
        }
        for (std::size_t k = 0; k < toxic; ++k) out.push_back(by_class[1][cursor[1]++]);
        for (std::size_t k = 0; k < clean; ++k) out.push_back(by_class[0][cursor[0]++]);
        rng.shuffle(out);
    };
    SplitIndices s;
    take(val_n, s.val);
    take(test_n, s.test);
    take(n - val_n - test_n, s.train);
    return s;
}

DatasetSplit split_dataset(const std::vector<LabeledUtterance>& items, const SplitRatios& ratios,
                           std::uint64_t seed) {
    std::vector<int> labels;
    for (const auto& u : items) labels.push_back(static_cast<int>(u.label));
    const SplitIndices idx = split_indices(labels, ratios, seed);
    DatasetSplit out;
    for (std::size_t i : idx.train) out.train.push_back(items[i]);
    for (std::size_t i : idx.val) out.val.push_back(items[i]);
    for (std::size_t i : idx.test) out.test.push_back(items[i]);
    return out;
}

TrainOptions TrainOptions::full_scale() {
    TrainOptions o;
    o.lr = 5e-5;
    o.batch_size = 2;
    o.epochs = 100;
    return o;
}

std::string report_jsonl(const TrainReport& report) {
    std::string out;
    for (const EpochRecord& e : report.epochs) {
        nlohmann::json rec = {{"type", "epoch"},          {"epoch", e.epoch},           {"cls_loss", e.mean.cls_loss},
                              {"asr_loss", e.mean.asr_loss}, {"lambda", e.mean.lambda}, {"total", e.mean.total}};
        if (e.mean.kd_soft) rec["kd_soft"] = *e.mean.kd_soft;
        if (e.mean.kd_hard) rec["kd_hard"] = *e.mean.kd_hard;
        out += rec.dump() + "\n";
    }
    const Metrics& m = report.validation;
    nlohmann::json summary = {{"type", "summary"},
                              {"seed", report.seed},
                              {"wall_s", report.wall_s},
                              {"val_accuracy", m.accuracy},
                              {"val_macro_f1", m.macro_f1},
                              {"val_weighted_accuracy", m.weighted_accuracy}};
    if (m.auc) summary["val_auc"] = *m.auc;
    out += summary.dump() + "\n";
    return out;
}

std::vector<EncodedExample> encode_dataset(const Checkpoint& ckpt, const std::vector<LabeledUtterance>& items,
                                           std::size_t pool_layer) {
    std::vector<EncodedExample> out;
    out.reserve(items.size());
    for (const LabeledUtterance& u : items) {
        Embedding e = embed(normalize(u.waveform), ckpt, {pool_layer});
        out.push_back({std::move(e.pooled), std::move(e.hidden.frames), static_cast<int>(u.label), u.transcript});
    }
    return out;
}

namespace {

// Flat double copy of both affine heads: [cls.w | cls.b | ctc.w | ctc.b].
struct Heads {
    std::size_t d = 0, classes = 0, vocab = 0;
    std::vector<double> p;

    std::size_t cls_b() const { return classes * d; }
    std::size_t ctc_w() const { return cls_b() + classes; }
    std::size_t ctc_b() const { return ctc_w() + vocab * d; }

    static Heads from(const Checkpoint& ckpt) {
        Heads h;
        h.d = ckpt.config.hidden_dim;
        h.classes = ckpt.config.num_classes;
        h.vocab = ckpt.config.vocab_size;
        for (const char* name : {"cls.weight", "cls.bias", "ctc.weight", "ctc.bias"}) {
            const Tensor& t = ckpt.f32(name);
            h.p.insert(h.p.end(), t.values().begin(), t.values().end());
        }
        return h;
    }

    void write(Checkpoint& ckpt) const {
        std::size_t at = 0;
        for (const char* name : {"cls.weight", "cls.bias", "ctc.weight", "ctc.bias"}) {
            Tensor& t = ckpt.f32_mut(name);
            for (float& v : t.values()) v = static_cast<float>(p[at++]);
        }
    }

    std::vector<double> cls_logits(const Tensor& pooled) const {
        std::vector<double> z(classes);
        for (std::size_t c = 0; c < classes; ++c) {
            double acc = p[cls_b() + c];
            for (std::size_t j = 0; j < d; ++j) acc += p[c * d + j] * pooled[j];
            z[c] = acc;
        }
        return z;
    }

    DMatrix ctc_logits(const Tensor& frames) const {
        const std::size_t frames_n = frames.dim(0);
        DMatrix z(frames_n, vocab);
        for (std::size_t t = 0; t < frames_n; ++t) {
            const float* h = frames.data() + t * d;
            for (std::size_t v = 0; v < vocab; ++v) {
                const double* w = p.data() + ctc_w() + v * d;
                double acc = p[ctc_b() + v];
                for (std::size_t j = 0; j < d; ++j) acc += w[j] * h[j];
                z(t, v) = acc;
            }
        }
        return z;
    }
};

struct ClsTerm {
    double loss = 0.0;
    std::vector<double> grad;
    std::optional<double> kd_soft, kd_hard;
};

using ClsObjective = std::function<ClsTerm(std::size_t index, const std::vector<double>& logits, int label)>;

TrainResult fit_heads(const Checkpoint& ckpt, const std::vector<EncodedExample>& train,
                      const std::vector<EncodedExample>& val, const TrainOptions& options,
                      const ClsObjective& objective) {
    if (train.empty()) fail(ErrorKind::Parameter, "training set is empty");
    if (options.batch_size == 0) fail(ErrorKind::Parameter, "batch size must be positive");
    if (!(options.lambda >= 0.0)) fail(ErrorKind::Parameter, "lambda must be non-negative");
    const auto start = std::chrono::steady_clock::now();

    Heads heads = Heads::from(ckpt);
    AdamState adam(heads.p.size(), AdamHyper{options.lr});
    std::vector<double> grad(heads.p.size());
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(options.seed);
    const double lambda = options.lambda;

    TrainResult result;
    result.report.seed = options.seed;
    for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
        rng.shuffle(order);
        double sum_cls = 0, sum_asr = 0, sum_soft = 0, sum_hard = 0;
        bool has_kd = false;
        for (std::size_t begin = 0; begin < order.size(); begin += options.batch_size) {
            const std::size_t end = std::min(order.size(), begin + options.batch_size);
            const double batch = static_cast<double>(end - begin);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t b = begin; b < end; ++b) {
                const std::size_t idx = order[b];
                const EncodedExample& ex = train[idx];

                const ClsTerm cls = objective(idx, heads.cls_logits(ex.pooled), ex.label);
                sum_cls += cls.loss;
                if (cls.kd_soft) {
                    has_kd = true;
                    sum_soft += *cls.kd_soft;
                    sum_hard += *cls.kd_hard;
                }
                for (std::size_t c = 0; c < heads.classes; ++c) {
                    const double g = cls.grad[c] / batch;
                    for (std::size_t j = 0; j < heads.d; ++j) grad[c * heads.d + j] += g * ex.pooled[j];
                    grad[heads.cls_b() + c] += g;
                }

                const CtcResult ctc =
                    ctc_loss_and_grad(log_softmax_rows(heads.ctc_logits(ex.frames)), CtcTarget{ex.transcript});
                sum_asr += ctc.loss;
                if (lambda == 0.0) continue;
                const double scale =
                    lambda / (options.ctc_reduction == CtcReduction::MeanOverBatch ? batch : 1.0);
                for (std::size_t t = 0; t < ctc.grad.rows; ++t) {
                    const float* h = ex.frames.data() + t * heads.d;
                    for (std::size_t v = 0; v < heads.vocab; ++v) {
                        const double g = scale * ctc.grad(t, v);
                        double* gw = grad.data() + heads.ctc_w() + v * heads.d;
                        for (std::size_t j = 0; j < heads.d; ++j) gw[j] += g * h[j];
                        grad[heads.ctc_b() + v] += g;
                    }
                }
            }
            adam_step(heads.p, grad, adam);
        }
        const double n = static_cast<double>(train.size());
        const double asr = sum_asr / n;
        LossBreakdown mean = mtl_loss(sum_cls / n, std::span<const double>(&asr, 1), MtlWeights{{lambda}});
        if (has_kd) {
            mean.kd_soft = sum_soft / n;
            mean.kd_hard = sum_hard / n;
        }
        result.report.epochs.push_back({epoch, mean});
    }

    result.model = ckpt;
    heads.write(result.model);
    if (!val.empty()) result.report.validation = evaluate_heads(result.model, val);
    result.report.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

void require_compatible(const ModelConfig& a, const ModelConfig& b) {
    if (a.conv_layers != b.conv_layers || a.vocab_size != b.vocab_size || a.num_classes != b.num_classes) {
        fail(ErrorKind::Config, "teacher and student differ in conv geometry, vocabulary or class count");
    }
}

int predict(const std::array<float, 2>& logits) { return logits[1] > logits[0] ? 1 : 0; }

} // namespace

Metrics evaluate_heads(const Checkpoint& ckpt, const std::vector<EncodedExample>& examples) {
    std::vector<int> labels, preds;
    std::vector<double> scores;
    for (const EncodedExample& ex : examples) {
        const auto z = classify_pooled(ex.pooled, ckpt);
        labels.push_back(ex.label);
        preds.push_back(predict(z));
        const std::vector<double> zd{z[0], z[1]};
        scores.push_back(softmax_t(zd, 1.0)[1]);
    }
    Metrics m = classification_metrics(labels, preds);
    const bool both = std::count(labels.begin(), labels.end(), 1) > 0 && std::count(labels.begin(), labels.end(), 0) > 0;
    if (both) m.auc = roc_auc(scores, labels);
    return m;
}

TrainResult train_heads(const Checkpoint& ckpt, const std::vector<EncodedExample>& train,
                        const std::vector<EncodedExample>& val, const TrainOptions& options) {
    return fit_heads(ckpt, train, val, options, [](std::size_t, const std::vector<double>& z, int label) {
        LossGrad ce = cross_entropy(z, label);
        return ClsTerm{ce.loss, std::move(ce.grad), std::nullopt, std::nullopt};
    });
}

TrainResult train_heads(const Checkpoint& ckpt, const DatasetSplit& data, const TrainOptions& options) {
    if (data.train.empty()) fail(ErrorKind::Parameter, "training set is empty");
    return train_heads(ckpt, encode_dataset(ckpt, data.train, options.pool_layer),
                       encode_dataset(ckpt, data.val, options.pool_layer), options);
}

TrainResult distill(const Checkpoint& teacher, const Checkpoint& student, const DatasetSplit& data,
                    const DistillHyper& hyper, const TrainOptions& options) {
    hyper.validate();
    require_compatible(teacher.config, student.config);
    if (data.train.empty()) fail(ErrorKind::Parameter, "training set is empty");
    const std::uint32_t teacher_before = teacher.checksum();

    std::vector<std::vector<double>> teacher_logits;
    for (const EncodedExample& ex : encode_dataset(teacher, data.train, options.pool_layer)) {
        const auto z = classify_pooled(ex.pooled, teacher);
        teacher_logits.push_back({z[0], z[1]});
    }
    TrainResult r = fit_heads(student, encode_dataset(student, data.train, options.pool_layer),
                              encode_dataset(student, data.val, options.pool_layer), options,
                              [&](std::size_t idx, const std::vector<double>& z, int label) {
                                  KdResult kd = kd_loss(z, teacher_logits[idx], label, hyper);
                                  return ClsTerm{kd.loss, std::move(kd.grad), kd.soft, kd.hard};
                              });
    if (teacher.checksum() != teacher_before) fail(ErrorKind::Contract, "teacher weights changed during distillation");
    r.model.provenance.parent_checksum = student.checksum();
    r.model.provenance.history.push_back("distill alpha=" + std::to_string(hyper.alpha) +
                                         " T=" + std::to_string(hyper.temperature));
    return r;
}

double argmax_agreement(const Checkpoint& a, const Checkpoint& b, const std::vector<LabeledUtterance>& items) {
    if (items.empty()) fail(ErrorKind::Parameter, "agreement needs at least one utterance");
    std::size_t same = 0;
    for (const LabeledUtterance& u : items) {
        const Waveform w = normalize(u.waveform);
        same += predict(forward(w, a).toxicity_logits) == predict(forward(w, b).toxicity_logits) ? 1 : 0;
    }
    return static_cast<double>(same) / static_cast<double>(items.size());
}

std::vector<double> default_lambda_grid() { return {0.0, 0.05, 0.1, 0.2}; }

GridResult lambda_grid_search(const std::vector<double>& candidates, const Checkpoint& ckpt,
                              const DatasetSplit& data, const TrainOptions& options) {
    if (candidates.empty()) fail(ErrorKind::Parameter, "lambda grid is empty");
    const auto train = encode_dataset(ckpt, data.train, options.pool_layer);
    const auto val = encode_dataset(ckpt, data.val, options.pool_layer);

    GridResult result;
    {
        ParallelRegion region;
        std::vector<std::future<TrainResult>> branches;
        for (double lambda : candidates) {
            TrainOptions o = options;
            o.lambda = lambda;
            branches.push_back(std::async(std::launch::async, [&, o] { return train_heads(ckpt, train, val, o); }));
        }
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            TrainResult r = branches[i].get();
            result.entries.push_back({candidates[i], r.report.validation, std::move(r.report)});
        }
    }
    const GridEntry* best = nullptr;
    for (const GridEntry& e : result.entries) {
        if (!best || e.validation.macro_f1 > best->validation.macro_f1 ||
            (e.validation.macro_f1 == best->validation.macro_f1 && e.lambda < best->lambda)) {
            best = &e;
        }
    }
    result.best_lambda = best->lambda;
    return result;
}

} // namespace toxedge
