#pragma once

#include "toxedge/audio.hpp"
#include "toxedge/checkpoint.hpp"
#include "toxedge/losses.hpp"
#include "toxedge/metrics.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace toxedge {

// ---------------------------------------------------------------- Adam ----

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamHyper hyper;
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;

    AdamState() = default;
    AdamState(std::size_t n, AdamHyper h) : hyper(h), m(n, 0.0), v(n, 0.0) {}
};

// Bias-corrected Adam update of `params` in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

// ------------------------------------------------------------ splitting ---

struct SplitRatios {
    double train = 0.70;
    double val = 0.15;
    double test = 0.15;
};

struct SplitIndices {
    std::vector<std::size_t> train, val, test;
};

// Seeded, label-stratified split. Validation and test sizes are floored;
// the remainder goes to train.
SplitIndices split_indices(std::span<const int> labels, const SplitRatios& ratios, std::uint64_t seed);

struct DatasetSplit {
    std::vector<LabeledUtterance> train, val, test;
};

DatasetSplit split_dataset(const std::vector<LabeledUtterance>& items, const SplitRatios& ratios,
                           std::uint64_t seed);

// ------------------------------------------------------------- training ---

enum class CtcReduction { MeanOverBatch, SumOverBatch };

struct TrainOptions {
    double lambda = 0.1;
    std::size_t epochs = 30;
    std::size_t batch_size = 8;
    double lr = 1e-2;
    std::uint64_t seed = 1234;
    CtcReduction ctc_reduction = CtcReduction::MeanOverBatch;
    std::size_t pool_layer = 0;

    // Fine-tuning values used for the full-size model: lr 5e-5, batch 2, 100 epochs.
    static TrainOptions full_scale();
};

struct EpochRecord {
    std::size_t epoch = 0;
    LossBreakdown mean; // averaged over training examples
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    Metrics validation;
    double wall_s = 0.0;
    std::uint64_t seed = 0;
};

// JSON Lines: one {"type":"epoch",...} record per epoch, then one summary.
std::string report_jsonl(const TrainReport& report);

// Frozen-encoder outputs for one utterance.
struct EncodedExample {
    Tensor pooled; // [d]
    Tensor frames; // [T x d]
    int label = 0;
    std::vector<int> transcript;
};

// Normalizes every waveform and runs the encoder once.
std::vector<EncodedExample> encode_dataset(const Checkpoint& ckpt, const std::vector<LabeledUtterance>& items,
                                           std::size_t pool_layer = 0);

struct TrainResult {
    Checkpoint model;
    TrainReport report;
};

// Trains the classifier and CTC heads on cls + lambda * ctc with the
// encoder frozen.
TrainResult train_heads(const Checkpoint& ckpt, const std::vector<EncodedExample>& train,
                        const std::vector<EncodedExample>& val, const TrainOptions& options);
TrainResult train_heads(const Checkpoint& ckpt, const DatasetSplit& data, const TrainOptions& options);

// Validation metrics from cached encodings using the checkpoint's heads.
Metrics evaluate_heads(const Checkpoint& ckpt, const std::vector<EncodedExample>& examples);

// Student heads train on kd_loss + lambda * ctc. Teacher and student must
// share conv geometry, vocabulary and class count.
TrainResult distill(const Checkpoint& teacher, const Checkpoint& student, const DatasetSplit& data,
                    const DistillHyper& hyper, const TrainOptions& options);

// Fraction of utterances on which both models predict the same class.
double argmax_agreement(const Checkpoint& a, const Checkpoint& b, const std::vector<LabeledUtterance>& items);

struct GridEntry {
    double lambda = 0.0;
    Metrics validation;
    TrainReport report;
};

struct GridResult {
    double best_lambda = 0.0;
    std::vector<GridEntry> entries;
};

std::vector<double> default_lambda_grid();

// Trains heads once per candidate with identical seeds and keeps the best
// validation macro F1 (ties go to the smaller lambda).
GridResult lambda_grid_search(const std::vector<double>& candidates, const Checkpoint& ckpt,
                              const DatasetSplit& data, const TrainOptions& options);

} // namespace toxedge
