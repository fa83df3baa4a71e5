#pragma once

#include "toxedge/tensor.hpp"

#include <cstddef>
#include <vector>

namespace toxedge {

inline constexpr int kBlank = 0;

struct CtcTarget {
    std::vector<int> tokens; // ids in [1, V-1]
};

// Minimum frames needed to emit `target`: one per token plus one blank
// between each adjacent repeated pair.
std::size_t ctc_required_frames(const CtcTarget& target);

// Row-wise log-softmax in float64 ([T x V] logits to log-probabilities).
DMatrix log_softmax_rows(const DMatrix& logits);
DMatrix log_softmax_rows(const Tensor& logits);

// -log sum over alignments, via the log-space forward recursion over the
// blank-expanded target. Rows of exp(logprobs) must sum to 1 within 1e-6.
double ctc_loss(const DMatrix& logprobs, const CtcTarget& target);

// d loss / d logits (pre-softmax) from the alpha-beta recursions:
// softmax(logits) - occupation posterior. Takes log-probabilities.
DMatrix ctc_grad(const DMatrix& logprobs, const CtcTarget& target);

struct CtcResult {
    double loss = 0.0;
    DMatrix grad; // w.r.t. logits
};
CtcResult ctc_loss_and_grad(const DMatrix& logprobs, const CtcTarget& target);

// Enumerates all V^T frame paths. Refuses instances with V^T > 1e7.
double brute_force_ctc(const DMatrix& logprobs, const CtcTarget& target);

// Merge adjacent repeats, then drop blanks.
std::vector<int> collapse(const std::vector<int>& path);

// Per-frame argmax (ties to the lowest index), then collapse.
std::vector<int> greedy_decode(const DMatrix& logprobs);
std::vector<int> greedy_decode(const Tensor& logits);

} // namespace toxedge
