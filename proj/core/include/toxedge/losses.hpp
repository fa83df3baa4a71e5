#pragma once

#include <optional>
#include <span>
#include <vector>

namespace toxedge {

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad; // w.r.t. the logits passed in
};

// -log softmax(logits)[label]; grad = softmax(logits) - onehot(label).
LossGrad cross_entropy(std::span<const double> logits, int label);

struct MtlWeights {
    std::vector<double> lambdas; // one per auxiliary task, all >= 0
};

struct LossBreakdown {
    double cls_loss = 0.0;
    double asr_loss = 0.0; // first auxiliary loss
    double lambda = 0.0;   // first auxiliary weight
    double total = 0.0;    // cls + sum lambda_n * aux_n
    std::optional<double> kd_soft;
    std::optional<double> kd_hard;
};

// total = cls + sum_n lambdas[n] * aux_losses[n].
LossBreakdown mtl_loss(double cls, std::span<const double> aux_losses, const MtlWeights& weights);

// sum p_i ln(p_i / q_i) with 0 ln 0 = 0; q is floored at 1e-12.
double kl_div(std::span<const double> p, std::span<const double> q);

struct DistillHyper {
    double alpha = 0.5;       // weight of the hard-label term, in [0, 1]
    double temperature = 4.0; // > 0

    void validate() const;
};

struct KdResult {
    double loss = 0.0;
    double hard = 0.0; // cross entropy against the label
    double soft = 0.0; // T^2 * KL(teacher_T || student_T)
    std::vector<double> grad; // w.r.t. student logits
};

// alpha * CE(student, label) + (1 - alpha) * T^2 * KL(softmax(teacher / T) || softmax(student / T)).
// The teacher is a constant: no gradient flows to it.
KdResult kd_loss(std::span<const double> student_logits, std::span<const double> teacher_logits, int hard_label,
                 const DistillHyper& hyper);

} // namespace toxedge
