#include "toxedge/losses.hpp"

#include "toxedge/error.hpp"
#include "toxedge/kernels.hpp"

#include <cmath>
#include <string>

namespace toxedge {

LossGrad cross_entropy(std::span<const double> logits, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size() || label > 1) {
        fail(ErrorKind::Label, "label " + std::to_string(label) + " outside {0, 1}");
    }
    const std::vector<double> logp = log_softmax(logits);
    LossGrad r;
    r.loss = -logp[static_cast<std::size_t>(label)];
    r.grad.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        r.grad[i] = std::exp(logp[i]) - (static_cast<int>(i) == label ? 1.0 : 0.0);
    }
    return r;
}

LossBreakdown mtl_loss(double cls, std::span<const double> aux_losses, const MtlWeights& weights) {
    if (aux_losses.size() != weights.lambdas.size()) {
        fail(ErrorKind::Parameter, "mtl_loss: " + std::to_string(aux_losses.size()) + " auxiliary losses but " +
                                       std::to_string(weights.lambdas.size()) + " weights");
    }
    LossBreakdown b;
    b.cls_loss = cls;
    b.total = cls;
    for (std::size_t n = 0; n < aux_losses.size(); ++n) {
        if (!(weights.lambdas[n] >= 0.0)) fail(ErrorKind::Parameter, "auxiliary weights must be non-negative");
        b.total += weights.lambdas[n] * aux_losses[n];
    }
    if (!aux_losses.empty()) {
        b.asr_loss = aux_losses[0];
        b.lambda = weights.lambdas[0];
    }
    return b;
}

double kl_div(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size() || p.empty()) fail(ErrorKind::Parameter, "kl_div needs equal, non-empty inputs");
    double sp = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0 || q[i] < 0.0) fail(ErrorKind::Contract, "kl_div inputs must be non-negative");
        sp += p[i];
        sq += q[i];
    }
    if (std::fabs(sp - 1.0) > 1e-6 || std::fabs(sq - 1.0) > 1e-6) {
        fail(ErrorKind::Contract, "kl_div inputs must be normalized");
    }
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) kl += p[i] * std::log(p[i] / std::max(q[i], 1e-12));
    }
    return std::max(0.0, kl);
}

void DistillHyper::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorKind::Parameter, "distillation alpha must be in [0, 1]");
    if (!(temperature > 0.0)) fail(ErrorKind::Parameter, "distillation temperature must be positive");
}

KdResult kd_loss(std::span<const double> student_logits, std::span<const double> teacher_logits, int hard_label,
                 const DistillHyper& hyper) {
    hyper.validate();
    if (student_logits.size() != teacher_logits.size()) {
        fail(ErrorKind::Parameter, "student and teacher logits differ in length");
    }
    const double a = hyper.alpha, t = hyper.temperature;
    const LossGrad ce = cross_entropy(student_logits, hard_label);
    const std::vector<double> pt = softmax_t(teacher_logits, t);
    const std::vector<double> qs = softmax_t(student_logits, t);

    KdResult r;
    r.hard = ce.loss;
    r.soft = t * t * kl_div(pt, qs);
    r.loss = a * r.hard + (1.0 - a) * r.soft;
    r.grad.resize(student_logits.size());
    // d/ds [T^2 KL(p || softmax(s / T))] = T * (softmax(s / T) - p)
    for (std::size_t i = 0; i < r.grad.size(); ++i) {
        r.grad[i] = a * ce.grad[i] + (1.0 - a) * t * (qs[i] - pt[i]);
    }
    return r;
}

} // namespace toxedge
