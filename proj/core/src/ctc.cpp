#include "toxedge/ctc.hpp"

#include "toxedge/error.hpp"
#include "toxedge/kernels.hpp"

#include <cmath>
#include <limits>

namespace toxedge {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

void validate(const DMatrix& lp, const CtcTarget& target) {
    if (lp.rows == 0 || lp.cols < 2) fail(ErrorKind::Shape, "ctc needs at least one frame and two symbols");
    for (std::size_t t = 0; t < lp.rows; ++t) {
        double sum = 0.0;
        for (double v : lp.row(t)) sum += std::exp(v);
        if (std::fabs(sum - 1.0) > 1e-6) {
            fail(ErrorKind::Contract, "ctc frame " + std::to_string(t) + " is not normalized (sum " +
                                          std::to_string(sum) + ")");
        }
    }
    for (int tok : target.tokens) {
        if (tok <= kBlank || static_cast<std::size_t>(tok) >= lp.cols) {
            fail(ErrorKind::Label, "ctc target token " + std::to_string(tok) + " outside [1, " +
                                       std::to_string(lp.cols - 1) + "]");
        }
    }
    const std::size_t need = ctc_required_frames(target);
    if (need > lp.rows) {
        fail(ErrorKind::InfeasibleTarget, "target needs " + std::to_string(need) + " frames, only " +
                                              std::to_string(lp.rows) + " available");
    }
}

std::vector<int> expand(const CtcTarget& target) {
    std::vector<int> ext(2 * target.tokens.size() + 1, kBlank);
    for (std::size_t i = 0; i < target.tokens.size(); ++i) ext[2 * i + 1] = target.tokens[i];
    return ext;
}

// alpha(t, s): log prob of emitting ext[0..s] in frames 0..t, ending in s.
DMatrix forward_vars(const DMatrix& lp, const std::vector<int>& ext) {
    const std::size_t frames = lp.rows, states = ext.size();
    DMatrix alpha(frames, states, kNegInf);
    alpha(0, 0) = lp(0, ext[0]);
    if (states > 1) alpha(0, 1) = lp(0, ext[1]);
    for (std::size_t t = 1; t < frames; ++t) {
        for (std::size_t s = 0; s < states; ++s) {
            double a = alpha(t - 1, s);
            if (s >= 1) a = log_add(a, alpha(t - 1, s - 1));
            if (s >= 2 && ext[s] != kBlank && ext[s] != ext[s - 2]) a = log_add(a, alpha(t - 1, s - 2));
            alpha(t, s) = a == kNegInf ? kNegInf : a + lp(t, ext[s]);
        }
    }
    return alpha;
}

// beta(t, s): log prob of emitting ext[s..] in frames t..T-1, starting in s
// at frame t (frame t's emission included).
DMatrix backward_vars(const DMatrix& lp, const std::vector<int>& ext) {
    const std::size_t frames = lp.rows, states = ext.size();
    DMatrix beta(frames, states, kNegInf);
    beta(frames - 1, states - 1) = lp(frames - 1, ext[states - 1]);
    if (states > 1) beta(frames - 1, states - 2) = lp(frames - 1, ext[states - 2]);
    for (std::size_t t = frames - 1; t-- > 0;) {
        for (std::size_t s = 0; s < states; ++s) {
            double b = beta(t + 1, s);
            if (s + 1 < states) b = log_add(b, beta(t + 1, s + 1));
            if (s + 2 < states && ext[s] != kBlank && ext[s] != ext[s + 2]) b = log_add(b, beta(t + 1, s + 2));
            beta(t, s) = b == kNegInf ? kNegInf : b + lp(t, ext[s]);
        }
    }
    return beta;
}

double total_log_prob(const DMatrix& alpha) {
    const std::size_t last = alpha.rows - 1, states = alpha.cols;
    double ll = alpha(last, states - 1);
    if (states > 1) ll = log_add(ll, alpha(last, states - 2));
    return ll;
}

} // namespace

std::size_t ctc_required_frames(const CtcTarget& target) {
    std::size_t need = target.tokens.size();
    for (std::size_t i = 1; i < target.tokens.size(); ++i) {
        if (target.tokens[i] == target.tokens[i - 1]) ++need;
    }
    return need;
}

DMatrix log_softmax_rows(const DMatrix& logits) {
    DMatrix out(logits.rows, logits.cols);
    for (std::size_t t = 0; t < logits.rows; ++t) {
        const auto row = log_softmax(logits.row(t));
        std::copy(row.begin(), row.end(), out.row(t).begin());
    }
    return out;
}

DMatrix log_softmax_rows(const Tensor& logits) { return log_softmax_rows(DMatrix::from(logits)); }

double ctc_loss(const DMatrix& logprobs, const CtcTarget& target) {
    validate(logprobs, target);
    const double ll = total_log_prob(forward_vars(logprobs, expand(target)));
    return std::max(0.0, -ll);
}

CtcResult ctc_loss_and_grad(const DMatrix& logprobs, const CtcTarget& target) {
    validate(logprobs, target);
    const std::vector<int> ext = expand(target);
    const DMatrix alpha = forward_vars(logprobs, ext);
    const DMatrix beta = backward_vars(logprobs, ext);
    const double ll = total_log_prob(alpha);

    CtcResult r;
    r.loss = std::max(0.0, -ll);
    r.grad = DMatrix(logprobs.rows, logprobs.cols);
    std::vector<double> occupancy(logprobs.cols);
    for (std::size_t t = 0; t < logprobs.rows; ++t) {
        std::fill(occupancy.begin(), occupancy.end(), kNegInf);
        // alpha and beta both include frame t's emission; remove one copy.
        for (std::size_t s = 0; s < ext.size(); ++s) {
            const double ab = alpha(t, s) + beta(t, s);
            if (ab == kNegInf) continue;
            occupancy[ext[s]] = log_add(occupancy[ext[s]], ab - logprobs(t, ext[s]));
        }
        for (std::size_t v = 0; v < logprobs.cols; ++v) {
            const double post = occupancy[v] == kNegInf ? 0.0 : std::exp(occupancy[v] - ll);
            r.grad(t, v) = std::exp(logprobs(t, v)) - post;
        }
    }
    return r;
}

DMatrix ctc_grad(const DMatrix& logprobs, const CtcTarget& target) {
    return ctc_loss_and_grad(logprobs, target).grad;
}

double brute_force_ctc(const DMatrix& logprobs, const CtcTarget& target) {
    const std::size_t frames = logprobs.rows, vocab = logprobs.cols;
    double paths = 1.0;
    for (std::size_t t = 0; t < frames; ++t) paths *= static_cast<double>(vocab);
    if (paths > 1e7) fail(ErrorKind::OracleSize, "brute-force CTC limited to V^T <= 1e7");
    validate(logprobs, target);

    const auto count = static_cast<std::size_t>(paths);
    std::vector<int> path(frames, 0);
    double total = 0.0;
    for (std::size_t code = 0; code < count; ++code) {
        std::size_t rest = code;
        double logp = 0.0;
        for (std::size_t t = 0; t < frames; ++t) {
            path[t] = static_cast<int>(rest % vocab);
            rest /= vocab;
            logp += logprobs(t, static_cast<std::size_t>(path[t]));
        }
        if (collapse(path) == target.tokens) total += std::exp(logp);
    }
    if (total <= 0.0) fail(ErrorKind::InfeasibleTarget, "no path collapses to the target");
    return std::max(0.0, -std::log(total));
}

std::vector<int> collapse(const std::vector<int>& path) {
    std::vector<int> out;
    int prev = -1;
    for (int id : path) {
        if (id != prev && id != kBlank) out.push_back(id);
        prev = id;
    }
    return out;
}

std::vector<int> greedy_decode(const DMatrix& logprobs) {
    std::vector<int> path(logprobs.rows);
    for (std::size_t t = 0; t < logprobs.rows; ++t) {
        std::size_t best = 0;
        for (std::size_t v = 1; v < logprobs.cols; ++v) {
            if (logprobs(t, v) > logprobs(t, best)) best = v;
        }
        path[t] = static_cast<int>(best);
    }
    return collapse(path);
}

std::vector<int> greedy_decode(const Tensor& logits) { return greedy_decode(DMatrix::from(logits)); }

} // namespace toxedge
