#include "toxedge/metrics.hpp"

#include "toxedge/error.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace toxedge {

std::size_t Metrics::count() const {
    return confusion[0][0] + confusion[0][1] + confusion[1][0] + confusion[1][1];
}

Metrics classification_metrics(std::span<const int> labels, std::span<const int> preds) {
    if (labels.size() != preds.size()) {
        fail(ErrorKind::Parameter, "metrics: " + std::to_string(labels.size()) + " labels vs " +
                                       std::to_string(preds.size()) + " predictions");
    }
    if (labels.empty()) fail(ErrorKind::Parameter, "metrics need at least one example");
    Metrics m;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if ((labels[i] != 0 && labels[i] != 1) || (preds[i] != 0 && preds[i] != 1)) {
            fail(ErrorKind::Label, "labels and predictions must be 0 or 1");
        }
        ++m.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(preds[i])];
    }
    auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
    for (std::size_t c = 0; c < 2; ++c) {
        const double tp = static_cast<double>(m.confusion[c][c]);
        const double predicted = static_cast<double>(m.confusion[0][c] + m.confusion[1][c]);
        const double actual = static_cast<double>(m.confusion[c][0] + m.confusion[c][1]);
        m.precision[c] = ratio(tp, predicted);
        m.recall[c] = ratio(tp, actual);
        m.f1[c] = ratio(2.0 * tp, predicted + actual);
    }
    const double n = static_cast<double>(labels.size());
    m.accuracy = static_cast<double>(m.confusion[0][0] + m.confusion[1][1]) / n;
    m.macro_f1 = (m.f1[0] + m.f1[1]) / 2.0;
    m.weighted_accuracy = (m.recall[0] + m.recall[1]) / 2.0;
    return m;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) fail(ErrorKind::Parameter, "roc_auc: scores and labels differ in length");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Midranks for ties, then the Mann-Whitney U of the positive class.
    double positives = 0.0, negatives = 0.0, rank_sum = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) {
                rank_sum += midrank;
                positives += 1.0;
            } else if (labels[order[k]] == 0) {
                negatives += 1.0;
            } else {
                fail(ErrorKind::Label, "roc_auc labels must be 0 or 1");
            }
        }
        i = j;
    }
    if (positives == 0.0 || negatives == 0.0) fail(ErrorKind::UndefinedAuc, "roc_auc needs both classes present");
    const double u = rank_sum - positives * (positives + 1.0) / 2.0;
    return u / (positives * negatives);
}

} // namespace toxedge
