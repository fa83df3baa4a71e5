#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>

namespace toxedge {

// Binary classification summary. Class 1 is toxic.
struct Metrics {
    // confusion[actual][predicted]
    std::array<std::array<std::size_t, 2>, 2> confusion{};
    std::array<double, 2> precision{};
    std::array<double, 2> recall{};
    std::array<double, 2> f1{};
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    // Balanced accuracy: mean of per-class recalls.
    double weighted_accuracy = 0.0;
    std::optional<double> auc;

    std::size_t count() const;
};

inline constexpr const char* kWeightedAccuracyDefinition =
    "weighted accuracy = mean of per-class recalls (balanced accuracy)";

// Undefined ratios (0/0) are reported as 0.
Metrics classification_metrics(std::span<const int> labels, std::span<const int> preds);

// Mann-Whitney rank statistic; tied positive/negative pairs count 1/2.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

} // namespace toxedge
