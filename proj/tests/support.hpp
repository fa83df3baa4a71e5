#pragma once

#include <toxedge/toxedge.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace toxedge::test {

// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "toxedge") {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// Kind of the toxedge::Error thrown by f, or nullopt if it returns.
template <class F>
std::optional<ErrorKind> error_kind(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return std::nullopt;
}

inline Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (float& v : t.values()) v = static_cast<float>(rng.normal(0.0, scale));
    return t;
}

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal(0.0, scale);
    return v;
}

// Triple loop in double, a[m x k] * b[k x n].
inline std::vector<double> naive_matmul(const Tensor& a, const Tensor& b) {
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> c(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += static_cast<double>(a[i * k + p]) * b[p * n + j];
            c[i * n + j] = s;
        }
    return c;
}

// Central differences of f around x.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double step) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + step;
        const double up = f(x);
        x[i] = keep - step;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * step);
    }
    return g;
}

// max_i |a_i - b_i| / max(1, |b_i|), the relative check used for gradients.
inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
    }
    return worst;
}

inline DMatrix random_logits(Rng& rng, std::size_t t, std::size_t v, double scale = 1.5) {
    DMatrix m(t, v);
    for (double& x : m.data) x = rng.normal(0.0, scale);
    return m;
}

// Trapezoid area under the ROC curve from a sweep over every distinct
// score threshold.
inline double threshold_sweep_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    std::vector<double> thresholds(scores);
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    double pos = 0, neg = 0;
    for (int l : labels) (l ? pos : neg) += 1;
    double area = 0.0, prev_tpr = 0.0, prev_fpr = 0.0;
    for (double th : thresholds) {
        double tp = 0, fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= th) (labels[i] ? tp : fp) += 1;
        }
        const double tpr = tp / pos, fpr = fp / neg;
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    return area;
}

inline Waveform tone(double seconds, double hz, double amp = 0.5) {
    Waveform w;
    const auto n = static_cast<std::size_t>(std::lround(seconds * kSampleRate));
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        w.samples[i] = static_cast<float>(amp * std::sin(2.0 * 3.14159265358979323846 * hz * static_cast<double>(i) /
                                                         kSampleRate));
    }
    return w;
}

} // namespace toxedge::test
