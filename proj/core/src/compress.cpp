#include "toxedge/compress.hpp"

#include "toxedge/error.hpp"
#include "toxedge/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace toxedge {

namespace {

constexpr float kScaleFloor = 1e-12f;

std::vector<std::size_t> smallest_indices(std::size_t n, std::size_t count,
                                          const std::function<double(std::size_t)>& magnitude) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return magnitude(a) < magnitude(b); });
    idx.resize(count);
    return idx;
}

} // namespace

// Nearest level per weight, judged by the value dequantize() will return.
// True when every weight comes back within scale/2.
static bool quantize_row(std::span<const float> row, float scale, std::int8_t* out) {
    auto error = [&](double level, float v) {
        return std::abs(static_cast<double>(static_cast<float>(level) * scale) - v);
    };
    const double half = 0.5 * scale;
    bool ok = true;
    for (std::size_t c = 0; c < row.size(); ++c) {
        const double exact = static_cast<double>(row[c]) / scale;
        double level = std::clamp(std::nearbyint(exact), -127.0, 127.0);
        const double other = std::clamp(level + (exact > level ? 1.0 : -1.0), -127.0, 127.0);
        if (error(other, row[c]) < error(level, row[c])) level = other;
        out[c] = static_cast<std::int8_t>(level);
        ok = ok && error(level, row[c]) <= half;
    }
    return ok;
}

QTensor quantize_tensor(const Tensor& w) {
    if (w.rank() != 2) {
        fail(ErrorKind::Scheme, "symmetric per-channel quantization needs a rank-2 weight, got " +
                                    shape_string(w.shape()));
    }
    require_finite(w, "quantize_tensor input");
    QTensor q;
    q.shape = w.shape();
    q.values.resize(w.size());
    q.params.scheme = QuantScheme::SymmetricPerChannel;
    q.params.scales.resize(w.rows());
    q.params.zero_points.assign(w.rows(), 0);
    for (std::size_t r = 0; r < w.rows(); ++r) {
        const auto row = w.row(r);
        float peak = 0.0f;
        for (float v : row) peak = std::max(peak, std::fabs(v));
        float scale = std::max(peak / 127.0f, kScaleFloor);
        std::int8_t* out = q.values.data() + r * w.cols();
        // dequantize() rounds level * scale to float. For a weight within that
        // rounding of a half step both neighbouring levels miss by a hair over
        // scale/2; growing the scale by a few ulps moves every such weight off
        // the midpoint.
        for (int attempt = 0; attempt < 64; ++attempt) {
            if (quantize_row(row, scale, out)) break;
            scale = std::nextafter(scale, std::numeric_limits<float>::infinity());
        }
        q.params.scales[r] = scale;
    }
    return q;
}

Tensor dequantize(const QTensor& q) {
    Tensor t(q.shape);
    const std::size_t cols = q.cols();
    const bool per_tensor = q.params.scales.size() == 1;
    for (std::size_t r = 0; r < q.rows(); ++r) {
        const std::size_t ch = per_tensor ? 0 : r;
        const float scale = q.params.scales[ch];
        const std::int32_t zp = q.params.zero_points[ch];
        for (std::size_t c = 0; c < cols; ++c) {
            t[r * cols + c] = static_cast<float>(static_cast<std::int32_t>(q.values[r * cols + c]) - zp) * scale;
        }
    }
    return t;
}

ActivationQuant choose_activation_quant(const Tensor& x) {
    float lo = 0.0f, hi = 0.0f;
    for (float v : x.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    ActivationQuant q;
    q.scale = std::max((hi - lo) / 255.0f, kScaleFloor);
    const float zp = std::nearbyint(-128.0f - lo / q.scale);
    q.zero_point = static_cast<std::int32_t>(std::clamp(zp, -128.0f, 127.0f));
    return q;
}

std::int8_t quantize_value(float x, const ActivationQuant& q) {
    const float level = std::nearbyint(x / q.scale) + static_cast<float>(q.zero_point);
    return static_cast<std::int8_t>(std::clamp(level, -128.0f, 127.0f));
}

Tensor quantized_linear(const Tensor& x, const QTensor& w, const Tensor& bias) {
    if (x.rank() != 2 || w.cols() != x.dim(1)) {
        fail(ErrorKind::Shape, "quantized_linear weight " + shape_string(w.shape) + " incompatible with input " +
                                   shape_string(x.shape()));
    }
    if (!bias.empty() && bias.size() != w.rows()) {
        fail(ErrorKind::Shape, "quantized_linear bias " + shape_string(bias.shape()) + " vs weight " +
                                   shape_string(w.shape));
    }
    if (w.params.scheme != QuantScheme::SymmetricPerChannel) {
        fail(ErrorKind::Scheme, "quantized_linear expects symmetric per-channel weights");
    }
    const std::size_t n = x.dim(0), k = x.dim(1), out = w.rows();
    const ActivationQuant aq = choose_activation_quant(x);
    TrackedVector<std::int8_t> qx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) qx[i] = quantize_value(x[i], aq);

    // sum_k (qx - zx) * qw = sum_k qx * qw - zx * sum_k qw
    std::vector<std::int32_t> row_sums(out, 0);
    for (std::size_t o = 0; o < out; ++o) {
        std::int32_t s = 0;
        for (std::size_t j = 0; j < k; ++j) s += w.values[o * k + j];
        row_sums[o] = s;
    }

    Tensor y({n, out});
    for (std::size_t i = 0; i < n; ++i) {
        const std::int8_t* xr = qx.data() + i * k;
        for (std::size_t o = 0; o < out; ++o) {
            const std::int8_t* wr = w.values.data() + o * k;
            std::int32_t acc = 0;
            for (std::size_t j = 0; j < k; ++j) {
                acc += static_cast<std::int32_t>(xr[j]) * static_cast<std::int32_t>(wr[j]);
            }
            acc -= aq.zero_point * row_sums[o];
            const double value = static_cast<double>(acc) * aq.scale * w.params.scales[o];
            y[i * out + o] = static_cast<float>(value + (bias.empty() ? 0.0 : bias[o]));
        }
    }
    require_finite(y, "quantized_linear");
    return y;
}

Checkpoint quantize_model(const Checkpoint& ckpt, std::vector<std::string>* notices) {
    if (ckpt.has_int8()) {
        if (notices) notices->push_back("checkpoint is already quantized; returned unchanged");
        return ckpt;
    }
    Checkpoint out;
    out.config = ckpt.config;
    out.provenance = ckpt.provenance;
    out.provenance.parent_checksum = ckpt.checksum();
    out.provenance.history.push_back("quantize int8 symmetric-per-channel");
    for (const auto& [name, stored] : ckpt.tensors) {
        const Tensor& t = std::get<Tensor>(stored);
        if (is_weight_tensor(name)) {
            QTensor q = quantize_tensor(t.rank() == 2 ? t : t.reshaped({t.rows(), t.cols()}));
            q.shape = t.shape();
            out.tensors.emplace(name, std::move(q));
        } else {
            out.tensors.emplace(name, t);
        }
    }
    return out;
}

Checkpoint prune_magnitude(const Checkpoint& ckpt, const PruneSpec& spec) {
    if (!(spec.sparsity >= 0.0 && spec.sparsity < 1.0)) {
        fail(ErrorKind::Parameter, "sparsity must be in [0, 1), got " + std::to_string(spec.sparsity));
    }
    Checkpoint out = ckpt;
    out.provenance.parent_checksum = ckpt.checksum();
    out.provenance.history.push_back("prune magnitude sparsity=" + std::to_string(spec.sparsity));
    for (auto& [name, stored] : out.tensors) {
        if (!is_weight_tensor(name)) continue;
        if (auto* t = std::get_if<Tensor>(&stored)) {
            const auto count = static_cast<std::size_t>(std::floor(spec.sparsity * static_cast<double>(t->size())));
            auto v = t->values();
            for (std::size_t i : smallest_indices(v.size(), count, [&](std::size_t i) { return std::fabs(v[i]); })) {
                v[i] = 0.0f;
            }
        } else {
            auto& q = std::get<QTensor>(stored);
            const auto count = static_cast<std::size_t>(std::floor(spec.sparsity * static_cast<double>(q.values.size())));
            for (std::size_t i : smallest_indices(q.values.size(), count,
                                                  [&](std::size_t i) { return std::abs(static_cast<int>(q.values[i])); })) {
                q.values[i] = 0;
            }
        }
    }
    return out;
}

Checkpoint make_student(const Checkpoint& teacher, std::size_t student_layers) {
    const std::size_t teacher_layers = teacher.config.num_layers;
    if (student_layers < 1 || student_layers >= teacher_layers) {
        fail(ErrorKind::Config, "student layers must be in [1, " + std::to_string(teacher_layers - 1) + "], got " +
                                    std::to_string(student_layers));
    }
    Checkpoint student;
    student.config = teacher.config;
    student.config.num_layers = student_layers;
    student.provenance = teacher.provenance;
    student.provenance.parent_checksum = teacher.checksum();
    student.provenance.history.push_back("student layers=" + std::to_string(student_layers) + " of " +
                                         std::to_string(teacher_layers));
    for (const TensorSpec& spec : parameter_inventory(student.config)) {
        student.tensors.emplace(spec.name, teacher.at(spec.name));
    }
    return student;
}

std::size_t default_student_layers(std::size_t teacher_layers) {
    const auto l = static_cast<std::size_t>(std::lround(static_cast<double>(teacher_layers) * 5.0 / 12.0));
    return std::max<std::size_t>(1, l);
}

} // namespace toxedge
