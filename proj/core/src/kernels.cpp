#include "toxedge/kernels.hpp"

#include "toxedge/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace toxedge {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        fail(ErrorKind::Shape, std::string(what) + " expects rank " + std::to_string(rank) +
                                   ", got " + shape_string(t.shape()));
    }
}

// Core of linear(): out[i][o] = sum_k x[i][k] * w[o][k]. Blocks of 2 input
// rows by 4 weight rows keep eight independent float64 accumulators live.
void dot_rows(const float* x, std::size_t n, const float* w, std::size_t out, std::size_t k,
              float* y, const float* bias) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float* x0 = x + i * k;
        const float* x1 = x0 + k;
        std::size_t o = 0;
        for (; o + 4 <= out; o += 4) {
            const float* w0 = w + o * k;
            const float* w1 = w0 + k;
            const float* w2 = w1 + k;
            const float* w3 = w2 + k;
            double a00 = 0, a01 = 0, a02 = 0, a03 = 0;
            double a10 = 0, a11 = 0, a12 = 0, a13 = 0;
            for (std::size_t j = 0; j < k; ++j) {
                const double u = x0[j];
                const double v = x1[j];
                const double c0 = w0[j], c1 = w1[j], c2 = w2[j], c3 = w3[j];
                a00 += u * c0; a01 += u * c1; a02 += u * c2; a03 += u * c3;
                a10 += v * c0; a11 += v * c1; a12 += v * c2; a13 += v * c3;
            }
            const double b0 = bias ? bias[o] : 0.0, b1 = bias ? bias[o + 1] : 0.0;
            const double b2 = bias ? bias[o + 2] : 0.0, b3 = bias ? bias[o + 3] : 0.0;
            float* y0 = y + i * out + o;
            float* y1 = y0 + out;
            y0[0] = static_cast<float>(a00 + b0); y0[1] = static_cast<float>(a01 + b1);
            y0[2] = static_cast<float>(a02 + b2); y0[3] = static_cast<float>(a03 + b3);
            y1[0] = static_cast<float>(a10 + b0); y1[1] = static_cast<float>(a11 + b1);
            y1[2] = static_cast<float>(a12 + b2); y1[3] = static_cast<float>(a13 + b3);
        }
        for (; o < out; ++o) {
            const float* wr = w + o * k;
            double a0 = 0, a1 = 0;
            for (std::size_t j = 0; j < k; ++j) {
                a0 += static_cast<double>(x0[j]) * wr[j];
                a1 += static_cast<double>(x1[j]) * wr[j];
            }
            const double b = bias ? bias[o] : 0.0;
            y[i * out + o] = static_cast<float>(a0 + b);
            y[(i + 1) * out + o] = static_cast<float>(a1 + b);
        }
    }
    for (; i < n; ++i) {
        const float* xr = x + i * k;
        for (std::size_t o = 0; o < out; ++o) {
            const float* wr = w + o * k;
            double a = 0;
            for (std::size_t j = 0; j < k; ++j) a += static_cast<double>(xr[j]) * wr[j];
            y[i * out + o] = static_cast<float>(a + (bias ? bias[o] : 0.0));
        }
    }
}

} // namespace

void require_finite(const Tensor& t, const char* where) {
    for (float v : t.values()) {
        if (!std::isfinite(v)) {
            fail(ErrorKind::Contract, std::string("non-finite value produced by ") + where);
        }
    }
}

Tensor transpose(const Tensor& x) {
    require_rank(x, 2, "transpose");
    const std::size_t r = x.dim(0), c = x.dim(1);
    Tensor t({c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) t[j * r + i] = x[i * c + j];
    return t;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    if (a.dim(1) != b.dim(0)) {
        fail(ErrorKind::Shape, "matmul inner dimensions differ: " + shape_string(a.shape()) +
                                   " * " + shape_string(b.shape()));
    }
    const Tensor bt = transpose(b);
    Tensor c({a.dim(0), b.dim(1)});
    dot_rows(a.data(), a.dim(0), bt.data(), b.dim(1), a.dim(1), c.data(), nullptr);
    require_finite(c, "matmul");
    return c;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
    require_rank(x, 2, "linear input");
    if (w.rank() < 2 || w.cols() != x.dim(1)) {
        fail(ErrorKind::Shape, "linear weight " + shape_string(w.shape()) +
                                   " incompatible with input " + shape_string(x.shape()));
    }
    if (!bias.empty() && bias.size() != w.rows()) {
        fail(ErrorKind::Shape, "linear bias " + shape_string(bias.shape()) +
                                   " does not match weight " + shape_string(w.shape()));
    }
    Tensor y({x.dim(0), w.rows()});
    dot_rows(x.data(), x.dim(0), w.data(), w.rows(), x.dim(1), y.data(),
             bias.empty() ? nullptr : bias.data());
    require_finite(y, "linear");
    return y;
}

std::vector<double> softmax_t(std::span<const double> logits, double temperature) {
    if (!(temperature > 0.0)) {
        fail(ErrorKind::Parameter, "softmax temperature must be positive");
    }
    if (logits.empty()) fail(ErrorKind::EmptyInput, "softmax of an empty sequence");
    const double top = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp((logits[i] - top) / temperature);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

std::vector<double> log_softmax(std::span<const double> logits) {
    if (logits.empty()) fail(ErrorKind::EmptyInput, "log_softmax of an empty sequence");
    const double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - top);
    const double lse = top + std::log(sum);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = logits[i] - lse;
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    if (!(eps > 0.0)) fail(ErrorKind::Parameter, "layer_norm eps must be positive");
    if (x.rank() == 0) fail(ErrorKind::Shape, "layer_norm of an empty tensor");
    const std::size_t d = x.shape().back();
    if (gamma.size() != d || beta.size() != d) {
        fail(ErrorKind::Shape, "layer_norm width " + std::to_string(d) + " vs gamma " +
                                   shape_string(gamma.shape()) + " beta " +
                                   shape_string(beta.shape()));
    }
    Tensor y(x.shape());
    const std::size_t rows = x.size() / d;
    for (std::size_t r = 0; r < rows; ++r) {
        const float* in = x.data() + r * d;
        float* out = y.data() + r * d;
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += in[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double c = in[j] - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < d; ++j) {
            out[j] = static_cast<float>((in[j] - mean) * inv * gamma[j] + beta[j]);
        }
    }
    require_finite(y, "layer_norm");
    return y;
}

double gelu(double x) noexcept { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

void gelu_inplace(Tensor& x) noexcept {
    for (float& v : x.values()) v = static_cast<float>(gelu(v));
}

std::size_t conv_output_length(std::size_t length, std::size_t kernel, std::size_t stride) {
    if (kernel == 0 || stride == 0) fail(ErrorKind::Parameter, "kernel and stride must be positive");
    if (kernel > length) {
        fail(ErrorKind::InputTooShort, "input length " + std::to_string(length) +
                                           " shorter than kernel " + std::to_string(kernel));
    }
    return (length - kernel) / stride + 1;
}

Tensor im2col(const Tensor& x, std::size_t kernel, std::size_t stride) {
    require_rank(x, 2, "im2col");
    const std::size_t c_in = x.dim(0), len = x.dim(1);
    const std::size_t out_len = conv_output_length(len, kernel, stride);
    Tensor cols({out_len, c_in * kernel});
    for (std::size_t t = 0; t < out_len; ++t) {
        float* dst = cols.data() + t * c_in * kernel;
        for (std::size_t c = 0; c < c_in; ++c) {
            const float* src = x.data() + c * len + t * stride;
            std::copy(src, src + kernel, dst + c * kernel);
        }
    }
    return cols;
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride) {
    require_rank(x, 2, "conv1d input");
    require_rank(w, 3, "conv1d weight");
    if (w.dim(1) != x.dim(0)) {
        fail(ErrorKind::Shape, "conv1d weight " + shape_string(w.shape()) + " vs input " +
                                   shape_string(x.shape()));
    }
    const Tensor cols = im2col(x, w.dim(2), stride);
    return transpose(linear(cols, w, bias));
}

Tensor mean_pool(const Tensor& frames) {
    if (frames.rank() != 2 || frames.dim(0) == 0) {
        fail(ErrorKind::EmptyInput, "mean_pool needs at least one frame");
    }
    const std::size_t n = frames.dim(0), d = frames.dim(1);
    std::vector<double> acc(d, 0.0);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t j = 0; j < d; ++j) acc[j] += frames[t * d + j];
    Tensor out({d});
    for (std::size_t j = 0; j < d; ++j) out[j] = static_cast<float>(acc[j] / static_cast<double>(n));
    return out;
}

} // namespace toxedge
