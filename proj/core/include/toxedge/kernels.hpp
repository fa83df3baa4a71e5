#pragma once

#include "toxedge/tensor.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace toxedge {

// c = a[m x k] * b[k x n]. Reductions accumulate in float64.
Tensor matmul(const Tensor& a, const Tensor& b);

// y[n x out] = x[n x k] * w^T + bias, with w stored [out x k] (or any rank
// whose trailing dimensions flatten to k). `bias` may be empty.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

Tensor transpose(const Tensor& x);

// softmax(logits / temperature) with max subtraction.
std::vector<double> softmax_t(std::span<const double> logits, double temperature = 1.0);
std::vector<double> log_softmax(std::span<const double> logits);

// Per last-axis row: (x - mean) / sqrt(var + eps) * gamma + beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Exact x * Phi(x).
double gelu(double x) noexcept;
void gelu_inplace(Tensor& x) noexcept;

std::size_t conv_output_length(std::size_t length, std::size_t kernel, std::size_t stride);

// Valid (unpadded) cross-correlation. x[c_in x L], w[c_out x c_in x k].
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride);

// Unfolds x[c_in x L] into [L_out x (c_in * k)] patches, matching the
// flattened [c_out, c_in, k] kernel layout.
Tensor im2col(const Tensor& x, std::size_t kernel, std::size_t stride);

// Column-wise mean over the time axis of frames[T x d].
Tensor mean_pool(const Tensor& frames);

// Throws ErrorKind::Contract when any value is NaN or infinite.
void require_finite(const Tensor& t, const char* where);

} // namespace toxedge
