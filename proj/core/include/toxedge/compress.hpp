#pragma once

#include "toxedge/checkpoint.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace toxedge {

// Symmetric per-output-channel int8: scale_c = max|w_c| / 127 (floored at
// 1e-12), q = clamp(round(w / scale_c), -127, 127). Only rank-2 input.
QTensor quantize_tensor(const Tensor& w);

// (q - zero_point) * scale, channel-wise along axis 0.
Tensor dequantize(const QTensor& q);

// Dynamic per-tensor affine activation quantization. The observed range is
// widened to contain 0; scale = (max - min) / 255, zero_point =
// round(-128 - min / scale).
struct ActivationQuant {
    float scale = 1.0f;
    std::int32_t zero_point = 0;
};
ActivationQuant choose_activation_quant(const Tensor& x);
std::int8_t quantize_value(float x, const ActivationQuant& q);

// y = dequant(quant(x) * Wq^T) + bias with int32 accumulation.
Tensor quantized_linear(const Tensor& x, const QTensor& w, const Tensor& bias);

// Every weight matrix (conv kernels viewed per output channel) becomes int8;
// biases and norm parameters stay f32. An already-quantized checkpoint is
// returned unchanged with a notice appended to `notices`.
Checkpoint quantize_model(const Checkpoint& ckpt, std::vector<std::string>* notices = nullptr);

struct PruneSpec {
    double sparsity = 0.5; // in [0, 1)
};

// Per weight tensor, zeroes the floor(sparsity * n) smallest-magnitude
// entries; ties go to the lower flat index. Storage stays dense.
Checkpoint prune_magnitude(const Checkpoint& ckpt, const PruneSpec& spec);

// Keeps the conv stack, projection, first `student_layers` transformer
// layers and both heads.
Checkpoint make_student(const Checkpoint& teacher, std::size_t student_layers);

// Layer count used by default for students: round(L * 5 / 12), at least 1.
std::size_t default_student_layers(std::size_t teacher_layers);

} // namespace toxedge
