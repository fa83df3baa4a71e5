#pragma once

#include "toxedge/config.hpp"
#include "toxedge/memory.hpp"
#include "toxedge/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace toxedge {

enum class QuantScheme { SymmetricPerChannel, AffinePerTensor };

struct QuantParams {
    QuantScheme scheme = QuantScheme::SymmetricPerChannel;
    std::vector<float> scales;          // one per channel (axis 0), or one
    std::vector<std::int32_t> zero_points; // same length as scales
    int bits = 8;

    bool operator==(const QuantParams&) const = default;
};

// int8 tensor with its dequantization metadata. Shape may be rank 3 (conv
// kernels); channels always run along axis 0.
struct QTensor {
    Shape shape;
    TrackedVector<std::int8_t> values;
    QuantParams params;

    std::size_t rows() const noexcept { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const noexcept { return rows() == 0 ? 0 : values.size() / rows(); }

    bool operator==(const QTensor&) const = default;
};

using StoredTensor = std::variant<Tensor, QTensor>;

enum class DType { F32, Int8 };

DType dtype_of(const StoredTensor& t) noexcept;
const Shape& shape_of(const StoredTensor& t) noexcept;
std::string dtype_name(DType d);

struct Provenance {
    std::uint64_t seed = 0;
    std::uint32_t parent_checksum = 0;
    std::vector<std::string> history;

    bool operator==(const Provenance&) const = default;
};

// Named-tensor weight store. Immutable by convention once built; any number
// of forward passes may share one instance.
struct Checkpoint {
    ModelConfig config;
    std::map<std::string, StoredTensor> tensors;
    Provenance provenance;

    const StoredTensor& at(const std::string& name) const;
    const Tensor& f32(const std::string& name) const;
    Tensor& f32_mut(const std::string& name);

    bool has_int8() const;
    std::size_t parameter_count() const;

    // CRC-32 of the serialized image (the value save() stores as trailer).
    std::uint32_t checksum() const;
    // CRC-32 over the raw bytes of the selected tensors, in name order.
    std::uint32_t encoder_checksum() const;
    std::uint32_t head_checksum(const std::string& head) const; // "cls" or "ctc"

    bool operator==(const Checkpoint&) const = default;
};

// Random initialization: conv kernels He-normal (std sqrt(2 / fan_in)),
// input projection LeCun-normal (std 1 / sqrt(fan_in)), every other weight
// normal(0, 0.02); biases zero, norm gains one.
Checkpoint init_checkpoint(const ModelConfig& cfg, std::uint64_t seed);

// Throws ErrorKind::Config naming missing, extra, or misshapen tensors.
void check_inventory(const Checkpoint& ckpt);

inline constexpr char kCheckpointMagic[4] = {'T', 'O', 'X', 'W'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kPayloadAlignment = 64;
inline constexpr std::size_t kHeaderBlock = 512; // prefix + header end on a multiple of this

// TOXW container, see docs/format.md. Returns bytes written.
std::size_t save(const Checkpoint& ckpt, const std::filesystem::path& path);
std::vector<std::uint8_t> serialize(const Checkpoint& ckpt);
Checkpoint load(const std::filesystem::path& path);

std::size_t model_size_bytes(const std::filesystem::path& path);

} // namespace toxedge
