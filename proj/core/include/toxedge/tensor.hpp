#pragma once

#include "toxedge/memory.hpp"

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace toxedge {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

// Dense row-major float32 array. Storage is tracked by the memory accountant.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::span<const float> values);
    Tensor(Shape shape, std::initializer_list<float> values);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor filled(Shape shape, float value);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    // Leading dimension and the flattened remainder; views rank-3 conv
    // kernels as [c_out, c_in * k] matrices.
    std::size_t rows() const noexcept { return shape_.empty() ? 0 : shape_[0]; }
    std::size_t cols() const noexcept { return rows() == 0 ? 0 : size() / rows(); }

    float* data() noexcept { return data_.data(); }
    const float* data() const noexcept { return data_.data(); }
    std::span<float> values() noexcept { return data_; }
    std::span<const float> values() const noexcept { return data_; }

    float& operator[](std::size_t i) noexcept { return data_[i]; }
    float operator[](std::size_t i) const noexcept { return data_[i]; }
    float& at(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
    float at(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }

    std::span<float> row(std::size_t r) noexcept { return {data_.data() + r * cols(), cols()}; }
    std::span<const float> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols(), cols()};
    }

    // Same data, new shape; sizes must agree.
    Tensor reshaped(Shape shape) const;

    bool operator==(const Tensor& other) const noexcept;

private:
    Shape shape_;
    TrackedVector<float> data_;
};

// Row-major float64 matrix for loss computations and gradient checks.
struct DMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    DMatrix() = default;
    DMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) noexcept { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data[r * cols + c]; }
    std::span<double> row(std::size_t r) noexcept { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data.data() + r * cols, cols}; }

    static DMatrix from(const Tensor& t);
};

} // namespace toxedge
