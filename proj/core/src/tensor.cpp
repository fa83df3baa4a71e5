#include "toxedge/tensor.hpp"

#include "toxedge/error.hpp"

#include <algorithm>
#include <cstring>

namespace toxedge {

std::size_t shape_size(const Shape& shape) noexcept {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
}

std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
    for (std::size_t d : shape_) {
        if (d == 0) fail(ErrorKind::Shape, "tensor dimensions must be positive: " + shape_string(shape_));
    }
    data_.assign(shape_size(shape_), 0.0f);
}

Tensor::Tensor(Shape shape, std::span<const float> values) : Tensor(std::move(shape)) {
    if (values.size() != data_.size()) {
        fail(ErrorKind::Shape, "tensor " + shape_string(shape_) + " given " +
                                   std::to_string(values.size()) + " values");
    }
    std::copy(values.begin(), values.end(), data_.begin());
}

Tensor::Tensor(Shape shape, std::initializer_list<float> values)
    : Tensor(std::move(shape), std::span<const float>(values.begin(), values.size())) {}

Tensor Tensor::filled(Shape shape, float value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_size(shape) != size()) {
        fail(ErrorKind::Shape, "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
}

bool Tensor::operator==(const Tensor& other) const noexcept {
    return shape_ == other.shape_ && data_.size() == other.data_.size() &&
           std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

DMatrix DMatrix::from(const Tensor& t) {
    DMatrix m(t.rows(), t.cols());
    std::copy(t.values().begin(), t.values().end(), m.data.begin());
    return m;
}

} // namespace toxedge
