#include "ris_sense/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ris_sense/errors.hpp"

namespace ris {

namespace {

void validate_shape(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
    for (auto d : shape) {
        if (d == 0) throw ShapeError("tensor dimension of size 0 in " + shape_string(shape));
    }
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

std::size_t flatten_index(const Shape& shape, std::span<const std::size_t> index) {
    if (index.size() != shape.size()) throw ShapeError("index rank does not match tensor rank");
    std::size_t offset = 0;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (index[i] >= shape[i]) throw ShapeError("index out of range for " + shape_string(shape));
        offset = offset * shape[i] + index[i];
    }
    return offset;
}

std::vector<std::size_t> unflatten_index(const Shape& shape, std::size_t offset) {
    if (offset >= shape_size(shape)) throw ShapeError("offset out of range for " + shape_string(shape));
    std::vector<std::size_t> index(shape.size());
    for (std::size_t i = shape.size(); i-- > 0;) {
        index[i] = offset % shape[i];
        offset /= shape[i];
    }
    return index;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(shape_size(shape_), fill);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
    validate_shape(shape);
    if (shape_size(shape) != data.size()) {
        throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                         shape_string(shape));
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
}

double& Tensor::at(std::initializer_list<std::size_t> index) {
    return data_[flatten_index(shape_, std::span(index.begin(), index.size()))];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
    return data_[flatten_index(shape_, std::span(index.begin(), index.size()))];
}

Tensor Tensor::reshaped(Shape shape) const& {
    Tensor copy = *this;
    return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
    validate_shape(shape);
    if (shape_size(shape) != data_.size()) {
        throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    shape_ = std::move(shape);
    return std::move(*this);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::sum() const noexcept { return std::accumulate(data_.begin(), data_.end(), 0.0); }

double Tensor::max_abs() const noexcept {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

Tensor tensor_new(const Shape& shape, double fill) { return Tensor(shape, fill); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* context) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(context) + ": shape " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
    }
}

}  // namespace ris
