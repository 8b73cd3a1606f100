#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ris {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Row-major offset of a multi-index.
std::size_t flatten_index(const Shape& shape, std::span<const std::size_t> index);
std::vector<std::size_t> unflatten_index(const Shape& shape, std::size_t offset);

/// Dense row-major array of doubles.
///
/// A Tensor always holds product(shape) elements. Every dimension is at
/// least one; rank-0 tensors are not representable.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, double fill);
    explicit Tensor(Shape shape) : Tensor(std::move(shape), 0.0) {}

    static Tensor from_data(Shape shape, std::vector<double> data);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    double* raw() noexcept { return data_.data(); }
    const double* raw() const noexcept { return data_.data(); }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    double& at(std::initializer_list<std::size_t> index);
    double at(std::initializer_list<std::size_t> index) const;

    /// Same data viewed under a new shape of equal element count.
    Tensor reshaped(Shape shape) const&;
    Tensor reshaped(Shape shape) &&;

    void fill(double value);
    bool all_finite() const noexcept;
    double sum() const noexcept;
    double max_abs() const noexcept;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

Tensor tensor_new(const Shape& shape, double fill);

/// Throws ShapeError unless both tensors have identical shapes.
void require_same_shape(const Tensor& a, const Tensor& b, const char* context);

}  // namespace ris
