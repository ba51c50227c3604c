#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace statiocl::num {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
///
/// Invariant: shape_size(shape()) == values().size(). Rank-0 tensors (empty
/// shape) hold exactly one value.
class Tensor {
public:
    Tensor() : shape_{}, values_(1, 0.0) {}
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<double> values);
    Tensor(Shape shape, std::initializer_list<double> values);

    static Tensor scalar(double value);
    static Tensor filled(Shape shape, double value);

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t rank() const noexcept { return shape_.size(); }
    [[nodiscard]] std::size_t dim(std::size_t axis) const;
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

    [[nodiscard]] std::span<double> data() noexcept { return values_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return values_; }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    /// 2-D element access, row-major.
    double& at(std::size_t r, std::size_t c) { return values_[r * shape_[1] + c]; }
    [[nodiscard]] double at(std::size_t r, std::size_t c) const { return values_[r * shape_[1] + c]; }

    /// Scalar value of a single-element tensor.
    [[nodiscard]] double item() const;

    void fill(double value);

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> values_;
};

}  // namespace statiocl::num
