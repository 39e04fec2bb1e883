#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "retina/rng.hpp"

namespace retina {

/// Dimension list of a dense array, outermost first. Every extent is >= 1
/// and rank is between 1 and 4 ([batch, channel, height, width] at most).
struct Shape {
    std::vector<std::size_t> dims;

    Shape() = default;
    Shape(std::initializer_list<std::size_t> d) : dims(d) {}
    explicit Shape(std::vector<std::size_t> d) : dims(std::move(d)) {}

    std::size_t rank() const noexcept { return dims.size(); }
    std::size_t count() const noexcept;
    std::size_t operator[](std::size_t i) const { return dims[i]; }

    bool operator==(const Shape& other) const noexcept { return dims == other.dims; }

    std::string str() const;

    /// Throws ValueError unless 1 <= rank <= 4 and every extent >= 1.
    void validate() const;
};

/// Dense N-dimensional array of doubles in row-major order. Tensors are
/// immutable values in spirit: operations build new tensors. Mutable access
/// to the flat buffer exists for the layer implementations that own one.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(const Shape& shape);
    static Tensor full(const Shape& shape, double value);
    static Tensor from(const Shape& shape, std::vector<double> values);

    /// Values drawn independently from [lo, hi); identical seeds reproduce
    /// the tensor bit-exactly. Throws ValueError unless lo < hi.
    static Tensor random_uniform(const Shape& shape, double lo, double hi, Rng& rng);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return values_.size(); }

    const std::vector<double>& values() const noexcept { return values_; }
    const double* data() const noexcept { return values_.data(); }
    double* data() noexcept { return values_.data(); }

    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    // Unchecked multi-index accessors for ranks 2 and 4.
    double at(std::size_t i, std::size_t j) const {
        return values_[i * shape_.dims[1] + j];
    }
    double& at(std::size_t i, std::size_t j) {
        return values_[i * shape_.dims[1] + j];
    }
    double at(std::size_t b, std::size_t c, std::size_t y, std::size_t x) const {
        const auto& d = shape_.dims;
        return values_[((b * d[1] + c) * d[2] + y) * d[3] + x];
    }
    double& at(std::size_t b, std::size_t c, std::size_t y, std::size_t x) {
        const auto& d = shape_.dims;
        return values_[((b * d[1] + c) * d[2] + y) * d[3] + x];
    }

    /// Same flat values under a new shape with equal element count.
    Tensor reshaped(const Shape& new_shape) const;

    bool all_finite() const noexcept;

private:
    Tensor(Shape shape, std::vector<double> values)
        : shape_(std::move(shape)), values_(std::move(values)) {}

    Shape shape_;
    std::vector<double> values_;
};

enum class Elementwise { add, sub, mul };

/// c[i] = op(a[i], b[i]); shapes must match exactly.
Tensor elementwise(Elementwise op, const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

/// Every value multiplied by c.
Tensor scale(const Tensor& a, double c);

}  // namespace retina
