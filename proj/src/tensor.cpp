#include "retina/tensor.hpp"

#include <cmath>

#include "retina/error.hpp"

namespace retina {

std::size_t Shape::count() const noexcept {
    std::size_t n = 1;
    for (std::size_t d : dims) n *= d;
    return n;
}

std::string Shape::str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(dims[i]);
    }
    return s + "]";
}

void Shape::validate() const {
    if (dims.empty()) throw ValueError("shape: dimension list must not be empty");
    if (dims.size() > 4)
        throw ValueError("shape: rank " + std::to_string(dims.size()) + " exceeds 4");
    for (std::size_t d : dims) {
        if (d == 0) throw ValueError("shape: every extent must be >= 1, got " + str());
    }
}

Tensor Tensor::zeros(const Shape& shape) {
    shape.validate();
    return Tensor(shape, std::vector<double>(shape.count(), 0.0));
}

Tensor Tensor::full(const Shape& shape, double value) {
    shape.validate();
    return Tensor(shape, std::vector<double>(shape.count(), value));
}

Tensor Tensor::from(const Shape& shape, std::vector<double> values) {
    shape.validate();
    if (values.size() != shape.count())
        throw ShapeError("tensor: " + std::to_string(values.size()) +
                         " values do not fill shape " + shape.str());
    return Tensor(shape, std::move(values));
}

Tensor Tensor::random_uniform(const Shape& shape, double lo, double hi, Rng& rng) {
    shape.validate();
    if (!(lo < hi)) throw ValueError("random_uniform: requires lo < hi");
    std::vector<double> v(shape.count());
    const double span = hi - lo;
    for (double& x : v) x = lo + rng.next_double() * span;
    return Tensor(shape, std::move(v));
}

Tensor Tensor::reshaped(const Shape& new_shape) const {
    new_shape.validate();
    if (new_shape.count() != size())
        throw ShapeError("reshape: " + shape_.str() + " has " + std::to_string(size()) +
                         " elements, " + new_shape.str() + " needs " +
                         std::to_string(new_shape.count()));
    return Tensor(new_shape, values_);
}

bool Tensor::all_finite() const noexcept {
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Tensor elementwise(Elementwise op, const Tensor& a, const Tensor& b) {
    if (!(a.shape() == b.shape()))
        throw ShapeError("elementwise: shape mismatch " + a.shape().str() + " vs " +
                         b.shape().str());
    std::vector<double> out(a.size());
    const double* pa = a.data();
    const double* pb = b.data();
    switch (op) {
        case Elementwise::add:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] + pb[i];
            break;
        case Elementwise::sub:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] - pb[i];
            break;
        case Elementwise::mul:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * pb[i];
            break;
    }
    return Tensor::from(a.shape(), std::move(out));
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::mul, a, b); }

Tensor scale(const Tensor& a, double c) {
    std::vector<double> out(a.size());
    const double* pa = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * c;
    return Tensor::from(a.shape(), std::move(out));
}

}  // namespace retina
