#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace stochff {

// Dense shape. Activations are flat {n} or channel-major {c, h, w};
// parameter tensors additionally use rank 2 (dense) and rank 4 (conv).
class Shape {
public:
    Shape() = default;
    explicit Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) { validate(); }
    Shape(std::initializer_list<std::size_t> dims) : dims_(dims) { validate(); }

    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t rank() const { return dims_.size(); }
    std::size_t operator[](std::size_t i) const { return dims_.at(i); }

    std::size_t elements() const {
        std::size_t n = 1;
        for (std::size_t d : dims_) n *= d;
        return n;
    }

    bool operator==(const Shape& o) const { return dims_ == o.dims_; }
    bool operator!=(const Shape& o) const { return !(*this == o); }

private:
    void validate() const {
        if (dims_.empty())
            throw std::invalid_argument("Shape: empty dimension list");
        for (std::size_t d : dims_)
            if (d == 0) throw std::invalid_argument("Shape: zero extent");
    }

    std::vector<std::size_t> dims_;
};

// Row-major (channel-major for rank-3) array of 64-bit reals.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, double fill)
        : shape_(std::move(shape)), data_(shape_.elements(), fill) {}
    Tensor(Shape shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != shape_.elements())
            throw std::invalid_argument("Tensor: data length does not match shape");
    }

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    // Index into a rank-3 tensor.
    double at3(std::size_t c, std::size_t y, std::size_t x) const {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }
    double& at3(std::size_t c, std::size_t y, std::size_t x) {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

private:
    Shape shape_{std::vector<std::size_t>{1}};
    std::vector<double> data_{0.0};
};

// Paired (mean, variance) arrays of identical shape.
struct MomentTensor {
    Tensor mean;
    Tensor variance;

    MomentTensor() = default;
    MomentTensor(Tensor m, Tensor v) : mean(std::move(m)), variance(std::move(v)) {
        if (mean.shape() != variance.shape())
            throw std::invalid_argument("MomentTensor: mean/variance shape mismatch");
        for (double e : variance.data())
            if (e < 0.0) throw std::invalid_argument("MomentTensor: negative variance entry");
    }

    const Shape& shape() const { return mean.shape(); }
    std::size_t size() const { return mean.size(); }
};

Tensor tensor_new(const Shape& shape, double fill);

// Lifts a point tensor to a Gaussian moment tensor with constant variance.
MomentTensor lift_to_moments(const Tensor& x, double sigma2);

}  // namespace stochff
