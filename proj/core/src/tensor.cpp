#include "stochff/tensor.hpp"

namespace stochff {

Tensor tensor_new(const Shape& shape, double fill) {
    return Tensor(shape, fill);
}

MomentTensor lift_to_moments(const Tensor& x, double sigma2) {
    if (!(sigma2 >= 0.0))
        throw std::invalid_argument("lift_to_moments: sigma2 must be >= 0");
    return MomentTensor(x, Tensor(x.shape(), sigma2));
}

}  // namespace stochff
