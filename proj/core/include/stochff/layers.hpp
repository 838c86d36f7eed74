#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "stochff/gauss.hpp"
#include "stochff/tensor.hpp"

namespace stochff {

// Learned convolution parameters; weights shaped (out_ch, in_ch, kH, kW).
struct ConvParams {
    Tensor weights;
    Tensor bias;
    std::size_t stride = 1;
    std::size_t padding = 0;

    std::size_t out_channels() const { return weights.shape()[0]; }
    std::size_t in_channels() const { return weights.shape()[1]; }
    std::size_t kernel_h() const { return weights.shape()[2]; }
    std::size_t kernel_w() const { return weights.shape()[3]; }
};

// Fully connected layer; weights shaped (units, in_features).
struct DenseParams {
    Tensor weights;
    Tensor bias;

    std::size_t units() const { return weights.shape()[0]; }
    std::size_t in_features() const { return weights.shape()[1]; }
};

// Evaluation-phase batch norm: a fixed per-channel affine transform.
struct BatchNormAffineParams {
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double eps_bn = 1e-5;

    std::size_t channels() const { return gamma.size(); }
    // Per-channel scale gamma / sqrt(running_var + eps).
    double scale(std::size_t c) const;
};

struct PoolSpec {
    std::size_t window_h = 2;
    std::size_t window_w = 2;
    std::size_t stride = 2;
    bool sorted_mode = true;  // ascending-mean fold order for the moment pass
};

// Winning flat input index per pooled output element.
using ArgmaxMap = std::vector<std::size_t>;

Tensor conv_forward_det(const Tensor& x, const ConvParams& p);
MomentTensor conv_forward_moments(const MomentTensor& x, const ConvParams& p);

Tensor dense_forward_det(const Tensor& x, const DenseParams& p);
MomentTensor dense_forward_moments(const MomentTensor& x, const DenseParams& p);

Tensor relu_forward_det(const Tensor& x, double theta = 0.0);
MomentTensor relu_forward_moments(const MomentTensor& x, double theta = 0.0,
                                  const RegularizationConstants& reg = {});

std::pair<Tensor, ArgmaxMap> maxpool_forward_det(const Tensor& x, const PoolSpec& spec);
MomentTensor maxpool_forward_moments(const MomentTensor& x, const PoolSpec& spec,
                                     const RegularizationConstants& reg = {});

Tensor avgpool_forward_det(const Tensor& x, std::size_t window_h, std::size_t window_w,
                           std::size_t stride);
MomentTensor avgpool_forward_moments(const MomentTensor& x, std::size_t window_h,
                                     std::size_t window_w, std::size_t stride);

Tensor batchnorm_forward_det(const Tensor& x, const BatchNormAffineParams& p);
MomentTensor batchnorm_forward_moments(const MomentTensor& x,
                                       const BatchNormAffineParams& p);

// Softmax over mean values only; logit variances are dropped here and
// surfaced separately through the prediction outcome.
Tensor softmax_forward(const MomentTensor& x);
Tensor softmax_forward_det(const Tensor& x);

MomentTensor dropout_forward_moments(const MomentTensor& x);

Tensor flatten_det(const Tensor& x);
MomentTensor flatten_moments(const MomentTensor& x);

// Fold a window of element moments with the pairwise-max approximation.
// sorted_mode applies a stable ascending sort by mean before folding.
GaussMoments fold_max_moments(std::vector<GaussMoments> window, bool sorted_mode,
                              const RegularizationConstants& reg = {});

// Output spatial extent for the floor((n + 2*pad - k)/stride) + 1 rule.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t pad,
                               std::size_t stride);

}  // namespace stochff
