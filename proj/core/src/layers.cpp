#include "stochff/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace stochff {

namespace {

void require_rank3(const Tensor& x, const char* op) {
    if (x.shape().rank() != 3)
        throw std::invalid_argument(std::string(op) + ": expected rank-3 input");
}

// Generic padded cross-correlation; `square_weights` selects the variance
// path (squared coefficients, no bias).
Tensor conv_impl(const Tensor& x, const ConvParams& p, bool square_weights,
                 bool with_bias) {
    require_rank3(x, "conv");
    const std::size_t in_ch = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
    if (in_ch != p.in_channels())
        throw std::invalid_argument("conv: input channel mismatch");
    if (p.bias.size() != p.out_channels())
        throw std::invalid_argument("conv: bias length mismatch");
    const std::size_t kH = p.kernel_h(), kW = p.kernel_w();
    if (H + 2 * p.padding < kH || W + 2 * p.padding < kW)
        throw std::invalid_argument("conv: kernel larger than padded input");

    const std::size_t outH = conv_output_extent(H, kH, p.padding, p.stride);
    const std::size_t outW = conv_output_extent(W, kW, p.padding, p.stride);
    Tensor out(Shape{p.out_channels(), outH, outW}, 0.0);

    for (std::size_t oc = 0; oc < p.out_channels(); ++oc) {
        for (std::size_t oy = 0; oy < outH; ++oy) {
            for (std::size_t ox = 0; ox < outW; ++ox) {
                double acc = with_bias ? p.bias[oc] : 0.0;
                for (std::size_t ic = 0; ic < in_ch; ++ic) {
                    for (std::size_t ky = 0; ky < kH; ++ky) {
                        const std::ptrdiff_t iy =
                            static_cast<std::ptrdiff_t>(oy * p.stride + ky) -
                            static_cast<std::ptrdiff_t>(p.padding);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                        for (std::size_t kx = 0; kx < kW; ++kx) {
                            const std::ptrdiff_t ix =
                                static_cast<std::ptrdiff_t>(ox * p.stride + kx) -
                                static_cast<std::ptrdiff_t>(p.padding);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                            double w = p.weights.data()
                                [((oc * in_ch + ic) * kH + ky) * kW + kx];
                            if (square_weights) w *= w;
                            acc += w * x.at3(ic, static_cast<std::size_t>(iy),
                                             static_cast<std::size_t>(ix));
                        }
                    }
                }
                out.at3(oc, oy, ox) = acc;
            }
        }
    }
    return out;
}

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t pad,
                               std::size_t stride) {
    return (in + 2 * pad - kernel) / stride + 1;
}

double BatchNormAffineParams::scale(std::size_t c) const {
    return gamma[c] / std::sqrt(running_var[c] + eps_bn);
}

Tensor conv_forward_det(const Tensor& x, const ConvParams& p) {
    return conv_impl(x, p, false, true);
}

MomentTensor conv_forward_moments(const MomentTensor& x, const ConvParams& p) {
    return MomentTensor(conv_impl(x.mean, p, false, true),
                        conv_impl(x.variance, p, true, false));
}

Tensor dense_forward_det(const Tensor& x, const DenseParams& p) {
    if (x.shape().rank() != 1 || x.size() != p.in_features())
        throw std::invalid_argument("dense: input feature mismatch");
    Tensor out(Shape{p.units()}, 0.0);
    for (std::size_t u = 0; u < p.units(); ++u) {
        double acc = p.bias[u];
        for (std::size_t i = 0; i < p.in_features(); ++i)
            acc += p.weights[u * p.in_features() + i] * x[i];
        out[u] = acc;
    }
    return out;
}

MomentTensor dense_forward_moments(const MomentTensor& x, const DenseParams& p) {
    if (x.shape().rank() != 1 || x.size() != p.in_features())
        throw std::invalid_argument("dense: input feature mismatch");
    Tensor mean(Shape{p.units()}, 0.0);
    Tensor var(Shape{p.units()}, 0.0);
    for (std::size_t u = 0; u < p.units(); ++u) {
        double m = p.bias[u], v = 0.0;
        for (std::size_t i = 0; i < p.in_features(); ++i) {
            const double w = p.weights[u * p.in_features() + i];
            m += w * x.mean[i];
            v += w * w * x.variance[i];
        }
        mean[u] = m;
        var[u] = v;
    }
    return MomentTensor(std::move(mean), std::move(var));
}

Tensor relu_forward_det(const Tensor& x, double theta) {
    Tensor out = x;
    for (double& e : out.data()) e = std::max(e, theta);
    return out;
}

MomentTensor relu_forward_moments(const MomentTensor& x, double theta,
                                  const RegularizationConstants& reg) {
    Tensor mean(x.shape(), 0.0);
    Tensor var(x.shape(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const GaussMoments m =
            censored_relu_moments(x.mean[i], x.variance[i], theta, reg);
        mean[i] = m.mean;
        var[i] = m.variance;
    }
    return MomentTensor(std::move(mean), std::move(var));
}

namespace {

struct PoolGeometry {
    std::size_t ch, H, W, outH, outW;
};

PoolGeometry pool_geometry(const Shape& s, std::size_t wh, std::size_t ww,
                           std::size_t stride, const char* op) {
    if (s.rank() != 3) throw std::invalid_argument(std::string(op) + ": rank-3 input required");
    if (s[1] < wh || s[2] < ww)
        throw std::invalid_argument(std::string(op) + ": window larger than input");
    return {s[0], s[1], s[2], (s[1] - wh) / stride + 1, (s[2] - ww) / stride + 1};
}

}  // namespace

std::pair<Tensor, ArgmaxMap> maxpool_forward_det(const Tensor& x, const PoolSpec& spec) {
    const auto g = pool_geometry(x.shape(), spec.window_h, spec.window_w, spec.stride,
                                 "maxpool");
    Tensor out(Shape{g.ch, g.outH, g.outW}, 0.0);
    ArgmaxMap argmax(out.size());
    for (std::size_t c = 0; c < g.ch; ++c)
        for (std::size_t oy = 0; oy < g.outH; ++oy)
            for (std::size_t ox = 0; ox < g.outW; ++ox) {
                double best = -std::numeric_limits<double>::infinity();
                std::size_t best_idx = 0;
                for (std::size_t ky = 0; ky < spec.window_h; ++ky)
                    for (std::size_t kx = 0; kx < spec.window_w; ++kx) {
                        const std::size_t iy = oy * spec.stride + ky;
                        const std::size_t ix = ox * spec.stride + kx;
                        const std::size_t idx = (c * g.H + iy) * g.W + ix;
                        // strict > keeps the first element on ties
                        if (x[idx] > best) {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                const std::size_t o = (c * g.outH + oy) * g.outW + ox;
                out[o] = best;
                argmax[o] = best_idx;
            }
    return {std::move(out), std::move(argmax)};
}

GaussMoments fold_max_moments(std::vector<GaussMoments> window, bool sorted_mode,
                              const RegularizationConstants& reg) {
    if (window.empty()) throw std::invalid_argument("fold_max_moments: empty window");
    if (sorted_mode)
        std::stable_sort(window.begin(), window.end(),
                         [](const GaussMoments& a, const GaussMoments& b) {
                             return a.mean < b.mean;
                         });
    GaussMoments acc = window.front();
    for (std::size_t i = 1; i < window.size(); ++i)
        acc = pairwise_max_moments(acc, window[i], reg);
    return acc;
}

MomentTensor maxpool_forward_moments(const MomentTensor& x, const PoolSpec& spec,
                                     const RegularizationConstants& reg) {
    const auto g = pool_geometry(x.shape(), spec.window_h, spec.window_w, spec.stride,
                                 "maxpool");
    Tensor mean(Shape{g.ch, g.outH, g.outW}, 0.0);
    Tensor var(Shape{g.ch, g.outH, g.outW}, 0.0);
    std::vector<GaussMoments> window(spec.window_h * spec.window_w);
    for (std::size_t c = 0; c < g.ch; ++c)
        for (std::size_t oy = 0; oy < g.outH; ++oy)
            for (std::size_t ox = 0; ox < g.outW; ++ox) {
                std::size_t k = 0;
                for (std::size_t ky = 0; ky < spec.window_h; ++ky)
                    for (std::size_t kx = 0; kx < spec.window_w; ++kx, ++k) {
                        const std::size_t idx =
                            (c * g.H + oy * spec.stride + ky) * g.W + ox * spec.stride + kx;
                        window[k] = {x.mean[idx], x.variance[idx]};
                    }
                const GaussMoments m = fold_max_moments(window, spec.sorted_mode, reg);
                const std::size_t o = (c * g.outH + oy) * g.outW + ox;
                mean[o] = m.mean;
                var[o] = m.variance;
            }
    return MomentTensor(std::move(mean), std::move(var));
}

Tensor avgpool_forward_det(const Tensor& x, std::size_t window_h, std::size_t window_w,
                           std::size_t stride) {
    const auto g = pool_geometry(x.shape(), window_h, window_w, stride, "avgpool");
    const double inv_n = 1.0 / static_cast<double>(window_h * window_w);
    Tensor out(Shape{g.ch, g.outH, g.outW}, 0.0);
    for (std::size_t c = 0; c < g.ch; ++c)
        for (std::size_t oy = 0; oy < g.outH; ++oy)
            for (std::size_t ox = 0; ox < g.outW; ++ox) {
                double acc = 0.0;
                for (std::size_t ky = 0; ky < window_h; ++ky)
                    for (std::size_t kx = 0; kx < window_w; ++kx)
                        acc += x.at3(c, oy * stride + ky, ox * stride + kx);
                out.at3(c, oy, ox) = acc * inv_n;
            }
    return out;
}

MomentTensor avgpool_forward_moments(const MomentTensor& x, std::size_t window_h,
                                     std::size_t window_w, std::size_t stride) {
    // Averaging with coefficients 1/n: mean scales by 1/n, variance by 1/n^2.
    const auto g = pool_geometry(x.shape(), window_h, window_w, stride, "avgpool");
    const double inv_n = 1.0 / static_cast<double>(window_h * window_w);
    Tensor mean(Shape{g.ch, g.outH, g.outW}, 0.0);
    Tensor var(Shape{g.ch, g.outH, g.outW}, 0.0);
    for (std::size_t c = 0; c < g.ch; ++c)
        for (std::size_t oy = 0; oy < g.outH; ++oy)
            for (std::size_t ox = 0; ox < g.outW; ++ox) {
                double m = 0.0, v = 0.0;
                for (std::size_t ky = 0; ky < window_h; ++ky)
                    for (std::size_t kx = 0; kx < window_w; ++kx) {
                        const std::size_t idx =
                            (c * g.H + oy * stride + ky) * g.W + ox * stride + kx;
                        m += x.mean[idx];
                        v += x.variance[idx];
                    }
                mean.at3(c, oy, ox) = m * inv_n;
                var.at3(c, oy, ox) = v * inv_n * inv_n;
            }
    return MomentTensor(std::move(mean), std::move(var));
}

namespace {

std::size_t channel_of(const Shape& s, std::size_t flat_index) {
    return s.rank() == 3 ? flat_index / (s[1] * s[2]) : flat_index;
}

void require_channels(const Shape& s, const BatchNormAffineParams& p) {
    const std::size_t ch = s.rank() == 3 ? s[0] : s[0];
    if (ch != p.channels() || p.beta.size() != p.channels() ||
        p.running_mean.size() != p.channels() || p.running_var.size() != p.channels())
        throw std::invalid_argument("batchnorm: channel count mismatch");
}

}  // namespace

Tensor batchnorm_forward_det(const Tensor& x, const BatchNormAffineParams& p) {
    require_channels(x.shape(), p);
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::size_t c = channel_of(x.shape(), i);
        out[i] = p.scale(c) * (x[i] - p.running_mean[c]) + p.beta[c];
    }
    return out;
}

MomentTensor batchnorm_forward_moments(const MomentTensor& x,
                                       const BatchNormAffineParams& p) {
    require_channels(x.shape(), p);
    Tensor mean = x.mean;
    Tensor var = x.variance;
    for (std::size_t i = 0; i < mean.size(); ++i) {
        const std::size_t c = channel_of(x.shape(), i);
        const double s = p.scale(c);
        mean[i] = s * (x.mean[i] - p.running_mean[c]) + p.beta[c];
        var[i] = s * s * x.variance[i];
    }
    return MomentTensor(std::move(mean), std::move(var));
}

Tensor softmax_forward_det(const Tensor& x) {
    if (x.shape().rank() != 1)
        throw std::invalid_argument("softmax: flat input required");
    Tensor out = x;
    const double hi = *std::max_element(x.data().begin(), x.data().end());
    double sum = 0.0;
    for (double& e : out.data()) {
        e = std::exp(e - hi);
        sum += e;
    }
    for (double& e : out.data()) e /= sum;
    return out;
}

Tensor softmax_forward(const MomentTensor& x) {
    return softmax_forward_det(x.mean);
}

MomentTensor dropout_forward_moments(const MomentTensor& x) {
    return x;  // inference-only: dropout is the identity
}

Tensor flatten_det(const Tensor& x) {
    return Tensor(Shape{x.size()}, x.data());
}

MomentTensor flatten_moments(const MomentTensor& x) {
    return MomentTensor(flatten_det(x.mean), flatten_det(x.variance));
}

}  // namespace stochff
