#include "stochff/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "json.hpp"

namespace stochff {

namespace {

using nlohmann::json;

[[noreturn]] void layer_error(std::size_t index, const std::string& what) {
    throw std::runtime_error("layer " + std::to_string(index) + ": " + what);
}

Shape infer_output_shape(const LayerDescriptor& layer, const Shape& in,
                         std::size_t index) {
    return std::visit(
        [&](const auto& l) -> Shape {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, ConvParams>) {
                if (in.rank() != 3 || in[0] != l.in_channels())
                    layer_error(index, "conv input shape incompatible");
                if (in[1] + 2 * l.padding < l.kernel_h() ||
                    in[2] + 2 * l.padding < l.kernel_w())
                    layer_error(index, "conv kernel exceeds padded input");
                return Shape{l.out_channels(),
                             conv_output_extent(in[1], l.kernel_h(), l.padding, l.stride),
                             conv_output_extent(in[2], l.kernel_w(), l.padding, l.stride)};
            } else if constexpr (std::is_same_v<T, DenseParams>) {
                if (in.rank() != 1 || in[0] != l.in_features())
                    layer_error(index, "dense input shape incompatible");
                return Shape{l.units()};
            } else if constexpr (std::is_same_v<T, PoolSpec>) {
                if (in.rank() != 3 || in[1] < l.window_h || in[2] < l.window_w)
                    layer_error(index, "maxpool window does not fit");
                return Shape{in[0], (in[1] - l.window_h) / l.stride + 1,
                             (in[2] - l.window_w) / l.stride + 1};
            } else if constexpr (std::is_same_v<T, AvgPoolDescriptor>) {
                if (in.rank() != 3 || in[1] < l.window_h || in[2] < l.window_w)
                    layer_error(index, "avgpool window does not fit");
                return Shape{in[0], (in[1] - l.window_h) / l.stride + 1,
                             (in[2] - l.window_w) / l.stride + 1};
            } else if constexpr (std::is_same_v<T, BatchNormAffineParams>) {
                if (in[0] != l.channels())
                    layer_error(index, "batchnorm channel count incompatible");
                return in;
            } else if constexpr (std::is_same_v<T, FlattenDescriptor>) {
                return Shape{in.elements()};
            } else if constexpr (std::is_same_v<T, SoftmaxDescriptor>) {
                if (in.rank() != 1) layer_error(index, "softmax requires flat input");
                return in;
            } else {
                return in;  // relu, dropout
            }
        },
        layer);
}

}  // namespace

std::size_t Model::class_count() const {
    Shape s = input_shape;
    for (std::size_t i = 0; i < layers.size(); ++i)
        s = infer_output_shape(layers[i], s, i);
    return s.elements();
}

void Model::validate() const {
    if (layers.empty()) throw std::runtime_error("model: no layers");
    if (preprocess.channel_mean.size() != input_shape[0] ||
        preprocess.channel_std.size() != input_shape[0])
        throw std::runtime_error("model: preprocess channel count mismatch");
    for (double s : preprocess.channel_std)
        if (!(s > 0.0)) throw std::runtime_error("model: channel_std must be positive");
    Shape s = input_shape;
    for (std::size_t i = 0; i < layers.size(); ++i)
        s = infer_output_shape(layers[i], s, i);
    if (!std::holds_alternative<SoftmaxDescriptor>(layers.back()))
        throw std::runtime_error("model: final layer must be softmax");
    if (s.elements() < 2) throw std::runtime_error("model: class count must be >= 2");
}

Tensor preprocess_image(const Model& m, const Tensor& image_raw) {
    if (image_raw.shape() != m.input_shape)
        throw std::invalid_argument("forward: image shape mismatch");
    const auto& pp = m.preprocess;
    for (double v : image_raw.data())
        if (v < pp.pixel_lo || v > pp.pixel_hi)
            throw std::invalid_argument("forward: pixel outside valid range");
    Tensor out = image_raw;
    const std::size_t plane = m.input_shape.rank() == 3
                                  ? m.input_shape[1] * m.input_shape[2]
                                  : 1;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::size_t c = i / plane;
        out[i] = (out[i] - pp.channel_mean[c]) / pp.channel_std[c];
    }
    return out;
}

namespace {

PredictionOutcome outcome_from(const Tensor& probs, const Tensor& logit_means,
                               const Tensor& logit_vars) {
    PredictionOutcome o;
    o.class_probs = probs.data();
    o.predicted_class = static_cast<std::size_t>(
        std::max_element(probs.data().begin(), probs.data().end()) -
        probs.data().begin());
    o.logit_means = logit_means.data();
    o.logit_variances = logit_vars.data();
    return o;
}

}  // namespace

PredictionOutcome forward_det(const Model& m, const Tensor& image_raw,
                              ActivationCache* cache) {
    Tensor x = preprocess_image(m, image_raw);
    ActivationCache local;
    ActivationCache& c = cache ? *cache : local;
    c.preprocessed_input = x;
    c.outputs.clear();
    c.argmax_maps.assign(m.layers.size(), {});
    c.activation_doubles = x.size();

    Tensor logits;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        const bool last = (i + 1 == m.layers.size());
        std::visit(
            [&](const auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, ConvParams>) {
                    x = conv_forward_det(x, l);
                } else if constexpr (std::is_same_v<T, DenseParams>) {
                    x = dense_forward_det(x, l);
                } else if constexpr (std::is_same_v<T, ReluDescriptor>) {
                    x = relu_forward_det(x, l.theta);
                } else if constexpr (std::is_same_v<T, PoolSpec>) {
                    auto [out, map] = maxpool_forward_det(x, l);
                    x = std::move(out);
                    c.argmax_maps[i] = std::move(map);
                } else if constexpr (std::is_same_v<T, AvgPoolDescriptor>) {
                    x = avgpool_forward_det(x, l.window_h, l.window_w, l.stride);
                } else if constexpr (std::is_same_v<T, BatchNormAffineParams>) {
                    x = batchnorm_forward_det(x, l);
                } else if constexpr (std::is_same_v<T, FlattenDescriptor>) {
                    x = flatten_det(x);
                } else if constexpr (std::is_same_v<T, SoftmaxDescriptor>) {
                    if (!last) throw std::runtime_error("model: softmax must be final");
                    logits = x;
                    x = softmax_forward_det(x);
                }
                // dropout: identity
            },
            m.layers[i]);
        c.outputs.push_back(x);
        c.activation_doubles += x.size();
    }
    return outcome_from(x, logits, Tensor(logits.shape(), 0.0));
}

namespace {

// Reverse-mode walk shared by the input-gradient path and the trainer.
// `grad` enters as d(loss)/d(layer output) and leaves as d(loss)/d(layer input).
Tensor backward_one_layer(const LayerDescriptor& layer, const Tensor& input,
                          const ArgmaxMap& argmax, const Tensor& grad,
                          Tensor* weight_grad, Tensor* bias_grad) {
    return std::visit(
        [&](const auto& l) -> Tensor {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, ConvParams>) {
                const std::size_t in_ch = input.shape()[0], H = input.shape()[1],
                                  W = input.shape()[2];
                const std::size_t kH = l.kernel_h(), kW = l.kernel_w();
                const std::size_t outH = grad.shape()[1], outW = grad.shape()[2];
                Tensor dx(input.shape(), 0.0);
                for (std::size_t oc = 0; oc < l.out_channels(); ++oc)
                    for (std::size_t oy = 0; oy < outH; ++oy)
                        for (std::size_t ox = 0; ox < outW; ++ox) {
                            const double g = grad.at3(oc, oy, ox);
                            if (bias_grad) (*bias_grad)[oc] += g;
                            for (std::size_t ic = 0; ic < in_ch; ++ic)
                                for (std::size_t ky = 0; ky < kH; ++ky) {
                                    const std::ptrdiff_t iy =
                                        static_cast<std::ptrdiff_t>(oy * l.stride + ky) -
                                        static_cast<std::ptrdiff_t>(l.padding);
                                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H))
                                        continue;
                                    for (std::size_t kx = 0; kx < kW; ++kx) {
                                        const std::ptrdiff_t ix =
                                            static_cast<std::ptrdiff_t>(ox * l.stride + kx) -
                                            static_cast<std::ptrdiff_t>(l.padding);
                                        if (ix < 0 ||
                                            ix >= static_cast<std::ptrdiff_t>(W))
                                            continue;
                                        const std::size_t wi =
                                            ((oc * in_ch + ic) * kH + ky) * kW + kx;
                                        dx.at3(ic, static_cast<std::size_t>(iy),
                                               static_cast<std::size_t>(ix)) +=
                                            l.weights[wi] * g;
                                        if (weight_grad)
                                            (*weight_grad)[wi] +=
                                                input.at3(ic,
                                                          static_cast<std::size_t>(iy),
                                                          static_cast<std::size_t>(ix)) *
                                                g;
                                    }
                                }
                        }
                return dx;
            } else if constexpr (std::is_same_v<T, DenseParams>) {
                Tensor dx(input.shape(), 0.0);
                for (std::size_t u = 0; u < l.units(); ++u) {
                    const double g = grad[u];
                    if (bias_grad) (*bias_grad)[u] += g;
                    for (std::size_t i = 0; i < l.in_features(); ++i) {
                        dx[i] += l.weights[u * l.in_features() + i] * g;
                        if (weight_grad)
                            (*weight_grad)[u * l.in_features() + i] += input[i] * g;
                    }
                }
                return dx;
            } else if constexpr (std::is_same_v<T, ReluDescriptor>) {
                Tensor dx = grad;
                for (std::size_t i = 0; i < dx.size(); ++i)
                    if (!(input[i] > l.theta)) dx[i] = 0.0;
                return dx;
            } else if constexpr (std::is_same_v<T, PoolSpec>) {
                Tensor dx(input.shape(), 0.0);
                for (std::size_t o = 0; o < grad.size(); ++o)
                    dx[argmax[o]] += grad[o];
                return dx;
            } else if constexpr (std::is_same_v<T, AvgPoolDescriptor>) {
                const double inv_n = 1.0 / static_cast<double>(l.window_h * l.window_w);
                const std::size_t H = input.shape()[1], W = input.shape()[2];
                const std::size_t outH = grad.shape()[1], outW = grad.shape()[2];
                Tensor dx(input.shape(), 0.0);
                for (std::size_t c2 = 0; c2 < input.shape()[0]; ++c2)
                    for (std::size_t oy = 0; oy < outH; ++oy)
                        for (std::size_t ox = 0; ox < outW; ++ox) {
                            const double g = grad.at3(c2, oy, ox) * inv_n;
                            for (std::size_t ky = 0; ky < l.window_h; ++ky)
                                for (std::size_t kx = 0; kx < l.window_w; ++kx)
                                    dx.at3(c2, oy * l.stride + ky, ox * l.stride + kx) += g;
                        }
                (void)H;
                (void)W;
                return dx;
            } else if constexpr (std::is_same_v<T, BatchNormAffineParams>) {
                Tensor dx = grad;
                const Shape& s = input.shape();
                const std::size_t plane = s.rank() == 3 ? s[1] * s[2] : 1;
                for (std::size_t i = 0; i < dx.size(); ++i)
                    dx[i] *= l.scale(i / plane);
                return dx;
            } else if constexpr (std::is_same_v<T, FlattenDescriptor>) {
                return Tensor(input.shape(), grad.data());
            } else {
                return grad;  // dropout
            }
        },
        layer);
}

}  // namespace

ParamGradients make_param_gradients(const Model& m) {
    ParamGradients pg;
    pg.weight.resize(m.layers.size());
    pg.bias.resize(m.layers.size());
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        std::visit(
            [&](const auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, ConvParams> ||
                              std::is_same_v<T, DenseParams>) {
                    pg.weight[i] = Tensor(l.weights.shape(), 0.0);
                    pg.bias[i] = Tensor(l.bias.shape(), 0.0);
                }
            },
            m.layers[i]);
    }
    return pg;
}

Tensor backward_pass(const Model& m, const ActivationCache& cache,
                     std::size_t true_class, ParamGradients* param_grads) {
    const std::size_t n_layers = m.layers.size();
    if (cache.outputs.size() != n_layers)
        throw std::invalid_argument("backward: cache does not match model");
    const Tensor& probs = cache.outputs.back();
    if (true_class >= probs.size())
        throw std::invalid_argument("backward: class index out of range");

    // Cross-entropy over log-softmax: d(loss)/d(logits) = probs - onehot.
    Tensor grad = probs;
    grad[true_class] -= 1.0;

    for (std::size_t i = n_layers - 1; i-- > 0;) {
        const Tensor& input = (i == 0) ? cache.preprocessed_input : cache.outputs[i - 1];
        Tensor* wg = nullptr;
        Tensor* bg = nullptr;
        if (param_grads && param_grads->weight[i].size() > 0 &&
            param_grads->weight[i].shape().rank() > 1) {
            wg = &param_grads->weight[i];
            bg = &param_grads->bias[i];
        }
        grad = backward_one_layer(m.layers[i], input, cache.argmax_maps[i], grad, wg, bg);
    }
    return grad;
}

Tensor backward_input_gradient(const Model& m, const ActivationCache& cache,
                               std::size_t true_class) {
    return backward_pass(m, cache, true_class, nullptr);
}

PredictionOutcome forward_stochastic(const Model& m, const Tensor& image_raw,
                                     double sigma2, const RegularizationConstants& reg,
                                     MomentTrace* trace) {
    if (!(sigma2 >= 0.0))
        throw std::invalid_argument("forward_stochastic: sigma2 must be >= 0");
    MomentTensor x = lift_to_moments(preprocess_image(m, image_raw), sigma2);
    MomentTrace local;
    MomentTrace& tr = trace ? *trace : local;
    tr.outputs.clear();
    tr.activation_doubles = 2 * x.size();

    Tensor logit_means, logit_vars, probs;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        const bool last = (i + 1 == m.layers.size());
        std::visit(
            [&](const auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, ConvParams>) {
                    x = conv_forward_moments(x, l);
                } else if constexpr (std::is_same_v<T, DenseParams>) {
                    x = dense_forward_moments(x, l);
                } else if constexpr (std::is_same_v<T, ReluDescriptor>) {
                    x = relu_forward_moments(x, l.theta, reg);
                } else if constexpr (std::is_same_v<T, PoolSpec>) {
                    x = maxpool_forward_moments(x, l, reg);
                } else if constexpr (std::is_same_v<T, AvgPoolDescriptor>) {
                    x = avgpool_forward_moments(x, l.window_h, l.window_w, l.stride);
                } else if constexpr (std::is_same_v<T, BatchNormAffineParams>) {
                    x = batchnorm_forward_moments(x, l);
                } else if constexpr (std::is_same_v<T, FlattenDescriptor>) {
                    x = flatten_moments(x);
                } else if constexpr (std::is_same_v<T, SoftmaxDescriptor>) {
                    if (!last) throw std::runtime_error("model: softmax must be final");
                    logit_means = x.mean;
                    logit_vars = x.variance;
                    probs = softmax_forward(x);
                    // diagnostics keep the logit variances alongside the probs
                    x = MomentTensor(probs, logit_vars);
                } else if constexpr (std::is_same_v<T, DropoutDescriptor>) {
                    x = dropout_forward_moments(x);
                }
            },
            m.layers[i]);
        if (trace) tr.outputs.push_back(x);
        tr.activation_doubles += 2 * x.size();
    }
    return outcome_from(probs, logit_means, logit_vars);
}

PredictionOutcome predict_ensemble(const Model& m, const Tensor& image_raw,
                                   double sigma2, const RegularizationConstants& reg) {
    const PredictionOutcome det = forward_det(m, image_raw);
    const PredictionOutcome sto = forward_stochastic(m, image_raw, sigma2, reg);
    PredictionOutcome out = sto;
    for (std::size_t i = 0; i < out.class_probs.size(); ++i)
        out.class_probs[i] = 0.5 * det.class_probs[i] + 0.5 * sto.class_probs[i];
    out.predicted_class = static_cast<std::size_t>(
        std::max_element(out.class_probs.begin(), out.class_probs.end()) -
        out.class_probs.begin());
    out.logit_means = det.logit_means;
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

std::string sha256_hex(const std::uint8_t* data, std::size_t len) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int digest_len = 0;
    EVP_Digest(data, len, digest, &digest_len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * digest_len);
    for (unsigned int i = 0; i < digest_len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

namespace {

void append_doubles(std::vector<std::uint8_t>& blob, const std::vector<double>& v) {
    const std::size_t off = blob.size();
    blob.resize(off + v.size() * sizeof(double));
    std::memcpy(blob.data() + off, v.data(), v.size() * sizeof(double));
}

std::vector<double> read_doubles(const std::vector<std::uint8_t>& blob,
                                 std::size_t& cursor, std::size_t count) {
    if (cursor + count * sizeof(double) > blob.size())
        throw std::runtime_error("weight blob: length mismatch (truncated)");
    std::vector<double> out(count);
    std::memcpy(out.data(), blob.data() + cursor, count * sizeof(double));
    cursor += count * sizeof(double);
    return out;
}

}  // namespace

std::vector<std::uint8_t> serialize_weights(const Model& m) {
    std::vector<std::uint8_t> blob;
    for (const auto& layer : m.layers) {
        std::visit(
            [&](const auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, ConvParams> ||
                              std::is_same_v<T, DenseParams>) {
                    append_doubles(blob, l.weights.data());
                    append_doubles(blob, l.bias.data());
                } else if constexpr (std::is_same_v<T, BatchNormAffineParams>) {
                    append_doubles(blob, l.gamma);
                    append_doubles(blob, l.beta);
                    append_doubles(blob, l.running_mean);
                    append_doubles(blob, l.running_var);
                }
            },
            layer);
    }
    return blob;
}

std::string save_manifest(const Model& m, const std::vector<std::uint8_t>& weight_blob) {
    json j;
    j["input_shape"] = m.input_shape.dims();
    j["class_count"] = m.class_count();
    j["preprocess"] = {{"channel_mean", m.preprocess.channel_mean},
                       {"channel_std", m.preprocess.channel_std},
                       {"pixel_range", {m.preprocess.pixel_lo, m.preprocess.pixel_hi}}};
    j["weight_sha256"] = sha256_hex(weight_blob.data(), weight_blob.size());
    json layers = json::array();
    for (const auto& layer : m.layers) {
        std::visit(
            [&](const auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, ConvParams>) {
                    layers.push_back({{"type", "conv"},
                                      {"out_ch", l.out_channels()},
                                      {"in_ch", l.in_channels()},
                                      {"kH", l.kernel_h()},
                                      {"kW", l.kernel_w()},
                                      {"stride", l.stride},
                                      {"padding", l.padding}});
                } else if constexpr (std::is_same_v<T, DenseParams>) {
                    layers.push_back({{"type", "dense"}, {"units", l.units()}});
                } else if constexpr (std::is_same_v<T, ReluDescriptor>) {
                    layers.push_back({{"type", "relu"}, {"theta", l.theta}});
                } else if constexpr (std::is_same_v<T, PoolSpec>) {
                    layers.push_back({{"type", "maxpool"},
                                      {"window", {l.window_h, l.window_w}},
                                      {"stride", l.stride},
                                      {"sorted", l.sorted_mode}});
                } else if constexpr (std::is_same_v<T, AvgPoolDescriptor>) {
                    layers.push_back({{"type", "avgpool"},
                                      {"window", {l.window_h, l.window_w}},
                                      {"stride", l.stride}});
                } else if constexpr (std::is_same_v<T, BatchNormAffineParams>) {
                    layers.push_back({{"type", "batchnorm"},
                                      {"channels", l.channels()},
                                      {"eps", l.eps_bn}});
                } else if constexpr (std::is_same_v<T, DropoutDescriptor>) {
                    layers.push_back({{"type", "dropout"}});
                } else if constexpr (std::is_same_v<T, FlattenDescriptor>) {
                    layers.push_back({{"type", "flatten"}});
                } else if constexpr (std::is_same_v<T, SoftmaxDescriptor>) {
                    layers.push_back({{"type", "softmax"}});
                }
            },
            layer);
    }
    j["layers"] = std::move(layers);
    return j.dump(2);
}

Model load_model(const std::string& manifest_json,
                 const std::vector<std::uint8_t>& weight_blob) {
    json j;
    try {
        j = json::parse(manifest_json);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("manifest parse error: ") + e.what());
    }

    const std::string expect_sha = j.at("weight_sha256").get<std::string>();
    const std::string got_sha = sha256_hex(weight_blob.data(), weight_blob.size());
    if (expect_sha != got_sha)
        throw std::runtime_error("weight blob: checksum mismatch");

    Model m;
    m.input_shape = Shape(j.at("input_shape").get<std::vector<std::size_t>>());
    const auto& pp = j.at("preprocess");
    m.preprocess.channel_mean = pp.at("channel_mean").get<std::vector<double>>();
    m.preprocess.channel_std = pp.at("channel_std").get<std::vector<double>>();
    m.preprocess.pixel_lo = pp.at("pixel_range").at(0).get<double>();
    m.preprocess.pixel_hi = pp.at("pixel_range").at(1).get<double>();

    Shape current = m.input_shape;
    std::size_t cursor = 0;
    std::size_t index = 0;
    for (const auto& jl : j.at("layers")) {
        const std::string type = jl.at("type").get<std::string>();
        if (type == "conv") {
            ConvParams p;
            const std::size_t oc = jl.at("out_ch"), ic = jl.at("in_ch");
            const std::size_t kH = jl.at("kH"), kW = jl.at("kW");
            p.stride = jl.at("stride");
            p.padding = jl.at("padding");
            p.weights = Tensor(Shape{oc, ic, kH, kW},
                               read_doubles(weight_blob, cursor, oc * ic * kH * kW));
            p.bias = Tensor(Shape{oc}, read_doubles(weight_blob, cursor, oc));
            m.layers.emplace_back(std::move(p));
        } else if (type == "dense") {
            if (current.rank() != 1)
                layer_error(index, "dense requires flat input (shape incompatibility)");
            const std::size_t units = jl.at("units");
            const std::size_t in_features = current[0];
            DenseParams p;
            p.weights = Tensor(Shape{units, in_features},
                               read_doubles(weight_blob, cursor, units * in_features));
            p.bias = Tensor(Shape{units}, read_doubles(weight_blob, cursor, units));
            m.layers.emplace_back(std::move(p));
        } else if (type == "relu") {
            m.layers.emplace_back(ReluDescriptor{jl.at("theta").get<double>()});
        } else if (type == "maxpool") {
            PoolSpec p;
            p.window_h = jl.at("window").at(0);
            p.window_w = jl.at("window").at(1);
            p.stride = jl.at("stride");
            p.sorted_mode = jl.at("sorted").get<bool>();
            m.layers.emplace_back(p);
        } else if (type == "avgpool") {
            AvgPoolDescriptor p;
            p.window_h = jl.at("window").at(0);
            p.window_w = jl.at("window").at(1);
            p.stride = jl.at("stride");
            m.layers.emplace_back(p);
        } else if (type == "batchnorm") {
            BatchNormAffineParams p;
            const std::size_t ch = jl.at("channels");
            p.eps_bn = jl.at("eps").get<double>();
            p.gamma = read_doubles(weight_blob, cursor, ch);
            p.beta = read_doubles(weight_blob, cursor, ch);
            p.running_mean = read_doubles(weight_blob, cursor, ch);
            p.running_var = read_doubles(weight_blob, cursor, ch);
            m.layers.emplace_back(std::move(p));
        } else if (type == "dropout") {
            m.layers.emplace_back(DropoutDescriptor{});
        } else if (type == "flatten") {
            m.layers.emplace_back(FlattenDescriptor{});
        } else if (type == "softmax") {
            m.layers.emplace_back(SoftmaxDescriptor{});
        } else {
            layer_error(index, "unknown layer type '" + type + "'");
        }
        current = infer_output_shape(m.layers.back(), current, index);
        ++index;
    }
    if (cursor != weight_blob.size())
        throw std::runtime_error("weight blob: length mismatch (trailing bytes)");
    m.validate();
    return m;
}

namespace {

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f), {});
}

}  // namespace

Model load_model_files(const std::string& manifest_path, const std::string& weights_path) {
    std::ifstream mf(manifest_path);
    if (!mf) throw std::runtime_error("cannot open " + manifest_path);
    std::stringstream ss;
    ss << mf.rdbuf();
    return load_model(ss.str(), read_file_bytes(weights_path));
}

void save_model_files(const Model& m, const std::string& manifest_path,
                      const std::string& weights_path) {
    const std::vector<std::uint8_t> blob = serialize_weights(m);
    std::ofstream wf(weights_path, std::ios::binary);
    if (!wf) throw std::runtime_error("cannot open " + weights_path);
    wf.write(reinterpret_cast<const char*>(blob.data()),
             static_cast<std::streamsize>(blob.size()));
    std::ofstream mf(manifest_path);
    if (!mf) throw std::runtime_error("cannot open " + manifest_path);
    mf << save_manifest(m, blob) << "\n";
}

}  // namespace stochff
