#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "stochff/layers.hpp"
#include "stochff/tensor.hpp"

namespace stochff {

struct ReluDescriptor {
    double theta = 0.0;
};
struct SoftmaxDescriptor {};
struct DropoutDescriptor {};
struct FlattenDescriptor {};
struct AvgPoolDescriptor {
    std::size_t window_h = 2;
    std::size_t window_w = 2;
    std::size_t stride = 2;
};

using LayerDescriptor =
    std::variant<ConvParams, DenseParams, ReluDescriptor, PoolSpec, AvgPoolDescriptor,
                 BatchNormAffineParams, DropoutDescriptor, SoftmaxDescriptor,
                 FlattenDescriptor>;

// Channel-wise normalization applied before the first layer.
struct PreprocessSpec {
    std::vector<double> channel_mean;
    std::vector<double> channel_std;  // sigma_C, strictly positive
    double pixel_lo = 0.0;
    double pixel_hi = 255.0;
};

struct Model {
    std::vector<LayerDescriptor> layers;
    Shape input_shape{std::vector<std::size_t>{1}};
    PreprocessSpec preprocess;

    std::size_t class_count() const;
    // Validates the shape chain end to end; throws naming the offending layer.
    void validate() const;
};

struct PredictionOutcome {
    std::vector<double> class_probs;
    std::size_t predicted_class = 0;
    std::vector<double> logit_means;
    std::vector<double> logit_variances;  // zeros in deterministic mode
};

// Per-layer activations retained by the deterministic forward for backprop.
struct ActivationCache {
    Tensor preprocessed_input;
    std::vector<Tensor> outputs;            // one per layer, post-activation
    std::vector<ArgmaxMap> argmax_maps;     // parallel to layers; empty unless maxpool
    std::size_t activation_doubles = 0;     // retained activation storage, in doubles
};

// Per-layer moment activations retained by the stochastic forward.
struct MomentTrace {
    std::vector<MomentTensor> outputs;
    std::size_t activation_doubles = 0;
};

Tensor preprocess_image(const Model& m, const Tensor& image_raw);

PredictionOutcome forward_det(const Model& m, const Tensor& image_raw,
                              ActivationCache* cache = nullptr);

// Gradient of -log softmax[true_class] w.r.t. the preprocessed input.
Tensor backward_input_gradient(const Model& m, const ActivationCache& cache,
                               std::size_t true_class);

// Per-layer parameter gradients; entries are empty tensors for layers
// without parameters. Used by the trainer.
struct ParamGradients {
    std::vector<Tensor> weight;
    std::vector<Tensor> bias;
};

// As backward_input_gradient, additionally accumulating parameter gradients
// when `param_grads` is non-null (must be pre-sized to match the model).
Tensor backward_pass(const Model& m, const ActivationCache& cache,
                     std::size_t true_class, ParamGradients* param_grads);

// Zero-initialized gradient buffers matching the model's parameter layout.
ParamGradients make_param_gradients(const Model& m);

PredictionOutcome forward_stochastic(const Model& m, const Tensor& image_raw,
                                     double sigma2,
                                     const RegularizationConstants& reg = {},
                                     MomentTrace* trace = nullptr);

// 1:1 average of deterministic and stochastic class probabilities.
PredictionOutcome predict_ensemble(const Model& m, const Tensor& image_raw,
                                   double sigma2,
                                   const RegularizationConstants& reg = {});

// Manifest is UTF-8 JSON; weight blob is little-endian float64 in manifest
// order. The manifest records the blob's SHA-256, checked on load.
Model load_model(const std::string& manifest_json, const std::vector<std::uint8_t>& weight_blob);
std::string save_manifest(const Model& m, const std::vector<std::uint8_t>& weight_blob);
std::vector<std::uint8_t> serialize_weights(const Model& m);

Model load_model_files(const std::string& manifest_path, const std::string& weights_path);
void save_model_files(const Model& m, const std::string& manifest_path,
                      const std::string& weights_path);

std::string sha256_hex(const std::uint8_t* data, std::size_t len);

}  // namespace stochff
