#pragma once

#include <vector>

#include "stochff/model.hpp"

namespace stochff {

// FGSM step size and clamp range, all in raw pixel units. The normalized-
// domain step is k_adv / sigma_C per channel, so a raw-pixel step of k_adv.
struct AdversarialConfig {
    double k_adv = 0.0;
    std::vector<double> sigma_c;
    double clamp_lo = 0.0;
    double clamp_hi = 255.0;
    bool quantize_bytes = false;  // round perturbed pixels to integers
};

// x + k_adv * sign(grad), clamped to the valid pixel range; sign(0) = 0.
Tensor fgsm_generate(const Model& m, const Tensor& image_raw, std::size_t true_class,
                     const AdversarialConfig& cfg);

struct LabeledDataset {
    std::vector<Tensor> images;
    std::vector<std::size_t> labels;
};

enum class EvalMode { Deterministic, Stochastic, Ensemble };

// Fraction of correct predictions; if `cfg` is non-null every image is first
// perturbed by FGSM against the deterministic network.
double evaluate_accuracy(const Model& m, const LabeledDataset& data, EvalMode mode,
                         double sigma2, const AdversarialConfig* cfg = nullptr,
                         const RegularizationConstants& reg = {});

}  // namespace stochff
