#include "stochff/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stochff {

Tensor fgsm_generate(const Model& m, const Tensor& image_raw, std::size_t true_class,
                     const AdversarialConfig& cfg) {
    if (!(cfg.k_adv >= 0.0))
        throw std::invalid_argument("fgsm_generate: k_adv must be >= 0");
    ActivationCache cache;
    forward_det(m, image_raw, &cache);
    const Tensor grad = backward_input_gradient(m, cache, true_class);

    Tensor out = image_raw;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double g = grad[i];
        const double step = g > 0.0 ? cfg.k_adv : (g < 0.0 ? -cfg.k_adv : 0.0);
        double v = std::clamp(out[i] + step, cfg.clamp_lo, cfg.clamp_hi);
        if (cfg.quantize_bytes) v = std::round(v);
        out[i] = v;
    }
    return out;
}

double evaluate_accuracy(const Model& m, const LabeledDataset& data, EvalMode mode,
                         double sigma2, const AdversarialConfig* cfg,
                         const RegularizationConstants& reg) {
    if (data.images.empty())
        throw std::invalid_argument("evaluate_accuracy: empty dataset");
    if (data.images.size() != data.labels.size())
        throw std::invalid_argument("evaluate_accuracy: image/label count mismatch");

    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.images.size(); ++i) {
        const Tensor image = cfg ? fgsm_generate(m, data.images[i], data.labels[i], *cfg)
                                 : data.images[i];
        PredictionOutcome o;
        switch (mode) {
            case EvalMode::Deterministic: o = forward_det(m, image); break;
            case EvalMode::Stochastic: o = forward_stochastic(m, image, sigma2, reg); break;
            case EvalMode::Ensemble: o = predict_ensemble(m, image, sigma2, reg); break;
        }
        if (o.predicted_class == data.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.images.size());
}

}  // namespace stochff
