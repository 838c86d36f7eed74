#pragma once

#include <cstdint>
#include <string>

#include "stochff/adversarial.hpp"
#include "stochff/model.hpp"

namespace stochff {

// 12x12 grayscale shape-classification task: 4 classes with seeded position
// jitter and additive uniform pixel noise, raw range [0, 255].
struct SyntheticDataset {
    LabeledDataset data;
    std::uint64_t seed = 0;

    std::size_t size() const { return data.images.size(); }
};

constexpr std::size_t kDatasetClasses = 4;
constexpr std::size_t kDatasetSide = 12;

SyntheticDataset generate_dataset(std::size_t n, std::uint64_t seed);

// Binary export: header (magic, count, shape, seed), then images as
// little-endian float64, then labels as unsigned bytes.
void save_dataset(const SyntheticDataset& ds, const std::string& path);
SyntheticDataset load_dataset(const std::string& path);

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    double learning_rate = 0.05;
    std::uint64_t seed = 1;
};

// Untrained fixture architecture:
// conv 8@3x3 -> relu -> maxpool 2x2 -> conv 16@3x3 -> relu -> maxpool 2x2
// -> flatten -> dense -> softmax. Weights seeded, preprocess from `ds`.
Model fixture_architecture(const SyntheticDataset& ds, std::uint64_t seed);

struct TrainResult {
    Model model;
    std::vector<double> epoch_losses;
};

// Deterministic mini-batch SGD with cross-entropy. Throws on divergence.
TrainResult train_fixture(const SyntheticDataset& train_set, Model arch,
                          const TrainConfig& cfg);

// Seeded split into train / held-out parts.
void split_dataset(const SyntheticDataset& ds, double holdout_fraction,
                   std::uint64_t seed, SyntheticDataset& train_out,
                   SyntheticDataset& holdout_out);

}  // namespace stochff
