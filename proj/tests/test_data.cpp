#include "doctest.h"

#include <array>
#include <cstdio>
#include <filesystem>

#include "stochff/data.hpp"

using namespace stochff;

TEST_CASE("dataset generation is deterministic and bit-identical per seed") {
    const SyntheticDataset a = generate_dataset(40, 99);
    const SyntheticDataset b = generate_dataset(40, 99);
    const SyntheticDataset c = generate_dataset(40, 100);
    REQUIRE(a.size() == 40);
    bool identical = true, differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t p = 0; p < a.data.images[i].size(); ++p) {
            identical &= a.data.images[i][p] == b.data.images[i][p];
            differs |= a.data.images[i][p] != c.data.images[i][p];
        }
        identical &= a.data.labels[i] == b.data.labels[i];
    }
    CHECK(identical);
    CHECK(differs);
}

TEST_CASE("dataset pixels stay in range and classes are balanced") {
    const SyntheticDataset ds = generate_dataset(103, 7);
    std::array<std::size_t, kDatasetClasses> counts{};
    for (std::size_t i = 0; i < ds.size(); ++i) {
        REQUIRE(ds.data.labels[i] < kDatasetClasses);
        ++counts[ds.data.labels[i]];
        const Tensor& img = ds.data.images[i];
        REQUIRE(img.shape() == Shape{1, kDatasetSide, kDatasetSide});
        for (std::size_t p = 0; p < img.size(); ++p) {
            CHECK(img[p] >= 0.0);
            CHECK(img[p] <= 255.0);
        }
    }
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    CHECK(*hi - *lo <= 1);
}

TEST_CASE("dataset export/import round-trips bit-exactly") {
    const SyntheticDataset ds = generate_dataset(17, 55);
    const std::string path =
        (std::filesystem::temp_directory_path() / "stochff_ds_test.bin").string();
    save_dataset(ds, path);
    const SyntheticDataset back = load_dataset(path);
    std::remove(path.c_str());

    REQUIRE(back.size() == ds.size());
    CHECK(back.seed == ds.seed);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(back.data.labels[i] == ds.data.labels[i]);
        for (std::size_t p = 0; p < ds.data.images[i].size(); ++p)
            CHECK(back.data.images[i][p] == ds.data.images[i][p]);
    }

    CHECK_THROWS_AS(load_dataset("/nonexistent/stochff_ds.bin"), std::runtime_error);
}

TEST_CASE("training with zero learning rate leaves parameters unchanged") {
    const SyntheticDataset ds = generate_dataset(32, 3);
    const Model arch = fixture_architecture(ds, 3);
    TrainConfig tc;
    tc.epochs = 2;
    tc.learning_rate = 0.0;
    const TrainResult tr = train_fixture(ds, arch, tc);
    const std::vector<std::uint8_t> before = serialize_weights(arch);
    const std::vector<std::uint8_t> after = serialize_weights(tr.model);
    CHECK(before == after);
}

TEST_CASE("training loss decreases over early epochs") {
    const SyntheticDataset ds = generate_dataset(128, 21);
    TrainConfig tc;
    tc.epochs = 5;
    const TrainResult tr = train_fixture(ds, fixture_architecture(ds, 21), tc);
    REQUIRE(tr.epoch_losses.size() == 5);
    CHECK(tr.epoch_losses.back() < tr.epoch_losses.front());
}

TEST_CASE("training is deterministic per seed") {
    const SyntheticDataset ds = generate_dataset(64, 8);
    TrainConfig tc;
    tc.epochs = 3;
    const TrainResult a = train_fixture(ds, fixture_architecture(ds, 8), tc);
    const TrainResult b = train_fixture(ds, fixture_architecture(ds, 8), tc);
    CHECK(serialize_weights(a.model) == serialize_weights(b.model));
    CHECK(a.epoch_losses == b.epoch_losses);
}

TEST_CASE("saved and reloaded model reproduces forward pass bit-exactly") {
    const SyntheticDataset ds = generate_dataset(48, 14);
    TrainConfig tc;
    tc.epochs = 4;
    const TrainResult tr = train_fixture(ds, fixture_architecture(ds, 14), tc);

    const auto tmp = std::filesystem::temp_directory_path();
    const std::string mpath = (tmp / "stochff_model_test.json").string();
    const std::string wpath = (tmp / "stochff_model_test.bin").string();
    save_model_files(tr.model, mpath, wpath);
    const Model back = load_model_files(mpath, wpath);
    std::remove(mpath.c_str());
    std::remove(wpath.c_str());

    for (std::size_t i = 0; i < 8; ++i) {
        const PredictionOutcome x = forward_det(tr.model, ds.data.images[i]);
        const PredictionOutcome y = forward_det(back, ds.data.images[i]);
        CHECK(x.predicted_class == y.predicted_class);
        for (std::size_t c = 0; c < x.class_probs.size(); ++c)
            CHECK(x.class_probs[c] == y.class_probs[c]);

        const PredictionOutcome sx = forward_stochastic(tr.model, ds.data.images[i], 0.05);
        const PredictionOutcome sy = forward_stochastic(back, ds.data.images[i], 0.05);
        for (std::size_t c = 0; c < sx.class_probs.size(); ++c) {
            CHECK(sx.class_probs[c] == sy.class_probs[c]);
            CHECK(sx.logit_variances[c] == sy.logit_variances[c]);
        }
    }
}
