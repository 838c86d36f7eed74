#include "stochff/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

namespace stochff {

namespace {

constexpr std::uint32_t kDatasetMagic = 0x53464431u;  // "SFD1"

void draw_shape(Tensor& img, std::size_t cls, int jx, int jy) {
    const int side = static_cast<int>(kDatasetSide);
    auto set = [&](int y, int x, double v) {
        if (y >= 0 && y < side && x >= 0 && x < side)
            img.at3(0, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = v;
    };
    const int cx = side / 2 + jx, cy = side / 2 + jy;
    const double fg = 220.0;
    switch (cls) {
        case 0:  // filled square
            for (int y = -3; y <= 2; ++y)
                for (int x = -3; x <= 2; ++x) set(cy + y, cx + x, fg);
            break;
        case 1:  // hollow square
            for (int d = -3; d <= 2; ++d) {
                set(cy - 3, cx + d, fg);
                set(cy + 2, cx + d, fg);
                set(cy + d, cx - 3, fg);
                set(cy + d, cx + 2, fg);
            }
            break;
        case 2:  // cross
            for (int d = -4; d <= 3; ++d) {
                set(cy + d, cx, fg);
                set(cy + d, cx - 1, fg);
                set(cy, cx + d, fg);
                set(cy - 1, cx + d, fg);
            }
            break;
        default:  // diagonal stripe
            for (int d = -5; d <= 5; ++d) {
                set(cy + d, cx + d, fg);
                set(cy + d + 1, cx + d, fg);
            }
            break;
    }
}

}  // namespace

SyntheticDataset generate_dataset(std::size_t n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("generate_dataset: n must be >= 1");
    SyntheticDataset ds;
    ds.seed = seed;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> jitter(-2, 2);
    std::uniform_real_distribution<double> noise(-10.0, 10.0);

    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t cls = i % kDatasetClasses;  // balanced by construction
        Tensor img(Shape{1, kDatasetSide, kDatasetSide}, 30.0);
        draw_shape(img, cls, jitter(rng), jitter(rng));
        for (double& p : img.data())
            p = std::clamp(p + noise(rng), 0.0, 255.0);
        ds.data.images.push_back(std::move(img));
        ds.data.labels.push_back(cls);
    }
    return ds;
}

void save_dataset(const SyntheticDataset& ds, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    auto put = [&](const void* p, std::size_t len) {
        f.write(static_cast<const char*>(p), static_cast<std::streamsize>(len));
    };
    const std::uint32_t magic = kDatasetMagic;
    const std::uint64_t count = ds.size();
    const std::uint32_t shape[3] = {1u, static_cast<std::uint32_t>(kDatasetSide),
                                    static_cast<std::uint32_t>(kDatasetSide)};
    put(&magic, sizeof magic);
    put(&count, sizeof count);
    put(shape, sizeof shape);
    put(&ds.seed, sizeof ds.seed);
    for (const Tensor& img : ds.data.images)
        put(img.data().data(), img.size() * sizeof(double));
    for (std::size_t label : ds.data.labels) {
        const std::uint8_t b = static_cast<std::uint8_t>(label);
        put(&b, 1);
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

SyntheticDataset load_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    auto get = [&](void* p, std::size_t len) {
        f.read(static_cast<char*>(p), static_cast<std::streamsize>(len));
        if (!f) throw std::runtime_error("truncated dataset file: " + path);
    };
    std::uint32_t magic = 0;
    get(&magic, sizeof magic);
    if (magic != kDatasetMagic)
        throw std::runtime_error("bad dataset magic: " + path);
    std::uint64_t count = 0;
    std::uint32_t shape[3];
    SyntheticDataset ds;
    get(&count, sizeof count);
    get(shape, sizeof shape);
    get(&ds.seed, sizeof ds.seed);
    const std::size_t pixels = static_cast<std::size_t>(shape[0]) * shape[1] * shape[2];
    for (std::uint64_t i = 0; i < count; ++i) {
        std::vector<double> data(pixels);
        get(data.data(), pixels * sizeof(double));
        ds.data.images.emplace_back(Shape{shape[0], shape[1], shape[2]},
                                    std::move(data));
    }
    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint8_t b = 0;
        get(&b, 1);
        ds.data.labels.push_back(b);
    }
    return ds;
}

Model fixture_architecture(const SyntheticDataset& ds, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto he_init = [&](Shape shape, std::size_t fan_in) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
        Tensor t(shape, 0.0);
        for (double& w : t.data()) w = dist(rng);
        return t;
    };

    Model m;
    m.input_shape = Shape{1, kDatasetSide, kDatasetSide};

    // preprocess stats over the provided dataset
    double sum = 0.0, sum2 = 0.0;
    std::size_t n = 0;
    for (const Tensor& img : ds.data.images)
        for (double p : img.data()) {
            sum += p;
            sum2 += p * p;
            ++n;
        }
    const double mean = sum / n;
    const double var = std::max(sum2 / n - mean * mean, 1e-12);
    m.preprocess.channel_mean = {mean};
    m.preprocess.channel_std = {std::sqrt(var)};
    m.preprocess.pixel_lo = 0.0;
    m.preprocess.pixel_hi = 255.0;

    ConvParams c1;
    c1.weights = he_init(Shape{8, 1, 3, 3}, 9);
    c1.bias = Tensor(Shape{8}, 0.0);
    c1.stride = 1;
    c1.padding = 1;
    ConvParams c2;
    c2.weights = he_init(Shape{16, 8, 3, 3}, 72);
    c2.bias = Tensor(Shape{16}, 0.0);
    c2.stride = 1;
    c2.padding = 1;
    DenseParams d;
    d.weights = he_init(Shape{kDatasetClasses, 16 * 3 * 3}, 16 * 3 * 3);
    d.bias = Tensor(Shape{kDatasetClasses}, 0.0);

    m.layers = {std::move(c1), ReluDescriptor{0.0}, PoolSpec{2, 2, 2, true},
                std::move(c2), ReluDescriptor{0.0}, PoolSpec{2, 2, 2, true},
                FlattenDescriptor{}, std::move(d), SoftmaxDescriptor{}};
    m.validate();
    return m;
}

void split_dataset(const SyntheticDataset& ds, double holdout_fraction,
                   std::uint64_t seed, SyntheticDataset& train_out,
                   SyntheticDataset& holdout_out) {
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t holdout_n =
        static_cast<std::size_t>(std::round(holdout_fraction * ds.size()));
    train_out = SyntheticDataset{};
    holdout_out = SyntheticDataset{};
    train_out.seed = holdout_out.seed = ds.seed;
    for (std::size_t i = 0; i < order.size(); ++i) {
        SyntheticDataset& dst = (i < holdout_n) ? holdout_out : train_out;
        dst.data.images.push_back(ds.data.images[order[i]]);
        dst.data.labels.push_back(ds.data.labels[order[i]]);
    }
}

TrainResult train_fixture(const SyntheticDataset& train_set, Model arch,
                          const TrainConfig& cfg) {
    if (cfg.batch_size < 1)
        throw std::invalid_argument("train_fixture: invalid config");
    TrainResult result{std::move(arch), {}};
    Model& m = result.model;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.seed);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, order.size());
            ParamGradients pg = make_param_gradients(m);
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t idx = order[k];
                ActivationCache cache;
                const PredictionOutcome o =
                    forward_det(m, train_set.data.images[idx], &cache);
                const double p = o.class_probs[train_set.data.labels[idx]];
                epoch_loss += -std::log(std::max(p, 1e-300));
                backward_pass(m, cache, train_set.data.labels[idx], &pg);
            }
            const double step =
                cfg.learning_rate / static_cast<double>(end - start);
            for (std::size_t i = 0; i < m.layers.size(); ++i) {
                if (pg.weight[i].shape().rank() < 2) continue;
                std::visit(
                    [&](auto& l) {
                        using T = std::decay_t<decltype(l)>;
                        if constexpr (std::is_same_v<T, ConvParams> ||
                                      std::is_same_v<T, DenseParams>) {
                            for (std::size_t j = 0; j < l.weights.size(); ++j)
                                l.weights[j] -= step * pg.weight[i][j];
                            for (std::size_t j = 0; j < l.bias.size(); ++j)
                                l.bias[j] -= step * pg.bias[i][j];
                        }
                    },
                    m.layers[i]);
            }
        }
        epoch_loss /= static_cast<double>(train_set.size());
        if (!std::isfinite(epoch_loss))
            throw std::runtime_error("train_fixture: diverged (loss is not finite) at epoch " +
                                     std::to_string(epoch));
        result.epoch_losses.push_back(epoch_loss);
    }
    return result;
}

}  // namespace stochff
