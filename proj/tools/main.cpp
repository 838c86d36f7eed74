// stochff: moment-propagation CNN inference harness.
//
// Subcommands: train, sweep-variance, sweep-adversarial, ablate-maxpool, verify.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "CLI11.hpp"

#include "stochff/adversarial.hpp"
#include "stochff/data.hpp"
#include "stochff/gauss.hpp"
#include "stochff/mc.hpp"
#include "stochff/model.hpp"
#include "stochff/report.hpp"

namespace {

using namespace stochff;

std::uint64_t now_ms() {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now().time_since_epoch())
            .count());
}

std::vector<double> default_sigma2_grid() {
    std::vector<double> g;
    for (int k = 0; k <= 8; ++k) g.push_back(std::pow(10.0, -4.0 + 0.5 * k));
    return g;
}

AdversarialConfig adv_config(const Model& m, double k_adv, bool quantize) {
    AdversarialConfig cfg;
    cfg.k_adv = k_adv;
    cfg.sigma_c = m.preprocess.channel_std;
    cfg.clamp_lo = m.preprocess.pixel_lo;
    cfg.clamp_hi = m.preprocess.pixel_hi;
    cfg.quantize_bytes = quantize;
    return cfg;
}

struct CommonOpts {
    std::string model_prefix;
    std::string data_path;
    std::string out_path = "report.csv";
    std::uint64_t seed = 1;
    double epsilon = 1e-20;
    bool quantize_adv = false;
    bool timings = false;
    std::string sorted_maxpool = "on";
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--model", o.model_prefix, "model file prefix (<p>.json, <p>.bin)")
        ->required();
    cmd->add_option("--data", o.data_path, "dataset file")->required();
    cmd->add_option("--out", o.out_path, "output CSV path");
    cmd->add_option("--seed", o.seed, "report seed tag");
    cmd->add_option("--epsilon", o.epsilon, "denominator regularizer override");
    cmd->add_flag("--quantize-adv", o.quantize_adv,
                  "round adversarial pixels to byte values");
    cmd->add_flag("--timings", o.timings,
                  "record wall times (off keeps CSVs byte-reproducible)");
    cmd->add_option("--sorted-maxpool", o.sorted_maxpool, "on|off")
        ->check(CLI::IsMember({"on", "off"}));
}

Model load_prefixed(const CommonOpts& o) {
    Model m = load_model_files(o.model_prefix + ".json", o.model_prefix + ".bin");
    const bool sorted = (o.sorted_maxpool == "on");
    for (auto& l : m.layers)
        if (auto* p = std::get_if<PoolSpec>(&l)) p->sorted_mode = sorted;
    return m;
}

EvalMode mode_of(const std::string& s) {
    if (s == "det") return EvalMode::Deterministic;
    if (s == "stochastic") return EvalMode::Stochastic;
    return EvalMode::Ensemble;
}

ReportRow run_eval(const Model& m, const LabeledDataset& data, const std::string& mode,
                   double sigma2, double k_adv, const CommonOpts& o) {
    const RegularizationConstants reg{o.epsilon, 1e-10};
    const AdversarialConfig cfg = adv_config(m, k_adv, o.quantize_adv);
    const std::uint64_t t0 = now_ms();
    const double acc = evaluate_accuracy(m, data, mode_of(mode), sigma2,
                                         k_adv > 0.0 ? &cfg : nullptr, reg);
    ReportRow row;
    row.mode = mode;
    row.sigma2 = sigma2;
    row.k_adv = k_adv;
    bool sorted = true;
    for (const auto& l : m.layers)
        if (const auto* p = std::get_if<PoolSpec>(&l)) sorted = p->sorted_mode;
    row.sorted_mode = sorted;
    row.accuracy = acc;
    row.n_images = data.images.size();
    row.wall_time_ms = o.timings ? now_ms() - t0 : 0;
    row.seed = o.seed;
    return row;
}

int cmd_train(std::size_t n, std::uint64_t seed, std::size_t epochs,
              const std::string& out_model, const std::string& out_data) {
    SyntheticDataset ds = generate_dataset(n, seed);
    SyntheticDataset train_set, holdout;
    split_dataset(ds, 0.25, seed + 1, train_set, holdout);

    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.seed = seed + 2;
    TrainResult res = train_fixture(train_set, fixture_architecture(train_set, seed + 3), cfg);

    const double acc =
        evaluate_accuracy(res.model, holdout.data, EvalMode::Deterministic, 0.0);
    std::cout << "held-out accuracy: " << acc << " (" << holdout.size() << " images)\n";

    save_model_files(res.model, out_model + ".json", out_model + ".bin");
    save_dataset(ds, out_data);
    std::cout << "wrote " << out_model << ".json, " << out_model << ".bin, " << out_data
              << "\n";
    return 0;
}

int cmd_sweep_variance(const CommonOpts& o, double k_adv, std::vector<double> grid) {
    const Model m = load_prefixed(o);
    const SyntheticDataset ds = load_dataset(o.data_path);
    if (grid.empty()) grid = default_sigma2_grid();
    ExperimentReport report;
    for (double s2 : grid)
        for (const char* mode : {"det", "stochastic", "ensemble"})
            report.rows.push_back(run_eval(m, ds.data, mode, s2, k_adv, o));
    report.write_csv(o.out_path);
    std::cout << "wrote " << o.out_path << " (" << report.rows.size() << " rows)\n";
    return 0;
}

int cmd_sweep_adversarial(const CommonOpts& o, double sigma2, std::vector<double> grid) {
    const Model m = load_prefixed(o);
    const SyntheticDataset ds = load_dataset(o.data_path);
    if (grid.empty()) {
        const double unit = m.preprocess.channel_std[0];
        for (double f : {0.0, 0.25, 0.5, 1.0}) grid.push_back(f * unit);
    }
    ExperimentReport report;
    for (double k : grid)
        for (const char* mode : {"det", "stochastic", "ensemble"})
            report.rows.push_back(run_eval(m, ds.data, mode, sigma2, k, o));
    report.write_csv(o.out_path);
    std::cout << "wrote " << o.out_path << " (" << report.rows.size() << " rows)\n";
    return 0;
}

// Median |analytic fold mean - MC max mean| over random 3x3 windows.
double oracle_gap(bool sorted, double sigma2, std::size_t n_windows,
                  std::uint64_t mc_samples, std::uint64_t seed,
                  const RegularizationConstants& reg) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mean_dist(-2.0, 2.0);
    std::uniform_real_distribution<double> var_scale(0.5, 2.0);
    std::vector<double> errs;
    errs.reserve(n_windows);
    for (std::size_t w = 0; w < n_windows; ++w) {
        std::vector<GaussMoments> window(9);
        for (auto& g : window) g = {mean_dist(rng), sigma2 * var_scale(rng)};
        const GaussMoments folded = fold_max_moments(window, sorted, reg);
        const MCEstimate mc = mc_max(window, mc_samples, seed * 1000003 + w);
        errs.push_back(std::abs(folded.mean - mc.mean));
    }
    std::nth_element(errs.begin(), errs.begin() + errs.size() / 2, errs.end());
    return errs[errs.size() / 2];
}

int cmd_ablate_maxpool(const CommonOpts& o, std::vector<double> grid,
                       std::size_t n_windows, std::uint64_t mc_samples) {
    Model m = load_prefixed(o);
    const SyntheticDataset ds = load_dataset(o.data_path);
    if (grid.empty()) grid = {0.01, 0.1, 1.0, 4.0};
    const RegularizationConstants reg{o.epsilon, 1e-10};

    std::ofstream f(o.out_path);
    if (!f) {
        std::cerr << "cannot open " << o.out_path << "\n";
        return 1;
    }
    f << "sigma2,sorted_maxpool,accuracy,oracle_median_abs_err,n_images,n_windows,seed\n";
    for (double s2 : grid) {
        for (bool sorted : {true, false}) {
            for (auto& l : m.layers)
                if (auto* p = std::get_if<PoolSpec>(&l)) p->sorted_mode = sorted;
            const double acc =
                evaluate_accuracy(m, ds.data, EvalMode::Stochastic, s2, nullptr, reg);
            const double gap = oracle_gap(sorted, s2, n_windows, mc_samples, o.seed, reg);
            f << format_double(s2) << ',' << (sorted ? "on" : "off") << ','
              << format_double(acc) << ',' << format_double(gap) << ','
              << ds.size() << ',' << n_windows << ',' << o.seed << '\n';
        }
    }
    std::cout << "wrote " << o.out_path << "\n";
    return 0;
}

struct VerifyOpts {
    std::uint64_t mc_samples = 200000;
    std::uint64_t seed = 20240901;
    bool break_relu = false;  // test-only fault injection
};

int cmd_verify(const VerifyOpts& v) {
    if (v.mc_samples < 100000)
        std::cout << "warning: --mc-samples " << v.mc_samples
                  << " gives wide standard-error bands; expect flaky checks\n";
    int failures = 0;
    auto check = [&](const std::string& name, bool ok) {
        std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
        if (!ok) ++failures;
    };
    const RegularizationConstants reg;

    // censored-ReLU moments vs MC oracle
    {
        std::mt19937_64 rng(v.seed);
        std::uniform_real_distribution<double> mu_d(-5.0, 5.0);
        std::uniform_real_distribution<double> var_d(1e-4, 10.0);
        bool ok = true;
        for (int i = 0; i < 40 && ok; ++i) {
            const double mu = mu_d(rng), var = var_d(rng);
            const double theta = static_cast<double>(i % 3 - 1);
            GaussMoments a = censored_relu_moments(mu, var, theta, reg);
            if (v.break_relu) a.mean += 0.01;
            const MCEstimate mc = mc_relu(mu, var, theta, v.mc_samples, v.seed + i);
            ok = std::abs(a.mean - mc.mean) <= 4.0 * mc.std_error_mean;
        }
        check("censored-relu moments vs MC oracle", ok);
    }

    // pairwise-max moments vs MC oracle
    {
        std::mt19937_64 rng(v.seed + 1);
        std::uniform_real_distribution<double> mu_d(-5.0, 5.0);
        std::uniform_real_distribution<double> var_d(1e-4, 10.0);
        bool ok = true;
        for (int i = 0; i < 40 && ok; ++i) {
            const GaussMoments a{mu_d(rng), var_d(rng)}, b{mu_d(rng), var_d(rng)};
            const GaussMoments p = pairwise_max_moments(a, b, reg);
            const MCEstimate mc = mc_max({a, b}, v.mc_samples, v.seed + 100 + i);
            ok = std::abs(p.mean - mc.mean) <= 4.0 * mc.std_error_mean;
        }
        check("pairwise-max moments vs MC oracle", ok);
    }

    // gradient vs central finite differences on a random fixture-architecture model
    {
        const SyntheticDataset ds = generate_dataset(16, v.seed);
        const Model m = fixture_architecture(ds, v.seed + 2);
        const Tensor& img = ds.data.images[0];
        ActivationCache cache;
        forward_det(m, img, &cache);
        const Tensor grad = backward_input_gradient(m, cache, ds.data.labels[0]);

        std::mt19937_64 rng(v.seed + 3);
        std::uniform_int_distribution<std::size_t> pick(0, img.size() - 1);
        bool ok = true;
        const double h = 1e-5;
        const double sigma_c = m.preprocess.channel_std[0];
        for (int t = 0; t < 20 && ok; ++t) {
            const std::size_t i = pick(rng);
            auto loss_at = [&](double delta_pre) {
                Tensor x = img;
                x[i] += delta_pre * sigma_c;  // preprocessed-domain step in raw units
                auto o = forward_det(m, x);
                return -std::log(std::max(o.class_probs[ds.data.labels[0]], 1e-300));
            };
            const double fd = (loss_at(h) - loss_at(-h)) / (2.0 * h);
            const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-8});
            ok = std::abs(fd - grad[i]) / denom <= 1e-4;
        }
        check("input gradient vs finite differences", ok);
    }

    // degenerate equivalence: sigma2 = 0 matches the deterministic pass
    {
        const SyntheticDataset ds = generate_dataset(32, v.seed + 4);
        const Model m = fixture_architecture(ds, v.seed + 5);
        bool ok = true;
        for (std::size_t i = 0; i < ds.size() && ok; ++i) {
            const auto det = forward_det(m, ds.data.images[i]);
            const auto sto = forward_stochastic(m, ds.data.images[i], 0.0);
            ok = det.predicted_class == sto.predicted_class;
            for (std::size_t c = 0; c < det.class_probs.size() && ok; ++c)
                ok = std::abs(det.class_probs[c] - sto.class_probs[c]) <= 1e-9;
        }
        check("degenerate equivalence (sigma2 = 0)", ok);
    }

    std::cout << (failures == 0 ? "all checks passed\n"
                                : std::to_string(failures) + " check(s) failed\n");
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"moment-propagation CNN inference and adversarial-robustness harness"};
    app.require_subcommand(1);

    // train
    std::size_t train_n = 400, train_epochs = 30;
    std::uint64_t train_seed = 7;
    std::string out_model = "fixture", out_data = "fixture.data";
    auto* train = app.add_subcommand("train", "build dataset and fixture model files");
    train->add_option("--n", train_n, "dataset size");
    train->add_option("--seed", train_seed, "generation/training seed");
    train->add_option("--epochs", train_epochs, "training epochs");
    train->add_option("--out-model", out_model, "model output prefix");
    train->add_option("--out-data", out_data, "dataset output path");

    // sweep-variance
    CommonOpts sv_opts;
    double sv_kadv = 0.0;
    std::vector<double> sv_grid;
    auto* sv = app.add_subcommand("sweep-variance", "accuracy vs input variance");
    add_common(sv, sv_opts);
    sv->add_option("--kadv", sv_kadv, "fixed adversarial intensity (raw pixels)");
    sv->add_option("--sigma2", sv_grid, "sigma^2 grid (default log 1e-4..1)");

    // sweep-adversarial
    CommonOpts sa_opts;
    double sa_sigma2 = 0.1;
    std::vector<double> sa_grid;
    auto* sa = app.add_subcommand("sweep-adversarial", "accuracy vs adversarial intensity");
    add_common(sa, sa_opts);
    sa->add_option("--sigma2", sa_sigma2, "fixed input variance");
    sa->add_option("--kadv", sa_grid, "k_adv grid in raw pixels (default sigma_C-scaled)");

    // ablate-maxpool
    CommonOpts ab_opts;
    std::vector<double> ab_grid;
    std::size_t ab_windows = 200;
    std::uint64_t ab_samples = 20000;
    auto* ab = app.add_subcommand("ablate-maxpool", "sorted vs plain max-pool fold");
    add_common(ab, ab_opts);
    ab->add_option("--sigma2", ab_grid, "sigma^2 grid");
    ab->add_option("--windows", ab_windows, "random windows for the oracle gap");
    ab->add_option("--mc-samples", ab_samples, "MC samples per window");

    // verify
    VerifyOpts v_opts;
    auto* vf = app.add_subcommand("verify", "run oracle and invariant batteries");
    vf->add_option("--mc-samples", v_opts.mc_samples, "MC samples per oracle check");
    vf->add_option("--seed", v_opts.seed, "battery seed");
    vf->add_flag("--break-relu", v_opts.break_relu)->group("");  // test-only

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed())
            return cmd_train(train_n, train_seed, train_epochs, out_model, out_data);
        if (sv->parsed()) return cmd_sweep_variance(sv_opts, sv_kadv, sv_grid);
        if (sa->parsed()) return cmd_sweep_adversarial(sa_opts, sa_sigma2, sa_grid);
        if (ab->parsed()) return cmd_ablate_maxpool(ab_opts, ab_grid, ab_windows, ab_samples);
        if (vf->parsed()) return cmd_verify(v_opts);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
