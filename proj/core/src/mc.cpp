#include "stochff/mc.hpp"

#include <cmath>
#include <stdexcept>

namespace stochff {

namespace {

constexpr std::uint32_t kPhiloxW32A = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW32B = 0xBB67AE85u;
constexpr std::uint32_t kPhiloxM4x32A = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM4x32B = 0xCD9E8D57u;

inline void philox_round(std::array<std::uint32_t, 4>& ctr, std::uint32_t k0,
                         std::uint32_t k1) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM4x32A) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM4x32B) * ctr[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
}

// Running central moments up to order four (Welford / Pebay updates).
struct Accumulator {
    double mean = 0.0;
    double m2 = 0.0;
    double m3 = 0.0;
    double m4 = 0.0;
    std::uint64_t n = 0;

    void add(double x) {
        const double n1 = static_cast<double>(n);
        ++n;
        const double nn = static_cast<double>(n);
        const double d = x - mean;
        const double dn = d / nn;
        const double dn2 = dn * dn;
        const double t1 = d * dn * n1;
        mean += dn;
        m4 += t1 * dn2 * (nn * nn - 3.0 * nn + 3.0) + 6.0 * dn2 * m2 - 4.0 * dn * m3;
        m3 += t1 * dn * (nn - 2.0) - 3.0 * dn * m2;
        m2 += t1;
    }
    double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
};

MCEstimate finish(const Accumulator& acc, std::uint64_t seed) {
    MCEstimate e;
    e.mean = acc.mean;
    e.variance = acc.variance();
    e.samples = acc.n;
    e.seed = seed;
    const double nn = static_cast<double>(acc.n);
    e.std_error_mean = std::sqrt(e.variance / nn);
    // Var(s^2) ~ (mu4 - sigma^4) / n
    const double mu4 = acc.m4 / nn;
    const double s2 = acc.m2 / nn;
    e.std_error_var = std::sqrt(std::max(mu4 - s2 * s2, 0.0) / nn);
    return e;
}

}  // namespace

std::array<std::uint32_t, 4> Philox4x32::block(std::uint64_t seed, std::uint64_t counter) {
    std::array<std::uint32_t, 4> ctr = {static_cast<std::uint32_t>(counter),
                                        static_cast<std::uint32_t>(counter >> 32), 0u, 0u};
    std::uint32_t k0 = static_cast<std::uint32_t>(seed);
    std::uint32_t k1 = static_cast<std::uint32_t>(seed >> 32);
    for (int r = 0; r < 10; ++r) {
        philox_round(ctr, k0, k1);
        k0 += kPhiloxW32A;
        k1 += kPhiloxW32B;
    }
    return ctr;
}

double standard_normal_at(std::uint64_t seed, std::uint64_t index) {
    const auto w = Philox4x32::block(seed, index);
    // Box-Muller from two 32-bit words; +1 keeps u1 strictly positive.
    const double u1 = (static_cast<double>(w[0]) + 1.0) * 0x1p-32;
    const double u2 = static_cast<double>(w[1]) * 0x1p-32;
    constexpr double kTwoPi = 6.283185307179586476925287;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

MCEstimate mc_relu(double mu, double var, double theta, std::uint64_t samples,
                   std::uint64_t seed) {
    if (samples < 1) throw std::invalid_argument("mc_relu: samples must be >= 1");
    if (!(var >= 0.0)) throw std::invalid_argument("mc_relu: negative variance");
    const double sigma = std::sqrt(var);
    Accumulator acc;
    for (std::uint64_t i = 0; i < samples; ++i) {
        const double x = mu + sigma * standard_normal_at(seed, i);
        acc.add(x > theta ? x : theta);
    }
    return finish(acc, seed);
}

MCEstimate mc_max(const std::vector<GaussMoments>& inputs, std::uint64_t samples,
                  std::uint64_t seed) {
    if (inputs.empty()) throw std::invalid_argument("mc_max: empty input list");
    if (samples < 1) throw std::invalid_argument("mc_max: samples must be >= 1");
    std::vector<double> sigma(inputs.size());
    for (std::size_t j = 0; j < inputs.size(); ++j) {
        if (!(inputs[j].variance >= 0.0))
            throw std::invalid_argument("mc_max: negative variance");
        sigma[j] = std::sqrt(inputs[j].variance);
    }
    Accumulator acc;
    for (std::uint64_t i = 0; i < samples; ++i) {
        double m = -1e308;
        for (std::size_t j = 0; j < inputs.size(); ++j) {
            const double x = inputs[j].mean +
                             sigma[j] * standard_normal_at(seed, i * inputs.size() + j);
            if (x > m) m = x;
        }
        acc.add(m);
    }
    return finish(acc, seed);
}

}  // namespace stochff
