#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "stochff/gauss.hpp"

namespace stochff {

// Philox-4x32-10 counter-based generator (Salmon et al., SC 2011).
// Stateless: output is a pure function of (seed, counter), so sampling is
// reproducible and trivially partitionable across workers.
struct Philox4x32 {
    static std::array<std::uint32_t, 4> block(std::uint64_t seed, std::uint64_t counter);
};

// One standard-normal draw at stream position `index` for a given seed.
double standard_normal_at(std::uint64_t seed, std::uint64_t index);

// Sample-moment estimate with its Monte-Carlo standard error.
struct MCEstimate {
    double mean = 0.0;
    double variance = 0.0;
    double std_error_mean = 0.0;
    double std_error_var = 0.0;  // from the central fourth moment
    std::uint64_t samples = 0;
    std::uint64_t seed = 0;
};

// Samples max(X, theta) for X ~ N(mu, var).
MCEstimate mc_relu(double mu, double var, double theta, std::uint64_t samples,
                   std::uint64_t seed);

// Samples max over n independent Gaussians per draw; n >= 1.
MCEstimate mc_max(const std::vector<GaussMoments>& inputs, std::uint64_t samples,
                  std::uint64_t seed);

}  // namespace stochff
