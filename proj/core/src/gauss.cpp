#include "stochff/gauss.hpp"

#include <algorithm>
#include <cmath>

namespace stochff {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;
constexpr double kInvSqrt2 = 0.7071067811865475244008444;

// Past this standard score 1 - Phi underflows and the quotient form of the
// Mills ratio loses all accuracy.
constexpr double kMillsAsymptoticSwitch = 8.0;

// Mills ratio R(a) = (1 - Phi(a)) / phi(a) for large a via the continued
// fraction R(a) = 1 / (a + 1 / (a + 2 / (a + 3 / ...))), evaluated backward.
double mills_ratio_asymptotic(double a) {
    double frac = 0.0;
    for (int k = 64; k >= 1; --k)
        frac = static_cast<double>(k) / (a + frac);
    return 1.0 / (a + frac);
}

}  // namespace

double std_normal_pdf(double x) {
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double std_normal_cdf(double x) {
    return 0.5 * std::erfc(-x * kInvSqrt2);
}

namespace {

// 1 - Phi(a) without cancellation.
double std_normal_tail(double a) {
    return 0.5 * std::erfc(a * kInvSqrt2);
}

}  // namespace

double inverse_mills(double alpha, const RegularizationConstants& reg) {
    if (alpha > kMillsAsymptoticSwitch)
        return 1.0 / mills_ratio_asymptotic(alpha);
    const double tail = std::max(std_normal_tail(alpha), reg.eps_denominator);
    return std_normal_pdf(alpha) / tail;
}

GaussMoments censored_relu_moments(double mu, double var, double theta,
                                   const RegularizationConstants& reg) {
    if (!(var >= 0.0))
        throw std::invalid_argument("censored_relu_moments: negative variance");
    const double sigma = std::sqrt(var);
    if (sigma < reg.sigma_floor)
        return {std::max(mu, theta), 0.0};

    const double alpha = (theta - mu) / sigma;
    const double Phi = std_normal_cdf(alpha);
    const double tail = std_normal_tail(alpha);  // 1 - Phi(alpha)
    const double lam = inverse_mills(alpha, reg);
    const double delta = lam * (lam - alpha);

    // E[max(X, theta)] >= theta always; the clamp absorbs cancellation noise.
    const double mean =
        std::max(theta * Phi + (mu + sigma * lam) * tail, theta);
    double variance =
        var * tail * ((1.0 - delta) + (alpha - lam) * (alpha - lam) * Phi);
    variance = std::max(variance, 0.0);
    return {mean, variance};
}

GaussMoments pairwise_max_moments(const GaussMoments& a, const GaussMoments& b,
                                  const RegularizationConstants& reg) {
    if (!(a.variance >= 0.0) || !(b.variance >= 0.0))
        throw std::invalid_argument("pairwise_max_moments: negative variance");
    const double theta = std::sqrt(a.variance + b.variance);
    if (theta < reg.sigma_floor) {
        if (a.mean >= b.mean) return {a.mean, a.variance};
        return {b.mean, b.variance};
    }

    const double alpha = (a.mean - b.mean) / theta;
    const double Phi_p = std_normal_cdf(alpha);
    const double Phi_m = std_normal_cdf(-alpha);
    const double phi = std_normal_pdf(alpha);

    const double mean = a.mean * Phi_p + b.mean * Phi_m + theta * phi;
    double variance = (a.variance + a.mean * a.mean) * Phi_p +
                      (b.variance + b.mean * b.mean) * Phi_m +
                      (a.mean + b.mean) * theta * phi - mean * mean;
    variance = std::max(variance, 0.0);
    return {mean, variance};
}

}  // namespace stochff
