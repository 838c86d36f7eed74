#pragma once

#include <stdexcept>

namespace stochff {

// Scalar (mean, variance) pair for a single Gaussian-approximated activation.
struct GaussMoments {
    double mean = 0.0;
    double variance = 0.0;
};

// Denominator regularization for the censored-ReLU and pairwise-max formulas.
// eps_denominator clamps 1 - Phi(alpha) away from zero; sigma_floor switches
// to the deterministic limit when the effective standard deviation vanishes.
struct RegularizationConstants {
    double eps_denominator = 1e-20;
    double sigma_floor = 1e-10;
};

double std_normal_pdf(double x);
double std_normal_cdf(double x);

// Inverse Mills ratio lambda(a) = pdf(a) / (1 - cdf(a)).
// Uses the regularized quotient up to a ~ 8 and an asymptotic continued
// fraction beyond, where 1 - cdf(a) underflows in 64-bit.
double inverse_mills(double alpha, const RegularizationConstants& reg = {});

// Mean and variance of max(X, theta) for X ~ N(mu, var) (left-censored normal).
GaussMoments censored_relu_moments(double mu, double var, double theta,
                                   const RegularizationConstants& reg = {});

// Mean and variance of max(A, B) for independent Gaussians A, B.
GaussMoments pairwise_max_moments(const GaussMoments& a, const GaussMoments& b,
                                  const RegularizationConstants& reg = {});

}  // namespace stochff
