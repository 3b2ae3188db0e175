#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "mecsim/rng.hpp"

namespace mecsim {

inline double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// digamma via recurrence into the asymptotic region
inline double digamma(double x) {
    double r = 0.0;
    while (x < 8.0) {
        r -= 1.0 / x;
        x += 1.0;
    }
    const double ix = 1.0 / x;
    const double ix2 = ix * ix;
    return r + std::log(x) - 0.5 * ix -
           ix2 * (1.0 / 12.0 -
                  ix2 * (1.0 / 120.0 - ix2 * (1.0 / 252.0 - ix2 * (1.0 / 240.0 - ix2 / 132.0))));
}

inline double trigamma(double x) {
    double r = 0.0;
    while (x < 8.0) {
        r += 1.0 / (x * x);
        x += 1.0;
    }
    const double ix = 1.0 / x;
    const double ix2 = ix * ix;
    return r + ix * (1.0 + ix * (0.5 + ix * (1.0 / 6.0 -
                                             ix2 * (1.0 / 30.0 -
                                                    ix2 * (1.0 / 42.0 - ix2 * (1.0 / 30.0 - ix2 * 5.0 / 66.0))))));
}

inline constexpr double kBetaClamp = 1e-6;

inline double clamp_unit_open(double x) {
    if (x < kBetaClamp) return kBetaClamp;
    if (x > 1.0 - kBetaClamp) return 1.0 - kBetaClamp;
    return x;
}

// log Beta(tau, zeta) density at x; x hitting {0,1} is clamped inward first.
inline double beta_logpdf(double x, double tau, double zeta) {
    if (!(tau > 0.0) || !(zeta > 0.0)) throw std::domain_error("beta_logpdf: shape parameters must be positive");
    x = clamp_unit_open(x);
    return std::lgamma(tau + zeta) - std::lgamma(tau) - std::lgamma(zeta) + (tau - 1.0) * std::log(x) +
           (zeta - 1.0) * std::log1p(-x);
}

// d/dtau, d/dzeta of beta_logpdf at fixed (clamped) x
inline std::pair<double, double> beta_logpdf_grad(double x, double tau, double zeta) {
    x = clamp_unit_open(x);
    const double common = digamma(tau + zeta);
    return {common - digamma(tau) + std::log(x), common - digamma(zeta) + std::log1p(-x)};
}

inline double beta_mean(double tau, double zeta) { return tau / (tau + zeta); }

inline double beta_sample(Rng& rng, double tau, double zeta) {
    if (!(tau > 0.0) || !(zeta > 0.0)) throw std::domain_error("beta_sample: shape parameters must be positive");
    double x = rng.beta(tau, zeta);
    if (x < 1e-12) x = 1e-12;
    if (x > 1.0 - 1e-12) x = 1.0 - 1e-12;
    return x;
}

// differential entropy in nats
inline double beta_entropy(double tau, double zeta) {
    const double log_beta = std::lgamma(tau) + std::lgamma(zeta) - std::lgamma(tau + zeta);
    return log_beta - (tau - 1.0) * digamma(tau) - (zeta - 1.0) * digamma(zeta) +
           (tau + zeta - 2.0) * digamma(tau + zeta);
}

inline std::pair<double, double> beta_entropy_grad(double tau, double zeta) {
    const double t = (tau + zeta - 2.0) * trigamma(tau + zeta);
    return {t - (tau - 1.0) * trigamma(tau), t - (zeta - 1.0) * trigamma(zeta)};
}

inline constexpr double kLog2Pi = 1.8378770664093453;

inline double gaussian_logpdf(double x, double mean, double sigma) {
    const double z = (x - mean) / sigma;
    return -0.5 * z * z - std::log(sigma) - 0.5 * kLog2Pi;
}

// d/dmean and d/dlog_sigma
inline std::pair<double, double> gaussian_logpdf_grad(double x, double mean, double sigma) {
    const double z = (x - mean) / sigma;
    return {z / sigma, z * z - 1.0};
}

inline double gaussian_entropy(double log_sigma) { return 0.5 * (1.0 + kLog2Pi) + log_sigma; }

} // namespace mecsim
