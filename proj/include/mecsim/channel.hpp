#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "mecsim/rng.hpp"
#include "mecsim/vec2.hpp"

namespace mecsim {

using Cvec = std::vector<std::complex<double>>;

inline constexpr double kSpeedOfLight = 3.0e8;  // m/s
inline constexpr double kPi = 3.14159265358979323846;

// Rician UPA channel constants. `reference_gain` is the linear path gain at
// 1 m; the config layer resolves it from either a free-space constant or a
// normalization that puts channel norms at O(1) near the reference distance
// so that the CSI error radius is a relative perturbation.
struct ChannelParams {
    double path_loss_exponent = 2.2;
    double reference_gain = 28853.9981181443;  // rho: ||h||^2 ~ 1 at 200 m for the defaults below
    double rician_factor = 10.0;
    double carrier_freq = 2.0e9;    // Hz
    double spacing = 0.074948114;   // m, inter-element spacing (half wavelength at 2 GHz)
    int array_x = 2;                // A_x
    int array_y = 2;                // A_y
    double bandwidth = 1.0e7;       // Hz
    double noise_power = 3.1622776601683794e-12;  // W (-85 dBm)

    int array_size() const { return array_x * array_y; }

    void validate() const {
        if (array_x < 1 || array_y < 1) throw std::invalid_argument("channel: array dims must be >= 1");
        if (rician_factor < 0.0) throw std::invalid_argument("channel: rician_factor must be >= 0");
        if (!(noise_power > 0.0)) throw std::invalid_argument("channel: noise_power must be positive");
        if (!(bandwidth > 0.0)) throw std::invalid_argument("channel: bandwidth must be positive");
        if (!(reference_gain > 0.0)) throw std::invalid_argument("channel: reference_gain must be positive");
        if (!(carrier_freq > 0.0) || !(spacing > 0.0))
            throw std::invalid_argument("channel: carrier_freq and spacing must be positive");
    }
};

// One (UE, UAV, slot) channel draw: the estimate the agents may use, the
// bounded error, and the realized channel the environment computes with.
struct ChannelRealization {
    Cvec estimated;  // \hat h
    Cvec error;      // delta h, ||error|| <= radius by construction
    Cvec actual;     // estimated + error
};

struct Beamformer {
    Cvec w;  // unit norm
};

struct AodAngles {
    double elevation = 0.0;  // rad, vertical angle of departure
    double azimuth = 0.0;    // rad, horizontal angle of departure
};

inline double cvec_norm(const Cvec& v) {
    double s = 0.0;
    for (const auto& c : v) s += std::norm(c);
    return std::sqrt(s);
}

// w^H h
inline std::complex<double> inner(const Cvec& w, const Cvec& h) {
    std::complex<double> s{0.0, 0.0};
    for (std::size_t i = 0; i < w.size(); ++i) s += std::conj(w[i]) * h[i];
    return s;
}

// Departure angles of the UAV->UE path. Directly overhead the azimuth is
// undefined; fix it to 0 with elevation pi/2.
inline AodAngles aod_angles(const Vec2& uav_pos, const Vec2& ue_pos, double altitude) {
    if (!(altitude > 0.0)) throw std::domain_error("aod_angles: altitude must be positive");
    const double r = distance(uav_pos, ue_pos);
    if (r == 0.0) return {kPi / 2.0, 0.0};
    AodAngles a;
    a.elevation = std::asin(altitude / std::sqrt(r * r + altitude * altitude));
    double c = (uav_pos.y - ue_pos.y) / r;
    if (c > 1.0) c = 1.0;
    if (c < -1.0) c = -1.0;
    a.azimuth = std::acos(c);
    return a;
}

// LoS steering vector of the A_x x A_y planar array: Kronecker product of
// the x-axis phase progression (cos-azimuth) and the y-axis progression
// (sin-azimuth). Entry (ax, ay) lands at index ax*A_y + ay.
inline Cvec los_steering(const AodAngles& aod, const ChannelParams& cp) {
    const double g = 2.0 * kPi * cp.spacing * cp.carrier_freq / kSpeedOfLight * std::sin(aod.elevation);
    const double px = g * std::cos(aod.azimuth);
    const double py = g * std::sin(aod.azimuth);
    Cvec out(static_cast<std::size_t>(cp.array_size()));
    for (int ax = 0; ax < cp.array_x; ++ax)
        for (int ay = 0; ay < cp.array_y; ++ay)
            out[static_cast<std::size_t>(ax * cp.array_y + ay)] =
                std::polar(1.0, -(px * ax + py * ay));
    return out;
}

// Rician mixture around the geometric LoS response plus a bounded error
// vector drawn uniformly in the complex ball of the given radius. The error
// draw consumes the same number of variates regardless of the radius, so
// sweeps over the radius stay paired under one seed.
inline ChannelRealization synthesize_channel(Rng& rng, const Vec2& uav_pos, const Vec2& ue_pos,
                                             const ChannelParams& cp, double altitude,
                                             double error_radius) {
    const int n = cp.array_size();
    const double ground = distance(uav_pos, ue_pos);
    const double d3 = std::sqrt(ground * ground + altitude * altitude);
    const double amp = std::sqrt(cp.reference_gain * std::pow(d3, -cp.path_loss_exponent));
    const double los_w = std::sqrt(cp.rician_factor / (cp.rician_factor + 1.0));
    const double nlos_w = std::sqrt(1.0 / (cp.rician_factor + 1.0));

    ChannelRealization ch;
    ch.estimated = los_steering(aod_angles(uav_pos, ue_pos, altitude), cp);
    for (int i = 0; i < n; ++i) {
        const std::complex<double> scatter{rng.normal() / std::sqrt(2.0), rng.normal() / std::sqrt(2.0)};
        ch.estimated[static_cast<std::size_t>(i)] =
            amp * (los_w * ch.estimated[static_cast<std::size_t>(i)] + nlos_w * scatter);
    }

    // uniform draw in the radius-eps complex ball: gaussian direction,
    // radius ~ eps * U^(1/(2n))
    ch.error.resize(static_cast<std::size_t>(n));
    double dir_norm_sq = 0.0;
    for (auto& e : ch.error) {
        e = {rng.normal(), rng.normal()};
        dir_norm_sq += std::norm(e);
    }
    const double u = rng.uniform();
    double scale = 0.0;
    if (error_radius > 0.0 && dir_norm_sq > 0.0)
        scale = error_radius * std::pow(u, 1.0 / (2.0 * n)) / std::sqrt(dir_norm_sq);
    ch.actual.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        ch.error[static_cast<std::size_t>(i)] *= scale;
        ch.actual[static_cast<std::size_t>(i)] =
            ch.estimated[static_cast<std::size_t>(i)] + ch.error[static_cast<std::size_t>(i)];
    }
    return ch;
}

// Maximum ratio combining on the channel estimate.
inline Beamformer mrc_beamformer(const Cvec& estimated) {
    const double n = cvec_norm(estimated);
    if (!(n > 0.0)) throw std::invalid_argument("mrc_beamformer: zero channel estimate");
    Beamformer b;
    b.w.reserve(estimated.size());
    for (const auto& c : estimated) b.w.push_back(c / n);
    return b;
}

// SINR of UE k received at its serving UAV. `channels[i*M + j]` is the
// realized channel of link (UE i, UAV j); `assoc[i]` is the UAV serving UE i
// or -1. Interference collects every other transmitting UE through its own
// association, seen through this link's beamformer.
inline double sinr(int k, int m, const std::vector<Cvec>& channels, int num_uavs,
                   const Beamformer& w, const std::vector<double>& powers,
                   const std::vector<int>& assoc, double noise_power) {
    if (!(noise_power > 0.0)) throw std::domain_error("sinr: noise power must be positive");
    const auto idx = [num_uavs](int i, int j) {
        return static_cast<std::size_t>(i * num_uavs + j);
    };
    const double signal = std::norm(inner(w.w, channels[idx(k, m)])) * powers[static_cast<std::size_t>(k)];
    double interference = 0.0;
    for (int i = 0; i < static_cast<int>(assoc.size()); ++i) {
        if (i == k || assoc[static_cast<std::size_t>(i)] < 0) continue;
        interference += std::norm(inner(w.w, channels[idx(i, assoc[static_cast<std::size_t>(i)])])) *
                        powers[static_cast<std::size_t>(i)];
    }
    return signal / (interference + noise_power);
}

inline double rate(double sinr_value, double bandwidth) {
    if (sinr_value < 0.0) throw std::domain_error("rate: negative SINR");
    return bandwidth * std::log2(1.0 + sinr_value);
}

} // namespace mecsim
