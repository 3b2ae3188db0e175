#pragma once

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

namespace mecsim {

inline constexpr double kInfDelay = std::numeric_limits<double>::infinity();

// Estimated per-type complexity and the realized deviation for the episode.
struct TaskTypeModel {
    std::vector<double> estimated;  // \hat c_z, cycles/bit
    std::vector<double> deviation;  // realized error, |deviation[z]| <= radius

    double true_complexity(int z) const {
        return estimated[static_cast<std::size_t>(z)] + deviation[static_cast<std::size_t>(z)];
    }
};

// Decoded per-UE allocation for one slot.
struct Allocation {
    double rho = 0.0;       // task partition factor in [0, 1]
    int uav = -1;           // serving UAV index, -1 = fully local
    double f_local = 0.0;   // Hz
    double f_edge = 0.0;    // Hz allocated by the serving UAV
};

struct DelayEnergy {
    double delay = 0.0;   // s
    double energy = 0.0;  // J
};

// rho*d offloaded, remainder local; the two parts sum to d exactly. The
// re-subtraction nudges the offloaded part by at most one ulp so the pair
// is an exact partition (d - l is exactly representable once l = fl(d - o),
// the Fast2Sum lemma).
inline std::pair<double, double> split_task(double bits, double rho) {
    if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("split_task: rho outside [0,1]");
    const double local = bits - rho * bits;
    const double off = bits - local;
    return {off, local};
}

// Local computing: delay d*c/f, energy kappa*d*c*f^2. Zero frequency with
// pending bits is an unmet demand, reported as infinite delay.
inline DelayEnergy local_delay_energy(double bits, double cycles_per_bit, double freq, double kappa) {
    DelayEnergy r;
    if (bits <= 0.0) return r;
    r.energy = kappa * bits * cycles_per_bit * freq * freq;
    r.delay = freq > 0.0 ? bits * cycles_per_bit / freq : kInfDelay;
    return r;
}

// Uplink transmission: delay d/rate, energy p * delay. No usable rate means
// the transfer never completes; no transmission energy is charged.
inline DelayEnergy offload_delay_energy(double bits, double rate_bps, double tx_power) {
    DelayEnergy r;
    if (bits <= 0.0) return r;
    if (!(rate_bps > 0.0)) {
        r.delay = kInfDelay;
        return r;
    }
    r.delay = bits / rate_bps;
    r.energy = tx_power * r.delay;
    return r;
}

// Edge computing mirrors the local model at the UAV's allocated frequency.
inline DelayEnergy edge_delay_energy(double bits, double cycles_per_bit, double freq, double kappa) {
    return local_delay_energy(bits, cycles_per_bit, freq, kappa);
}

// Offload path (transmit then compute) runs in series; the local path runs
// in parallel with it.
inline double service_delay(double t_offload, double t_edge, double t_local) {
    if (t_offload < 0.0 || t_edge < 0.0 || t_local < 0.0)
        throw std::domain_error("service_delay: negative component");
    return std::max(t_offload + t_edge, t_local);
}

struct EnergyBreakdown {
    double local = 0.0;    // sum over UEs
    double offload = 0.0;  // sum over UEs
    double edge = 0.0;     // sum over UAVs
    double flight = 0.0;   // sum over UAVs

    double ue_side() const { return local + offload; }
    double uav_side() const { return edge + flight; }
    double weighted(double omega) const { return ue_side() + omega * uav_side(); }
};

// Aggregate one slot's per-entity terms into the weighted objective.
inline std::pair<double, EnergyBreakdown> slot_energy(const std::vector<double>& ue_local,
                                                      const std::vector<double>& ue_offload,
                                                      const std::vector<double>& uav_edge,
                                                      const std::vector<double>& uav_flight,
                                                      double omega) {
    EnergyBreakdown b;
    for (double e : ue_local) b.local += e;
    for (double e : ue_offload) b.offload += e;
    for (double e : uav_edge) b.edge += e;
    for (double e : uav_flight) b.flight += e;
    return {b.weighted(omega), b};
}

} // namespace mecsim
