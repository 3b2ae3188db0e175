#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mecsim/compute.hpp"

namespace mecsim {

struct UncertaintyBudget {
    double csi_radius = 0.05;        // per-link CSI error ball radius
    double complexity_radius = 20.0; // per-type complexity interval radius

    void validate() const {
        if (csi_radius < 0.0 || complexity_radius < 0.0)
            throw std::invalid_argument("uncertainty: radii must be >= 0");
    }
};

// Lower bound on the offloading rate over the CSI error ball. With a unit
// norm beamformer, |w^H (hhat + dh)| lies within eps of |w^H hhat|, so the
// signal amplitude is shrunk and every interferer amplitude is grown by the
// radius. Conservative (each link bounded independently), never above the
// nominal rate.
inline double worst_case_rate(double signal_amp, double tx_power,
                              const std::vector<double>& interference_amps,
                              const std::vector<double>& interference_powers, double csi_radius,
                              double noise_power, double bandwidth) {
    const double s = std::max(signal_amp - csi_radius, 0.0);
    double interference = 0.0;
    for (std::size_t i = 0; i < interference_amps.size(); ++i) {
        const double a = interference_amps[i] + csi_radius;
        interference += a * a * interference_powers[i];
    }
    const double sinr_lb = s * s * tx_power / (interference + noise_power);
    return bandwidth * std::log2(1.0 + sinr_lb);
}

// Delay-maximizing corner of the complexity interval.
inline double worst_case_complexity(double c_hat, double complexity_radius) {
    return std::max(c_hat + complexity_radius, 1e-9);
}

// Everything needed to evaluate one UE's worst-case service delay. The
// amplitudes are |w^H hhat| magnitudes computed against the same beamformer
// the environment will use.
struct RobustDelayInput {
    double task_bits = 0.0;
    double rho = 0.0;
    double c_hat = 0.0;      // estimated cycles/bit of the task's type
    double f_local = 0.0;    // Hz
    double f_edge = 0.0;     // Hz, 0 when unserved
    bool associated = false;
    double signal_amp = 0.0; // serving link |w^H hhat|
    std::vector<double> interference_amps;
    std::vector<double> interference_powers;
    double tx_power = 0.0;
    double noise_power = 1.0;
    double bandwidth = 1.0;
};

struct RobustDelayResult {
    bool feasible = false;
    double worst_delay = 0.0;
    double wc_rate = 0.0;  // worst-case offloading rate (0 when nothing is offloaded)
};

// Worst-case service delay over the joint uncertainty set and the deadline
// check against the slot duration. Offloaded bits without an association or
// without worst-case rate make the slot infeasible outright.
inline RobustDelayResult robust_delay_check(const RobustDelayInput& in, const UncertaintyBudget& budget,
                                            double deadline) {
    const auto [off_bits, local_bits] = split_task(in.task_bits, in.rho);
    const double c_wc = worst_case_complexity(in.c_hat, budget.complexity_radius);

    double t_local = 0.0;
    if (local_bits > 0.0)
        t_local = in.f_local > 0.0 ? local_bits * c_wc / in.f_local : kInfDelay;

    double t_off = 0.0, t_edge = 0.0;
    RobustDelayResult r;
    if (off_bits > 0.0) {
        if (!in.associated) {
            r.worst_delay = kInfDelay;
            return r;
        }
        r.wc_rate = worst_case_rate(in.signal_amp, in.tx_power, in.interference_amps,
                                    in.interference_powers, budget.csi_radius, in.noise_power,
                                    in.bandwidth);
        t_off = r.wc_rate > 0.0 ? off_bits / r.wc_rate : kInfDelay;
        t_edge = in.f_edge > 0.0 ? off_bits * c_wc / in.f_edge : kInfDelay;
    }

    r.worst_delay = service_delay(t_off, t_edge, t_local);
    // relative slack absorbs round-off when a frequency was sized to land
    // exactly on the deadline
    r.feasible = r.worst_delay <= deadline * (1.0 + 1e-12);
    return r;
}

} // namespace mecsim
