#pragma once

#include <cstdint>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "mecsim/rng.hpp"
#include "mecsim/vec2.hpp"

namespace mecsim {

// Rotary-wing propulsion model constants. Blade/induced powers and rotor
// geometry follow the usual rotorcraft parameterization.
struct PropulsionParams {
    double blade_power = 59.03;    // W, profile power of the blades (P1)
    double induced_power = 79.07;  // W, induced power in hover (P2)
    double tip_speed = 120.0;      // m/s, rotor blade tip speed
    double rotor_velocity = 3.6;   // m/s, mean rotor induced velocity in hover
    double drag_ratio = 0.3;       // fuselage drag ratio
    double air_density = 1.225;    // kg/m^3
    double rotor_area = 0.503;     // m^2, rotor disc area
    double solidity = 0.05;        // rotor solidity

    void validate() const {
        const double vals[] = {blade_power, induced_power, tip_speed, rotor_velocity,
                               drag_ratio,  air_density,   rotor_area, solidity};
        for (double v : vals)
            if (!(v > 0.0)) throw std::invalid_argument("propulsion: all parameters must be positive");
    }
};

// Static world constants for one simulation scenario.
struct WorldConfig {
    int num_ues = 20;                 // K
    int num_uavs = 5;                 // M
    int slots = 200;                  // N, slots per episode
    double slot_duration = 1.0;       // s
    double altitude = 200.0;          // m, fixed UAV altitude
    double region_side = 1000.0;      // m, square service region side
    double min_uav_distance = 20.0;   // m, minimum safe inter-UAV distance
    double max_speed = 20.0;          // m/s
    double max_accel = 5.0;           // m/s^2
    double omega = 1.0;               // objective weight on the UAV-side energy
    double kappa = 1e-28;             // J*s^2/cycle^3, effective capacitance
    double ue_power_max = 0.5;        // W
    double ue_freq_max = 1e9;         // Hz
    double uav_freq_max = 1e10;       // Hz
    double kappa1 = 1.0;              // UAV reward adjustment factors
    double kappa2 = 1.0;
    double varpi = 1.0;
    double centroid_threshold = 200.0;  // m, UAV-to-served-centroid distance threshold
    int task_types = 5;               // Z
    double task_bits_min = 3.5e6;     // bits
    double task_bits_max = 4.5e6;     // bits
    double complexity_min = 500.0;    // cycles/bit, estimated complexity range
    double complexity_max = 1500.0;
    double local_rho_margin = 0.1;    // margin of the partition score map onto [-margin, 1]
    std::uint64_t seed = 1;

    void validate() const {
        if (num_ues < 1) throw std::invalid_argument("world: num_ues must be >= 1");
        if (num_uavs < 1) throw std::invalid_argument("world: num_uavs must be >= 1");
        if (slots < 1) throw std::invalid_argument("world: slots must be >= 1");
        if (!(slot_duration > 0.0)) throw std::invalid_argument("world: slot_duration must be positive");
        if (!(altitude > 0.0)) throw std::invalid_argument("world: altitude must be positive");
        if (!(region_side > 0.0)) throw std::invalid_argument("world: region_side must be positive");
        if (!(min_uav_distance > 0.0) || min_uav_distance >= region_side)
            throw std::invalid_argument("world: min_uav_distance must be in (0, region_side)");
        if (!(max_speed > 0.0) || !(max_accel > 0.0))
            throw std::invalid_argument("world: speed/accel limits must be positive");
        if (omega < 0.0) throw std::invalid_argument("world: omega must be >= 0");
        if (!(kappa > 0.0)) throw std::invalid_argument("world: kappa must be positive");
        if (!(ue_power_max > 0.0) || !(ue_freq_max > 0.0) || !(uav_freq_max > 0.0))
            throw std::invalid_argument("world: power/frequency limits must be positive");
        if (!(kappa1 > 0.0) || !(kappa2 > 0.0) || !(varpi > 0.0))
            throw std::invalid_argument("world: reward adjustment factors must be positive");
        if (!(centroid_threshold > 0.0)) throw std::invalid_argument("world: centroid_threshold must be positive");
        if (task_types < 1) throw std::invalid_argument("world: task_types must be >= 1");
        if (!(task_bits_min > 0.0) || task_bits_min > task_bits_max)
            throw std::invalid_argument("world: task size bounds must satisfy 0 < min <= max");
        if (!(complexity_min > 0.0) || complexity_min > complexity_max)
            throw std::invalid_argument("world: complexity bounds must satisfy 0 < min <= max");
        if (!(local_rho_margin > 0.0)) throw std::invalid_argument("world: local_rho_margin must be positive");
    }
};

struct UavState {
    Vec2 pos;  // horizontal position, m
    Vec2 vel;  // m/s
};

struct UeState {
    Vec2 pos;             // fixed for the episode
    double tx_power = 0.5;  // W
    double cpu_freq = 0.0;  // Hz, set per slot by the frequency-scaling rule
};

struct TaskSpec {
    double bits = 0.0;  // task size
    int type = 0;       // 0-based task type index in [0, Z)

    // one-hot type indicator
    int indicator(int z) const { return z == type ? 1 : 0; }
};

// Propulsion power at horizontal speed v: blade profile term, parasite drag
// term, and the induced-power term that decays with speed.
inline double propulsion_power(double speed, const PropulsionParams& pp) {
    if (speed < 0.0) throw std::domain_error("propulsion_power: negative speed");
    const double v2 = speed * speed;
    const double drag = 0.5 * pp.drag_ratio * pp.air_density * pp.solidity * pp.rotor_area * v2 * speed;
    const double blade = pp.blade_power * (1.0 + 3.0 * v2 / (pp.tip_speed * pp.tip_speed));
    const double v0sq = pp.rotor_velocity * pp.rotor_velocity;
    const double induced =
        pp.induced_power * std::sqrt(std::sqrt(1.0 + v2 * v2 / (4.0 * v0sq * v0sq)) - v2 / (2.0 * v0sq));
    return drag + blade + induced;
}

// One kinematic step: q' = q + v*dt + a*dt^2/2, v' = v + a*dt with the speed
// clamped to v_max (direction preserved). The acceleration bound is a
// decoder guarantee; violating it here is a programming error.
inline UavState step_kinematics(const UavState& s, const Vec2& accel, double dt,
                                double max_speed, double max_accel) {
    if (accel.norm() > max_accel * (1.0 + 1e-9))
        throw std::invalid_argument("step_kinematics: acceleration exceeds max_accel");
    UavState out;
    out.pos = s.pos + s.vel * dt + accel * (0.5 * dt * dt);
    out.vel = s.vel + accel * dt;
    const double v = out.vel.norm();
    if (v > max_speed && v > 0.0) out.vel = out.vel * (max_speed / v);
    return out;
}

inline double flight_energy(const UavState& s, const PropulsionParams& pp, double dt) {
    if (dt < 0.0) throw std::domain_error("flight_energy: negative duration");
    return propulsion_power(s.vel.norm(), pp) * dt;
}

// One fresh task per UE: size uniform in [bits_min, bits_max], type uniform
// over the Z types.
inline std::vector<TaskSpec> generate_tasks(Rng& rng, int num_ues, int num_types,
                                            double bits_min, double bits_max) {
    if (bits_min > bits_max) throw std::invalid_argument("generate_tasks: bits_min > bits_max");
    if (num_types < 1) throw std::invalid_argument("generate_tasks: num_types must be >= 1");
    std::vector<TaskSpec> tasks;
    tasks.reserve(static_cast<std::size_t>(num_ues < 0 ? 0 : num_ues));
    for (int k = 0; k < num_ues; ++k) {
        TaskSpec t;
        t.bits = rng.uniform(bits_min, bits_max);
        t.type = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(num_types)));
        tasks.push_back(t);
    }
    return tasks;
}

// All unordered pairs closer than the safe distance, with their distance.
inline std::vector<std::tuple<int, int, double>> pairwise_safety(const std::vector<Vec2>& positions,
                                                                 double min_distance) {
    std::vector<std::tuple<int, int, double>> close;
    const int n = static_cast<int>(positions.size());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double d = distance(positions[i], positions[j]);
            if (d < min_distance) close.emplace_back(i, j, d);
        }
    return close;
}

inline std::vector<Vec2> place_uniform(Rng& rng, int count, double side) {
    std::vector<Vec2> pos(static_cast<std::size_t>(count < 0 ? 0 : count));
    for (auto& p : pos) {
        p.x = rng.uniform(0.0, side);
        p.y = rng.uniform(0.0, side);
    }
    return pos;
}

} // namespace mecsim
