#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "mecsim/channel.hpp"
#include "mecsim/compute.hpp"
#include "mecsim/robust.hpp"
#include "mecsim/world.hpp"

namespace mecsim {

// Whether the deadline penalty is driven by the worst-case delay over the
// uncertainty sets or by the realized delay.
enum class DelayPenaltyMode { robust, realized };

// Receive beamformer source: matched to the channel estimate, or decoded
// from the UAV action vector.
enum class BeamformerMode { mrc, action };

struct EnvParams {
    WorldConfig world;
    PropulsionParams propulsion;
    ChannelParams channel;
    UncertaintyBudget uncertainty;
    DelayPenaltyMode penalty_mode = DelayPenaltyMode::robust;
    BeamformerMode beamformer = BeamformerMode::mrc;

    void validate() const {
        world.validate();
        propulsion.validate();
        channel.validate();
        uncertainty.validate();
    }
};

// P(r, p, q) = 2 - exp(-max(0, (r-p)/q)): 1 exactly when r <= p, approaches
// 2 as the violation grows. The positive part keeps it differentiable
// enough to be a usable learning signal.
inline double penalty(double r, double p, double q) {
    if (!(q > 0.0)) throw std::domain_error("penalty: q must be positive");
    double v = (r - p) / q;
    if (!(v > 0.0)) v = 0.0;
    return 2.0 - std::exp(-v);
}

struct UeDecision {
    int uav = -1;      // -1 = fully local
    double rho = 0.0;  // in [0, 1]
};

// UE action: M association scores followed by one partition score, all in
// [0, 1]. Association goes to the argmax score (ties to the lowest index);
// the partition score is mapped onto [-margin, 1] so the policy can express
// "fully local", which also clears the association.
inline UeDecision decode_ue_action(std::span<const double> raw, int num_uavs, double margin) {
    if (static_cast<int>(raw.size()) != num_uavs + 1)
        throw std::invalid_argument("decode_ue_action: action size mismatch");
    UeDecision d;
    int best = 0;
    for (int m = 1; m < num_uavs; ++m)
        if (raw[static_cast<std::size_t>(m)] > raw[static_cast<std::size_t>(best)]) best = m;
    const double score = std::clamp(raw[static_cast<std::size_t>(num_uavs)], 0.0, 1.0);
    const double rho_hat = score * (1.0 + margin) - margin;
    d.rho = std::clamp(rho_hat, 0.0, 1.0);
    d.uav = d.rho > 0.0 ? best : -1;
    return d;
}

struct UavDecision {
    Vec2 accel;
    std::vector<double> f_edge;  // per UE, 0 for UEs not served by this UAV
    Cvec beamformer;             // empty in MRC mode
};

// UAV action: acceleration magnitude score, heading score, K+1 frequency
// shares (last = idle headroom), then optionally 2*At beamformer reals. The
// shares are renormalized over {served UEs, idle}, which enforces the cap
// sum_k f_k <= f_max for any raw vector.
inline UavDecision decode_uav_action(std::span<const double> raw, const std::vector<int>& assoc,
                                     int uav_index, double max_accel, double f_max,
                                     int array_size, BeamformerMode mode) {
    const int num_ues = static_cast<int>(assoc.size());
    const int base = 2 + num_ues + 1;
    const int expect = base + (mode == BeamformerMode::action ? 2 * array_size : 0);
    if (static_cast<int>(raw.size()) != expect)
        throw std::invalid_argument("decode_uav_action: action size mismatch");

    UavDecision d;
    const double mag = std::clamp(raw[0], 0.0, 1.0) * max_accel;
    const double ang = std::clamp(raw[1], 0.0, 1.0) * 2.0 * kPi;
    d.accel = {mag * std::cos(ang), mag * std::sin(ang)};

    double total = 0.0;
    for (int i = 0; i < num_ues + 1; ++i) total += std::clamp(raw[static_cast<std::size_t>(2 + i)], 0.0, 1.0);
    d.f_edge.assign(static_cast<std::size_t>(num_ues), 0.0);
    double denom = 0.0;
    for (int k = 0; k < num_ues; ++k)
        if (assoc[static_cast<std::size_t>(k)] == uav_index)
            denom += total > 0.0 ? std::clamp(raw[static_cast<std::size_t>(2 + k)], 0.0, 1.0) / total
                                 : 1.0 / (num_ues + 1);
    denom += total > 0.0 ? std::clamp(raw[static_cast<std::size_t>(2 + num_ues)], 0.0, 1.0) / total
                         : 1.0 / (num_ues + 1);
    if (denom > 0.0)
        for (int k = 0; k < num_ues; ++k)
            if (assoc[static_cast<std::size_t>(k)] == uav_index) {
                const double share = total > 0.0
                                         ? std::clamp(raw[static_cast<std::size_t>(2 + k)], 0.0, 1.0) / total
                                         : 1.0 / (num_ues + 1);
                d.f_edge[static_cast<std::size_t>(k)] = f_max * share / denom;
            }

    if (mode == BeamformerMode::action) {
        Cvec w(static_cast<std::size_t>(array_size));
        double norm_sq = 0.0;
        for (int i = 0; i < array_size; ++i) {
            const double re = 2.0 * std::clamp(raw[static_cast<std::size_t>(base + 2 * i)], 0.0, 1.0) - 1.0;
            const double im = 2.0 * std::clamp(raw[static_cast<std::size_t>(base + 2 * i + 1)], 0.0, 1.0) - 1.0;
            w[static_cast<std::size_t>(i)] = {re, im};
            norm_sq += re * re + im * im;
        }
        if (norm_sq > 1e-18) {
            const double inv = 1.0 / std::sqrt(norm_sq);
            for (auto& c : w) c *= inv;
            d.beamformer = std::move(w);
        }
        // degenerate all-zero vector falls back to MRC downstream
    }
    return d;
}

// Minimal CPU frequency that finishes the local share within the slot,
// estimated with the known complexity and capped at the hardware limit.
// The local share is computed exactly as split_task computes it, so a
// frequency sized here meets the deadline boundary bit-for-bit.
inline double dvfs_frequency(double task_bits, double rho, double c_hat, double deadline, double f_max) {
    if (!(deadline > 0.0)) throw std::domain_error("dvfs_frequency: deadline must be positive");
    if (rho >= 1.0) return 0.0;
    const double local_bits = task_bits - rho * task_bits;
    return std::min(f_max, local_bits * c_hat / deadline);
}

struct RewardRecord {
    double value = 0.0;            // normalized and clipped, what the learner sees
    double raw = 0.0;              // pre-normalization reward
    double energy = 0.0;           // energy term inside the reward
    double deadline_factor = 1.0;  // P_T
    double out_factor = 1.0;       // UAV only: out-of-region penalty
    double collision_factor = 1.0; // UAV only: pairwise safety penalty sum
    double proximity = 0.0;        // UAV only: centroid-distance penalty term
};

struct SlotMetrics {
    int slot = 0;
    std::vector<double> ue_local_energy, ue_offload_energy;  // per UE
    std::vector<double> uav_edge_energy, uav_flight_energy;  // per UAV
    std::vector<double> service_delays, robust_delays;       // per UE
    std::vector<double> rates;                                // per UE, 0 if local
    std::vector<int> associations;
    std::vector<double> rho, f_local, f_edge;
    std::vector<Vec2> uav_positions;  // positions during this slot
    std::vector<double> uav_speeds;
    int deadline_violations = 0;  // realized delay above the slot duration
    int collisions = 0;           // UAV pairs below the safe distance
    double weighted_energy = 0.0;
    EnergyBreakdown energy;
    std::vector<RewardRecord> ue_rewards, uav_rewards;
};

// Running scale normalizer (Welford); emitted rewards are raw / sigma
// clipped into [-5, 5]. Scale-only normalization keeps the sign and
// ordering of rewards stable while the estimator warms up.
class RewardNormalizer {
public:
    double normalize(double x) {
        ++count_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(count_);
        m2_ += d * (x - mean_);
        double sigma = count_ > 1 ? std::sqrt(m2_ / static_cast<double>(count_ - 1)) : std::abs(mean_);
        if (!(sigma > 1e-12)) sigma = 1e-12;
        return std::clamp(x / sigma, -5.0, 5.0);
    }

    long long count() const { return count_; }
    double mean() const { return mean_; }
    double m2() const { return m2_; }
    void restore(long long count, double mean, double m2) { count_ = count; mean_ = mean; m2_ = m2; }

private:
    long long count_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

// observation/state layout sizes
inline int ue_obs_size(int num_uavs, int num_types) { return 1 + 2 * num_uavs + 1 + num_types + 2; }
inline int uav_obs_size(int num_ues, int num_uavs, int num_types) {
    return 1 + 2 * num_uavs + num_ues * (5 + num_types);
}
inline int global_state_size(int num_ues, int num_uavs, int num_types) {
    return 2 * num_uavs + num_ues * (4 + num_types + num_uavs);
}

// The slot-synchronous multi-agent MDP. One step runs in two phases: UE
// agents observe and act first, then UAV agents observe (their observation
// includes the decoded partitions) and act, after which the slot's
// channels, delays, energies and rewards are realized and the UAVs move.
//
// UE observation layout (positions /X, sizes /D_max):
//   [ k/K | q_0 .. q_{M-1} (2M) | d/D_max | type one-hot (Z) | u_k (2) ]
// UAV observation layout (blocks of UEs not served by this UAV are zero):
//   [ m/M | q_m (2) | q_{-m} (2(M-1)) | per UE: served flag, u_k (2), rho_k,
//     d_k/D_max, type one-hot (Z) ]
// Global state layout:
//   [ q_0 .. q_{M-1} (2M) | per UE: u_k (2), d_k/D_max, type one-hot (Z),
//     rho_k, association one-hot (M) ]
class Environment {
public:
    Environment(EnvParams params, std::uint64_t seed)
        : p_(std::move(params)),
          rng_place_(derive_seed(seed, 1)),
          rng_tasks_(derive_seed(seed, 2)),
          rng_channel_(derive_seed(seed, 3)),
          rng_uncert_(derive_seed(seed, 4)) {
        p_.validate();
        reset();
    }

    const EnvParams& params() const { return p_; }
    int num_ues() const { return p_.world.num_ues; }
    int num_uavs() const { return p_.world.num_uavs; }
    int num_types() const { return p_.world.task_types; }
    int slot() const { return slot_; }
    bool done() const { return slot_ >= p_.world.slots; }

    int ue_obs_dim() const { return ue_obs_size(num_uavs(), num_types()); }
    int uav_obs_dim() const { return uav_obs_size(num_ues(), num_uavs(), num_types()); }
    int state_dim() const { return global_state_size(num_ues(), num_uavs(), num_types()); }
    int ue_action_dim() const { return num_uavs() + 1; }
    int uav_action_dim() const {
        return 2 + num_ues() + 1 +
               (p_.beamformer == BeamformerMode::action ? 2 * p_.channel.array_size() : 0);
    }

    void reset() {
        slot_ = 0;
        phase1_done_ = false;
        ues_.assign(static_cast<std::size_t>(num_ues()), UeState{});
        const auto upos = place_uniform(rng_place_, num_ues(), p_.world.region_side);
        for (int k = 0; k < num_ues(); ++k) {
            ues_[static_cast<std::size_t>(k)].pos = upos[static_cast<std::size_t>(k)];
            ues_[static_cast<std::size_t>(k)].tx_power = p_.world.ue_power_max;
        }
        uavs_.assign(static_cast<std::size_t>(num_uavs()), UavState{});
        const auto qpos = place_uniform(rng_place_, num_uavs(), p_.world.region_side);
        for (int m = 0; m < num_uavs(); ++m) uavs_[static_cast<std::size_t>(m)].pos = qpos[static_cast<std::size_t>(m)];

        types_.estimated.resize(static_cast<std::size_t>(num_types()));
        types_.deviation.resize(static_cast<std::size_t>(num_types()));
        for (auto& c : types_.estimated) c = rng_uncert_.uniform(p_.world.complexity_min, p_.world.complexity_max);
        for (auto& d : types_.deviation)
            d = rng_uncert_.uniform(-p_.uncertainty.complexity_radius, p_.uncertainty.complexity_radius);

        assoc_.assign(static_cast<std::size_t>(num_ues()), -1);
        rho_.assign(static_cast<std::size_t>(num_ues()), 0.0);
        new_slot_draws();
    }

    std::vector<std::vector<double>> ue_observations() const {
        require_running();
        std::vector<std::vector<double>> obs;
        obs.reserve(static_cast<std::size_t>(num_ues()));
        const double X = p_.world.region_side, dmax = p_.world.task_bits_max;
        for (int k = 0; k < num_ues(); ++k) {
            std::vector<double> o;
            o.reserve(static_cast<std::size_t>(ue_obs_dim()));
            o.push_back(static_cast<double>(k) / num_ues());
            for (const auto& u : uavs_) {
                o.push_back(u.pos.x / X);
                o.push_back(u.pos.y / X);
            }
            const auto& t = tasks_[static_cast<std::size_t>(k)];
            o.push_back(t.bits / dmax);
            for (int z = 0; z < num_types(); ++z) o.push_back(t.indicator(z));
            o.push_back(ues_[static_cast<std::size_t>(k)].pos.x / X);
            o.push_back(ues_[static_cast<std::size_t>(k)].pos.y / X);
            obs.push_back(std::move(o));
        }
        return obs;
    }

    // Phase 1: decode all UE actions, then build the UAV observations that
    // depend on them.
    std::vector<std::vector<double>> decode_ue_phase(const std::vector<std::vector<double>>& ue_raw) {
        require_running();
        if (static_cast<int>(ue_raw.size()) != num_ues())
            throw std::invalid_argument("decode_ue_phase: one action per UE required");
        for (int k = 0; k < num_ues(); ++k) {
            const auto d = decode_ue_action(ue_raw[static_cast<std::size_t>(k)], num_uavs(),
                                            p_.world.local_rho_margin);
            assoc_[static_cast<std::size_t>(k)] = d.uav;
            rho_[static_cast<std::size_t>(k)] = d.rho;
        }
        phase1_done_ = true;
        return uav_observations();
    }

    std::vector<std::vector<double>> uav_observations() const {
        require_running();
        std::vector<std::vector<double>> obs;
        obs.reserve(static_cast<std::size_t>(num_uavs()));
        const double X = p_.world.region_side, dmax = p_.world.task_bits_max;
        for (int m = 0; m < num_uavs(); ++m) {
            std::vector<double> o;
            o.reserve(static_cast<std::size_t>(uav_obs_dim()));
            o.push_back(static_cast<double>(m) / num_uavs());
            o.push_back(uavs_[static_cast<std::size_t>(m)].pos.x / X);
            o.push_back(uavs_[static_cast<std::size_t>(m)].pos.y / X);
            for (int j = 0; j < num_uavs(); ++j) {
                if (j == m) continue;
                o.push_back(uavs_[static_cast<std::size_t>(j)].pos.x / X);
                o.push_back(uavs_[static_cast<std::size_t>(j)].pos.y / X);
            }
            for (int k = 0; k < num_ues(); ++k) {
                const bool served = assoc_[static_cast<std::size_t>(k)] == m;
                const auto& t = tasks_[static_cast<std::size_t>(k)];
                o.push_back(served ? 1.0 : 0.0);
                o.push_back(served ? ues_[static_cast<std::size_t>(k)].pos.x / X : 0.0);
                o.push_back(served ? ues_[static_cast<std::size_t>(k)].pos.y / X : 0.0);
                o.push_back(served ? rho_[static_cast<std::size_t>(k)] : 0.0);
                o.push_back(served ? t.bits / dmax : 0.0);
                for (int z = 0; z < num_types(); ++z) o.push_back(served ? t.indicator(z) : 0.0);
            }
            obs.push_back(std::move(o));
        }
        return obs;
    }

    // Valid once the current slot's UE actions are decoded.
    std::vector<double> global_state() const {
        require_running();
        std::vector<double> s;
        s.reserve(static_cast<std::size_t>(state_dim()));
        const double X = p_.world.region_side, dmax = p_.world.task_bits_max;
        for (const auto& u : uavs_) {
            s.push_back(u.pos.x / X);
            s.push_back(u.pos.y / X);
        }
        for (int k = 0; k < num_ues(); ++k) {
            s.push_back(ues_[static_cast<std::size_t>(k)].pos.x / X);
            s.push_back(ues_[static_cast<std::size_t>(k)].pos.y / X);
            const auto& t = tasks_[static_cast<std::size_t>(k)];
            s.push_back(t.bits / dmax);
            for (int z = 0; z < num_types(); ++z) s.push_back(t.indicator(z));
            s.push_back(rho_[static_cast<std::size_t>(k)]);
            for (int m = 0; m < num_uavs(); ++m)
                s.push_back(assoc_[static_cast<std::size_t>(k)] == m ? 1.0 : 0.0);
        }
        return s;
    }

    // Phase 2: decode UAV actions, realize the slot, emit rewards and
    // metrics, then advance the kinematics and draw the next slot's tasks
    // and channels.
    SlotMetrics step(const std::vector<std::vector<double>>& uav_raw) {
        require_running();
        if (!phase1_done_) throw std::logic_error("Environment::step: UE phase not decoded");
        if (static_cast<int>(uav_raw.size()) != num_uavs())
            throw std::invalid_argument("Environment::step: one action per UAV required");

        const auto& w = p_.world;
        const int K = num_ues(), M = num_uavs();

        std::vector<UavDecision> dec;
        dec.reserve(static_cast<std::size_t>(M));
        for (int m = 0; m < M; ++m)
            dec.push_back(decode_uav_action(uav_raw[static_cast<std::size_t>(m)], assoc_, m, w.max_accel,
                                            w.uav_freq_max, p_.channel.array_size(), p_.beamformer));

        SlotMetrics sm;
        sm.slot = slot_;
        sm.ue_local_energy.assign(static_cast<std::size_t>(K), 0.0);
        sm.ue_offload_energy.assign(static_cast<std::size_t>(K), 0.0);
        sm.uav_edge_energy.assign(static_cast<std::size_t>(M), 0.0);
        sm.uav_flight_energy.assign(static_cast<std::size_t>(M), 0.0);
        sm.service_delays.assign(static_cast<std::size_t>(K), 0.0);
        sm.robust_delays.assign(static_cast<std::size_t>(K), 0.0);
        sm.rates.assign(static_cast<std::size_t>(K), 0.0);
        sm.associations = assoc_;
        sm.rho = rho_;
        sm.f_local.assign(static_cast<std::size_t>(K), 0.0);
        sm.f_edge.assign(static_cast<std::size_t>(K), 0.0);
        sm.uav_positions.resize(static_cast<std::size_t>(M));
        sm.uav_speeds.resize(static_cast<std::size_t>(M));

        for (int m = 0; m < M; ++m) {
            sm.uav_positions[static_cast<std::size_t>(m)] = uavs_[static_cast<std::size_t>(m)].pos;
            sm.uav_speeds[static_cast<std::size_t>(m)] = uavs_[static_cast<std::size_t>(m)].vel.norm();
            sm.uav_flight_energy[static_cast<std::size_t>(m)] =
                flight_energy(uavs_[static_cast<std::size_t>(m)], p_.propulsion, w.slot_duration);
        }

        std::vector<double> powers(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k) powers[static_cast<std::size_t>(k)] = ues_[static_cast<std::size_t>(k)].tx_power;

        // per-UE beamformers for served links
        std::vector<Beamformer> beams(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k) {
            const int m = assoc_[static_cast<std::size_t>(k)];
            if (m < 0) continue;
            if (p_.beamformer == BeamformerMode::action && !dec[static_cast<std::size_t>(m)].beamformer.empty())
                beams[static_cast<std::size_t>(k)].w = dec[static_cast<std::size_t>(m)].beamformer;
            else
                beams[static_cast<std::size_t>(k)] = mrc_beamformer(channel_at(k, m).estimated);
        }

        std::vector<double> t_realized(static_cast<std::size_t>(K), 0.0);
        std::vector<double> t_penalty(static_cast<std::size_t>(K), 0.0);

        for (int k = 0; k < K; ++k) {
            const auto& task = tasks_[static_cast<std::size_t>(k)];
            const double rho = rho_[static_cast<std::size_t>(k)];
            const int m = assoc_[static_cast<std::size_t>(k)];
            const double c_hat = types_.estimated[static_cast<std::size_t>(task.type)];
            const double c_true = types_.true_complexity(task.type);
            const double f_local =
                dvfs_frequency(task.bits, rho, c_hat, w.slot_duration, w.ue_freq_max);
            ues_[static_cast<std::size_t>(k)].cpu_freq = f_local;
            sm.f_local[static_cast<std::size_t>(k)] = f_local;

            const auto [off_bits, local_bits] = split_task(task.bits, rho);
            const auto local = local_delay_energy(local_bits, c_true, f_local, w.kappa);

            double rate_k = 0.0, f_edge = 0.0;
            DelayEnergy off, edge;
            if (m >= 0 && off_bits > 0.0) {
                const double s = sinr(k, m, actual_channels_, M, beams[static_cast<std::size_t>(k)],
                                      powers, assoc_, p_.channel.noise_power);
                rate_k = rate(s, p_.channel.bandwidth);
                f_edge = dec[static_cast<std::size_t>(m)].f_edge[static_cast<std::size_t>(k)];
                off = offload_delay_energy(off_bits, rate_k, powers[static_cast<std::size_t>(k)]);
                edge = edge_delay_energy(off_bits, c_true, f_edge, w.kappa);
                sm.uav_edge_energy[static_cast<std::size_t>(m)] += edge.energy;
            }
            sm.rates[static_cast<std::size_t>(k)] = rate_k;
            sm.f_edge[static_cast<std::size_t>(k)] = f_edge;
            sm.ue_local_energy[static_cast<std::size_t>(k)] = local.energy;
            sm.ue_offload_energy[static_cast<std::size_t>(k)] = off.energy;

            t_realized[static_cast<std::size_t>(k)] = service_delay(off.delay, edge.delay, local.delay);
            sm.service_delays[static_cast<std::size_t>(k)] = t_realized[static_cast<std::size_t>(k)];
            if (t_realized[static_cast<std::size_t>(k)] > w.slot_duration) ++sm.deadline_violations;

            RobustDelayInput rin;
            rin.task_bits = task.bits;
            rin.rho = rho;
            rin.c_hat = c_hat;
            rin.f_local = f_local;
            rin.f_edge = f_edge;
            rin.associated = m >= 0;
            rin.tx_power = powers[static_cast<std::size_t>(k)];
            rin.noise_power = p_.channel.noise_power;
            rin.bandwidth = p_.channel.bandwidth;
            if (m >= 0 && off_bits > 0.0) {
                rin.signal_amp = std::abs(inner(beams[static_cast<std::size_t>(k)].w,
                                                channel_at(k, m).estimated));
                for (int i = 0; i < K; ++i) {
                    const int mi = assoc_[static_cast<std::size_t>(i)];
                    if (i == k || mi < 0) continue;
                    rin.interference_amps.push_back(std::abs(
                        inner(beams[static_cast<std::size_t>(k)].w, channel_at(i, mi).estimated)));
                    rin.interference_powers.push_back(powers[static_cast<std::size_t>(i)]);
                }
            }
            const auto rob = robust_delay_check(rin, p_.uncertainty, w.slot_duration);
            sm.robust_delays[static_cast<std::size_t>(k)] = rob.worst_delay;
            t_penalty[static_cast<std::size_t>(k)] = p_.penalty_mode == DelayPenaltyMode::robust
                                                         ? rob.worst_delay
                                                         : t_realized[static_cast<std::size_t>(k)];
        }

        auto [total, breakdown] = slot_energy(sm.ue_local_energy, sm.ue_offload_energy,
                                              sm.uav_edge_energy, sm.uav_flight_energy, w.omega);
        sm.weighted_energy = total;
        sm.energy = breakdown;

        // rewards
        sm.ue_rewards.resize(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k) {
            auto& rr = sm.ue_rewards[static_cast<std::size_t>(k)];
            const int m = assoc_[static_cast<std::size_t>(k)];
            double energy = sm.ue_local_energy[static_cast<std::size_t>(k)] +
                            sm.ue_offload_energy[static_cast<std::size_t>(k)];
            if (m >= 0)
                energy += w.omega * (sm.uav_edge_energy[static_cast<std::size_t>(m)] +
                                     sm.uav_flight_energy[static_cast<std::size_t>(m)]);
            rr.energy = energy;
            rr.deadline_factor = penalty(t_penalty[static_cast<std::size_t>(k)], w.slot_duration, w.slot_duration);
            rr.raw = -energy * rr.deadline_factor;
            rr.value = ue_norm_.normalize(rr.raw);
        }

        std::vector<Vec2> positions(static_cast<std::size_t>(M));
        for (int m = 0; m < M; ++m) positions[static_cast<std::size_t>(m)] = uavs_[static_cast<std::size_t>(m)].pos;
        sm.collisions = static_cast<int>(pairwise_safety(positions, w.min_uav_distance).size());

        Vec2 global_centroid{};
        for (const auto& u : ues_) global_centroid += u.pos;
        global_centroid = global_centroid * (1.0 / K);

        sm.uav_rewards.resize(static_cast<std::size_t>(M));
        for (int m = 0; m < M; ++m) {
            auto& rr = sm.uav_rewards[static_cast<std::size_t>(m)];
            std::vector<int> served;
            for (int k = 0; k < K; ++k)
                if (assoc_[static_cast<std::size_t>(k)] == m) served.push_back(k);

            double mean_ue_energy = 0.0, mean_deadline = 1.0;
            Vec2 centroid = global_centroid;
            if (!served.empty()) {
                double e = 0.0, pd = 0.0;
                Vec2 c{};
                for (int k : served) {
                    e += sm.ue_offload_energy[static_cast<std::size_t>(k)] +
                         sm.ue_local_energy[static_cast<std::size_t>(k)];
                    pd += penalty(t_penalty[static_cast<std::size_t>(k)], w.slot_duration, w.slot_duration);
                    c += ues_[static_cast<std::size_t>(k)].pos;
                }
                mean_ue_energy = e / static_cast<double>(served.size());
                mean_deadline = pd / static_cast<double>(served.size());
                centroid = c * (1.0 / static_cast<double>(served.size()));
            }
            const double own = sm.uav_edge_energy[static_cast<std::size_t>(m)] +
                               sm.uav_flight_energy[static_cast<std::size_t>(m)];
            const double e_tilde = served.empty() ? w.varpi * sm.uav_flight_energy[static_cast<std::size_t>(m)]
                                                  : mean_ue_energy + w.varpi * own;

            const Vec2 q = positions[static_cast<std::size_t>(m)];
            rr.proximity = penalty(distance(q, centroid), w.centroid_threshold, w.region_side);
            rr.deadline_factor = mean_deadline;
            rr.out_factor = 1.0 + distance(q, clamp_box(q, 0.0, w.region_side)) / w.max_speed;
            double coll = 1.0;  // degenerate single-UAV case: no pairwise term
            if (M > 1) {
                coll = 0.0;
                for (int j = 0; j < M; ++j) {
                    if (j == m) continue;
                    coll += penalty(w.min_uav_distance, distance(q, positions[static_cast<std::size_t>(j)]),
                                    w.min_uav_distance);
                }
            }
            rr.collision_factor = coll;
            rr.energy = e_tilde;
            rr.raw = -(w.kappa1 * e_tilde + w.kappa2 * rr.proximity) * rr.deadline_factor * rr.out_factor *
                     rr.collision_factor;
            rr.value = uav_norm_.normalize(rr.raw);
        }

        // advance kinematics and the next slot's draws
        for (int m = 0; m < M; ++m)
            uavs_[static_cast<std::size_t>(m)] =
                step_kinematics(uavs_[static_cast<std::size_t>(m)], dec[static_cast<std::size_t>(m)].accel,
                                w.slot_duration, w.max_speed, w.max_accel);

        ++slot_;
        phase1_done_ = false;
        std::fill(assoc_.begin(), assoc_.end(), -1);
        std::fill(rho_.begin(), rho_.end(), 0.0);
        if (!done()) new_slot_draws();
        return sm;
    }

    const std::vector<TaskSpec>& tasks() const { return tasks_; }
    const TaskTypeModel& task_model() const { return types_; }
    const std::vector<UeState>& ues() const { return ues_; }
    const std::vector<UavState>& uavs() const { return uavs_; }
    const std::vector<int>& current_assoc() const { return assoc_; }
    const std::vector<double>& current_rho() const { return rho_; }

    const ChannelRealization& channel_at(int k, int m) const {
        return channels_[static_cast<std::size_t>(k * num_uavs() + m)];
    }

    RewardNormalizer& ue_normalizer() { return ue_norm_; }
    RewardNormalizer& uav_normalizer() { return uav_norm_; }
    const RewardNormalizer& ue_normalizer() const { return ue_norm_; }
    const RewardNormalizer& uav_normalizer() const { return uav_norm_; }

private:
    void require_running() const {
        if (done()) throw std::logic_error("Environment: episode finished, call reset()");
    }

    void new_slot_draws() {
        tasks_ = generate_tasks(rng_tasks_, num_ues(), num_types(), p_.world.task_bits_min,
                                p_.world.task_bits_max);
        const int K = num_ues(), M = num_uavs();
        channels_.resize(static_cast<std::size_t>(K * M));
        actual_channels_.resize(static_cast<std::size_t>(K * M));
        for (int k = 0; k < K; ++k)
            for (int m = 0; m < M; ++m) {
                auto ch = synthesize_channel(rng_channel_, uavs_[static_cast<std::size_t>(m)].pos,
                                             ues_[static_cast<std::size_t>(k)].pos, p_.channel,
                                             p_.world.altitude, p_.uncertainty.csi_radius);
                actual_channels_[static_cast<std::size_t>(k * M + m)] = ch.actual;
                channels_[static_cast<std::size_t>(k * M + m)] = std::move(ch);
            }
    }

    EnvParams p_;
    Rng rng_place_, rng_tasks_, rng_channel_, rng_uncert_;
    std::vector<UeState> ues_;
    std::vector<UavState> uavs_;
    std::vector<TaskSpec> tasks_;
    TaskTypeModel types_;
    std::vector<ChannelRealization> channels_;
    std::vector<Cvec> actual_channels_;  // flattened view used by the SINR kernel
    std::vector<int> assoc_;
    std::vector<double> rho_;
    int slot_ = 0;
    bool phase1_done_ = false;
    RewardNormalizer ue_norm_, uav_norm_;
};

} // namespace mecsim
