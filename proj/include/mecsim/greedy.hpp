#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mecsim/env.hpp"
#include "mecsim/mappo.hpp"
#include "mecsim/robust.hpp"

namespace mecsim {

// Slot-greedy baseline using only current-slot knowledge (channel estimates
// and estimated complexities). It emits raw action vectors in [0,1] and
// goes through the same decoders as the learned policies, so every decoded
// allocation satisfies the same constraints.
//
// Per UE: associate with the UAV of largest estimated channel norm, then
// pick the partition over the grid {0, 0.1, ..., 1} that minimizes the
// estimated slot energy among robust-deadline-feasible candidates
// (fallback: fully local). Per UAV: full acceleration toward the served-UE
// centroid; frequency shares proportional to the served worst-case cycle
// demand, sized to finish within the edge time budget and rescaled into
// the capacity cap by the decoder when oversubscribed.
class GreedyPolicy {
public:
    // fraction of the slot budgeted for edge computing, the rest covers the
    // uplink
    explicit GreedyPolicy(double edge_time_budget = 0.6) : budget_(edge_time_budget) {}

    std::vector<std::vector<double>> ue_actions(const Environment& env) const {
        const int K = env.num_ues(), M = env.num_uavs();
        const auto& w = env.params().world;
        const auto& cp = env.params().channel;
        const auto& unc = env.params().uncertainty;

        // everyone's best link by estimated channel norm
        std::vector<int> best(static_cast<std::size_t>(K), 0);
        std::vector<double> best_norm(static_cast<std::size_t>(K), 0.0);
        for (int k = 0; k < K; ++k) {
            for (int m = 0; m < M; ++m) {
                const double n = cvec_norm(env.channel_at(k, m).estimated);
                if (n > best_norm[static_cast<std::size_t>(k)]) {
                    best_norm[static_cast<std::size_t>(k)] = n;
                    best[static_cast<std::size_t>(k)] = m;
                }
            }
        }

        std::vector<std::vector<double>> actions(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k) {
            const auto& task = env.tasks()[static_cast<std::size_t>(k)];
            const double c_hat = env.task_model().estimated[static_cast<std::size_t>(task.type)];
            const int m = best[static_cast<std::size_t>(k)];
            const Beamformer bf = mrc_beamformer(env.channel_at(k, m).estimated);

            RobustDelayInput rin;
            rin.task_bits = task.bits;
            rin.c_hat = c_hat;
            rin.associated = true;
            rin.signal_amp = std::abs(inner(bf.w, env.channel_at(k, m).estimated));
            rin.tx_power = w.ue_power_max;
            rin.noise_power = cp.noise_power;
            rin.bandwidth = cp.bandwidth;
            double est_interference = 0.0;
            for (int i = 0; i < K; ++i) {
                if (i == k) continue;
                const double amp =
                    std::abs(inner(bf.w, env.channel_at(i, best[static_cast<std::size_t>(i)]).estimated));
                rin.interference_amps.push_back(amp);
                rin.interference_powers.push_back(w.ue_power_max);
                est_interference += amp * amp * w.ue_power_max;
            }
            const double est_rate =
                rate(rin.signal_amp * rin.signal_amp * w.ue_power_max / (est_interference + cp.noise_power),
                     cp.bandwidth);

            double best_rho = 0.0, best_energy = 0.0;
            bool any_feasible = false;
            for (int g = 0; g <= 10; ++g) {
                const double rho = g / 10.0;
                rin.rho = rho;
                rin.f_local = dvfs_frequency(task.bits, rho, c_hat, w.slot_duration, w.ue_freq_max);
                const double demand = rho * task.bits * (c_hat + unc.complexity_radius);
                rin.f_edge = rho > 0.0 ? std::min(w.uav_freq_max, demand / (budget_ * w.slot_duration)) : 0.0;
                if (!robust_delay_check(rin, unc, w.slot_duration).feasible) continue;

                const auto [off_bits, local_bits] = split_task(task.bits, rho);
                const double e_local = local_delay_energy(local_bits, c_hat, rin.f_local, w.kappa).energy;
                const double e_off = offload_delay_energy(off_bits, est_rate, w.ue_power_max).energy;
                const double e_edge = edge_delay_energy(off_bits, c_hat, rin.f_edge, w.kappa).energy;
                const double e = e_local + e_off + w.omega * e_edge;
                if (!any_feasible || e < best_energy) {
                    any_feasible = true;
                    best_energy = e;
                    best_rho = rho;
                }
            }

            auto& a = actions[static_cast<std::size_t>(k)];
            a.assign(static_cast<std::size_t>(M + 1), 0.0);
            if (any_feasible && best_rho > 0.0) {
                a[static_cast<std::size_t>(m)] = 1.0;
                a[static_cast<std::size_t>(M)] =
                    (best_rho + w.local_rho_margin) / (1.0 + w.local_rho_margin);
            }
            // otherwise all zeros: partition score decodes to fully local
        }
        return actions;
    }

    // Requires the current slot's UE phase to be decoded already.
    std::vector<std::vector<double>> uav_actions(const Environment& env) const {
        const int K = env.num_ues(), M = env.num_uavs();
        const auto& w = env.params().world;
        const auto& assoc = env.current_assoc();
        const auto& rho = env.current_rho();
        const int extra = env.uav_action_dim() - (2 + K + 1);

        std::vector<std::vector<double>> actions(static_cast<std::size_t>(M));
        for (int m = 0; m < M; ++m) {
            auto& a = actions[static_cast<std::size_t>(m)];
            a.assign(static_cast<std::size_t>(env.uav_action_dim()), 0.0);

            Vec2 centroid{};
            int served = 0;
            for (int k = 0; k < K; ++k)
                if (assoc[static_cast<std::size_t>(k)] == m) {
                    centroid += env.ues()[static_cast<std::size_t>(k)].pos;
                    ++served;
                }
            if (served > 0) {
                centroid = centroid * (1.0 / served);
                const Vec2 dir = centroid - env.uavs()[static_cast<std::size_t>(m)].pos;
                if (dir.norm() > 1e-9) {
                    a[0] = 1.0;  // full acceleration toward the centroid
                    double ang = std::atan2(dir.y, dir.x);
                    if (ang < 0.0) ang += 2.0 * kPi;
                    a[1] = ang / (2.0 * kPi);
                }
                double sum_share = 0.0, max_share = 0.0;
                for (int k = 0; k < K; ++k) {
                    if (assoc[static_cast<std::size_t>(k)] != m) continue;
                    const auto& task = env.tasks()[static_cast<std::size_t>(k)];
                    const double c_wc =
                        env.task_model().estimated[static_cast<std::size_t>(task.type)] +
                        env.params().uncertainty.complexity_radius;
                    const double target =
                        rho[static_cast<std::size_t>(k)] * task.bits * c_wc / (budget_ * w.slot_duration);
                    const double share = target / w.uav_freq_max;
                    a[static_cast<std::size_t>(2 + k)] = share;
                    sum_share += share;
                    max_share = std::max(max_share, share);
                }
                a[static_cast<std::size_t>(2 + K)] = std::max(0.0, 1.0 - sum_share);  // idle headroom
                // fit scores into [0,1]; the decoder is scale-invariant
                const double scale = std::max(1.0, max_share);
                for (int i = 0; i <= K; ++i) a[static_cast<std::size_t>(2 + i)] /= scale;
            }
            // beamformer block (if present) stays at 0.5 -> zero vector -> MRC
            for (int i = 0; i < extra; ++i) a[static_cast<std::size_t>(2 + K + 1 + i)] = 0.5;
        }
        return actions;
    }

private:
    double budget_;
};

// Frozen greedy episodes through the same two-phase loop the trainer uses,
// on the same derived evaluation stream so runs pair with net policies
// under one master seed.
inline std::vector<EvalEpisodeStats> evaluate_greedy(const EnvParams& params, std::uint64_t master_seed,
                                                     int episodes, const TrajectorySink& traj = {},
                                                     double edge_time_budget = 0.6) {
    Environment env(params, derive_seed(master_seed, kEvalEnvStream));
    GreedyPolicy greedy(edge_time_budget);
    std::vector<EvalEpisodeStats> out;
    out.reserve(static_cast<std::size_t>(episodes));
    const int K = env.num_ues(), M = env.num_uavs(), N = env.params().world.slots;
    for (int ep = 0; ep < episodes; ++ep) {
        if (env.done()) env.reset();
        EvalEpisodeStats st;
        for (int n = 0; n < N; ++n) {
            const auto ue_act = greedy.ue_actions(env);
            env.decode_ue_phase(ue_act);
            const auto uav_act = greedy.uav_actions(env);
            const auto sm = env.step(uav_act);
            Trainer::accumulate_eval(st, sm, K, M, N, traj, ep);
        }
        out.push_back(st);
    }
    return out;
}

} // namespace mecsim
