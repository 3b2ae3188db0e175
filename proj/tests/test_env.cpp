#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mecsim/env.hpp"

using namespace mecsim;

namespace {

EnvParams small_params() {
    EnvParams p;
    p.world.num_ues = 4;
    p.world.num_uavs = 2;
    p.world.slots = 6;
    p.world.task_types = 2;
    return p;
}

std::vector<std::vector<double>> random_actions(Rng& rng, int count, int dim) {
    std::vector<std::vector<double>> a(static_cast<std::size_t>(count),
                                       std::vector<double>(static_cast<std::size_t>(dim)));
    for (auto& v : a)
        for (auto& x : v) x = rng.uniform();
    return a;
}

} // namespace

TEST_CASE("penalty factor") {
    CHECK(penalty(0.5, 1.0, 1.0) == 1.0);
    CHECK(penalty(1.0, 1.0, 1.0) == 1.0);
    CHECK(penalty(2.0, 1.0, 1.0) == Catch::Approx(1.6321205588285577).epsilon(1e-14));
    CHECK(penalty(1e18, 1.0, 1.0) == Catch::Approx(2.0).margin(1e-12));
    CHECK(penalty(std::numeric_limits<double>::infinity(), 1.0, 1.0) == 2.0);
    CHECK_THROWS_AS(penalty(1.0, 1.0, 0.0), std::domain_error);

    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        // moderate ratios: strictly below the asymptote (extreme ratios
        // underflow exp and saturate at exactly 2)
        const double v = penalty(rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(0.5, 10));
        CHECK(v >= 1.0);
        CHECK(v < 2.0);
    }
}

TEST_CASE("UE action decoding") {
    SECTION("argmax association with full offload") {
        const std::vector<double> raw = {0.2, 0.9, 1.0};
        const auto d = decode_ue_action(raw, 2, 0.1);
        CHECK(d.uav == 1);
        CHECK(d.rho == 1.0);
    }
    SECTION("zero partition score means fully local and clears the association") {
        const std::vector<double> raw = {0.9, 0.1, 0.0};
        const auto d = decode_ue_action(raw, 2, 0.1);
        CHECK(d.rho == 0.0);
        CHECK(d.uav == -1);
    }
    SECTION("ties break to the lowest UAV index") {
        const std::vector<double> raw = {0.5, 0.5, 1.0};
        CHECK(decode_ue_action(raw, 2, 0.1).uav == 0);
    }
    SECTION("partition scores below the margin threshold land on zero") {
        // raw = margin/(1+margin) maps exactly onto rho_hat = 0
        const double margin = 0.1;
        const std::vector<double> raw = {1.0, 0.0, margin / (1.0 + margin)};
        CHECK(decode_ue_action(raw, 2, margin).rho == Catch::Approx(0.0).margin(1e-15));
    }
    CHECK_THROWS_AS(decode_ue_action(std::vector<double>{0.1}, 2, 0.1), std::invalid_argument);
}

TEST_CASE("UAV action decoding") {
    const std::vector<int> assoc = {0, -1, 0, 1};
    SECTION("zero magnitude score gives zero acceleration") {
        std::vector<double> raw(2 + 5, 0.5);
        raw[0] = 0.0;
        const auto d = decode_uav_action(raw, assoc, 0, 5.0, 1e10, 4, BeamformerMode::mrc);
        CHECK(d.accel.norm() == 0.0);
    }
    SECTION("single served UE splits capacity against the idle share") {
        const std::vector<int> one = {0, -1};
        std::vector<double> raw = {0.0, 0.0, 0.8, 0.0, 0.2};  // share 0.8, idle 0.2
        const auto d = decode_uav_action(raw, one, 0, 5.0, 1e10, 4, BeamformerMode::mrc);
        CHECK(d.f_edge[0] == Catch::Approx(1e10 * 0.8).epsilon(1e-12));
        CHECK(d.f_edge[1] == 0.0);
    }
    SECTION("capacity cap holds for any raw vector") {
        Rng rng(2);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> raw(2 + 5);
            for (auto& x : raw) x = rng.uniform();
            const auto d = decode_uav_action(raw, assoc, 0, 5.0, 1e10, 4, BeamformerMode::mrc);
            double sum = 0.0;
            for (int k = 0; k < 4; ++k) {
                CHECK(d.f_edge[static_cast<std::size_t>(k)] <= 1e10 * (1 + 1e-12));
                if (assoc[static_cast<std::size_t>(k)] != 0)
                    CHECK(d.f_edge[static_cast<std::size_t>(k)] == 0.0);
                sum += d.f_edge[static_cast<std::size_t>(k)];
            }
            CHECK(sum <= 1e10 * (1 + 1e-12));
            CHECK(d.accel.norm() <= 5.0 * (1 + 1e-12));
        }
    }
    SECTION("no served UEs means an idle allocation") {
        const std::vector<int> none = {-1, -1};
        std::vector<double> raw(2 + 3, 0.7);
        const auto d = decode_uav_action(raw, none, 0, 5.0, 1e10, 4, BeamformerMode::mrc);
        CHECK(d.f_edge[0] == 0.0);
        CHECK(d.f_edge[1] == 0.0);
    }
    SECTION("action-mode beamformer is unit norm, degenerate input falls back") {
        const std::vector<int> one = {0};
        std::vector<double> raw(2 + 2 + 2 * 4, 0.9);
        const auto d = decode_uav_action(raw, one, 0, 5.0, 1e10, 4, BeamformerMode::action);
        REQUIRE(d.beamformer.size() == 4);
        CHECK(cvec_norm(d.beamformer) == Catch::Approx(1.0).margin(1e-12));
        std::vector<double> mid(2 + 2 + 2 * 4, 0.5);  // maps to the zero vector
        const auto d2 = decode_uav_action(mid, one, 0, 5.0, 1e10, 4, BeamformerMode::action);
        CHECK(d2.beamformer.empty());
    }
}

TEST_CASE("frequency scaling rule") {
    CHECK(dvfs_frequency(1e6, 1.0, 1000.0, 1.0, 1e9) == 0.0);
    CHECK(dvfs_frequency(1e7, 0.0, 1000.0, 1.0, 1e9) == 1e9);  // demand above the cap
    CHECK(dvfs_frequency(1e6, 0.0, 1000.0, 1.0, 1e10) == Catch::Approx(1e9).epsilon(1e-12));
    CHECK_THROWS_AS(dvfs_frequency(1e6, 0.5, 1000.0, 0.0, 1e9), std::domain_error);
}

TEST_CASE("episode shape and determinism") {
    const auto params = small_params();
    Environment env(params, 42), env2(params, 42);
    Rng act_rng(7), act_rng2(7);

    int reward_vectors = 0;
    while (!env.done()) {
        const auto ue_act = random_actions(act_rng, env.num_ues(), env.ue_action_dim());
        env.decode_ue_phase(ue_act);
        const auto sm = env.step(random_actions(act_rng, env.num_uavs(), env.uav_action_dim()));

        const auto ue_act2 = random_actions(act_rng2, env2.num_ues(), env2.ue_action_dim());
        env2.decode_ue_phase(ue_act2);
        const auto sm2 = env2.step(random_actions(act_rng2, env2.num_uavs(), env2.uav_action_dim()));

        ++reward_vectors;
        REQUIRE(sm.ue_rewards.size() == 4);
        REQUIRE(sm.uav_rewards.size() == 2);

        // bit-identical under identical seeds and action streams
        CHECK(sm.weighted_energy == sm2.weighted_energy);
        for (std::size_t k = 0; k < sm.ue_rewards.size(); ++k)
            CHECK(sm.ue_rewards[k].value == sm2.ue_rewards[k].value);
        for (std::size_t m = 0; m < sm.uav_rewards.size(); ++m)
            CHECK(sm.uav_rewards[m].value == sm2.uav_rewards[m].value);

        // external re-aggregation of the weighted objective
        double expect = 0.0;
        for (double e : sm.ue_local_energy) expect += e;
        for (double e : sm.ue_offload_energy) expect += e;
        double uav = 0.0;
        for (double e : sm.uav_edge_energy) uav += e;
        for (double e : sm.uav_flight_energy) uav += e;
        expect += params.world.omega * uav;
        CHECK(sm.weighted_energy == Catch::Approx(expect).epsilon(1e-12));
    }
    CHECK(reward_vectors == params.world.slots);
    CHECK_THROWS_AS(env.ue_observations(), std::logic_error);
}

TEST_CASE("observation layouts are fixed and ordered") {
    const auto params = small_params();
    Environment env(params, 3);
    const auto ue_obs = env.ue_observations();
    REQUIRE(static_cast<int>(ue_obs.size()) == 4);
    for (const auto& o : ue_obs) CHECK(static_cast<int>(o.size()) == env.ue_obs_dim());
    CHECK(env.ue_obs_dim() == 1 + 2 * 2 + 1 + 2 + 2);

    // identical query twice: order-stable
    const auto again = env.ue_observations();
    for (std::size_t k = 0; k < ue_obs.size(); ++k) CHECK(ue_obs[k] == again[k]);

    // phase-1 rho lands inside the same slot's UAV observation
    std::vector<std::vector<double>> ue_act(4, std::vector<double>(3, 0.0));
    ue_act[2] = {1.0, 0.0, 1.0};  // UE 2 -> UAV 0, rho = 1
    const auto uav_obs = env.decode_ue_phase(ue_act);
    REQUIRE(static_cast<int>(uav_obs.size()) == 2);
    CHECK(static_cast<int>(uav_obs[0].size()) == env.uav_obs_dim());
    // layout: [m/M, own q (2), other q (2), per-UE blocks of size 5+Z]
    const int block = 5 + 2;
    const int base = 1 + 2 * 2 + 2 * block;  // UE 2's block
    CHECK(uav_obs[0][static_cast<std::size_t>(base)] == 1.0);        // served flag
    CHECK(uav_obs[0][static_cast<std::size_t>(base + 3)] == 1.0);    // rho
    CHECK(uav_obs[1][static_cast<std::size_t>(base)] == 0.0);        // not served by UAV 1
}

TEST_CASE("decoded allocations satisfy the feasibility constraints every slot") {
    auto params = small_params();
    params.world.slots = 12;
    Environment env(params, 11);
    Rng rng(5);
    while (!env.done()) {
        env.decode_ue_phase(random_actions(rng, env.num_ues(), env.ue_action_dim()));
        const auto& rho = env.current_rho();
        const auto& assoc = env.current_assoc();
        for (int k = 0; k < env.num_ues(); ++k) {
            CHECK(rho[static_cast<std::size_t>(k)] >= 0.0);
            CHECK(rho[static_cast<std::size_t>(k)] <= 1.0);
            CHECK(assoc[static_cast<std::size_t>(k)] >= -1);
            CHECK(assoc[static_cast<std::size_t>(k)] < env.num_uavs());
            if (rho[static_cast<std::size_t>(k)] == 0.0) CHECK(assoc[static_cast<std::size_t>(k)] == -1);
        }
        const auto sm = env.step(random_actions(rng, env.num_uavs(), env.uav_action_dim()));
        std::vector<double> per_uav(2, 0.0);
        for (int k = 0; k < env.num_ues(); ++k) {
            CHECK(sm.f_local[static_cast<std::size_t>(k)] <= params.world.ue_freq_max);
            CHECK(sm.f_edge[static_cast<std::size_t>(k)] <= params.world.uav_freq_max * (1 + 1e-12));
            if (sm.associations[static_cast<std::size_t>(k)] >= 0)
                per_uav[static_cast<std::size_t>(sm.associations[static_cast<std::size_t>(k)])] +=
                    sm.f_edge[static_cast<std::size_t>(k)];
        }
        for (double f : per_uav) CHECK(f <= params.world.uav_freq_max * (1 + 1e-12));
        for (const auto& r : sm.ue_rewards) {
            CHECK(r.value >= -5.0);
            CHECK(r.value <= 5.0);
        }
        for (const auto& r : sm.uav_rewards) {
            CHECK(r.value >= -5.0);
            CHECK(r.value <= 5.0);
        }
    }
}

TEST_CASE("UAV reward pieces") {
    auto params = small_params();
    params.world.slots = 4;
    Environment env(params, 21);
    Rng rng(9);
    env.decode_ue_phase(random_actions(rng, env.num_ues(), env.ue_action_dim()));
    const auto sm = env.step(random_actions(rng, env.num_uavs(), env.uav_action_dim()));

    for (const auto& r : sm.uav_rewards) {
        // spawned inside the region: the out-of-region factor is exactly 1
        CHECK(r.out_factor == 1.0);
        CHECK(r.proximity >= 1.0);
        CHECK(r.deadline_factor >= 1.0);
    }
    if (sm.collisions == 0)
        // every pairwise term is exactly 1, so the sum is M - 1
        for (const auto& r : sm.uav_rewards) CHECK(r.collision_factor == 1.0);
}

TEST_CASE("reward normalizer stays within the clip and keeps sign") {
    RewardNormalizer n;
    const double a = n.normalize(-10.0);
    CHECK(a == -1.0);  // first sample: scaled by its own magnitude
    for (double x : {-20.0, -5.0, -1.0, -40.0, -3.0}) {
        const double v = n.normalize(x);
        CHECK(v <= 0.0);
        CHECK(v >= -5.0);
    }
}

TEST_CASE("mismatched action counts are rejected") {
    Environment env(small_params(), 1);
    CHECK_THROWS_AS(env.decode_ue_phase({}), std::invalid_argument);
    std::vector<std::vector<double>> ue(4, std::vector<double>(3, 0.5));
    env.decode_ue_phase(ue);
    CHECK_THROWS_AS(env.step({}), std::invalid_argument);
    // stepping without the UE phase decoded is a sequencing error
    std::vector<std::vector<double>> uav(2, std::vector<double>(static_cast<std::size_t>(env.uav_action_dim()), 0.5));
    env.step(uav);
    CHECK_THROWS_AS(env.step(uav), std::logic_error);
}
