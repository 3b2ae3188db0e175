#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mecsim/config.hpp"

using namespace mecsim;

TEST_CASE("empty document yields the tabulated defaults") {
    const auto cfg = parse_config("");
    CHECK(cfg.world.num_ues == 20);
    CHECK(cfg.world.num_uavs == 5);
    CHECK(cfg.world.slots == 200);
    CHECK(cfg.world.slot_duration == 1.0);
    CHECK(cfg.world.altitude == 200.0);
    CHECK(cfg.world.region_side == 1000.0);
    CHECK(cfg.world.max_speed == 20.0);
    CHECK(cfg.world.max_accel == 5.0);
    CHECK(cfg.world.ue_power_max == 0.5);
    CHECK(cfg.world.ue_freq_max == 1e9);
    CHECK(cfg.world.uav_freq_max == 1e10);
    CHECK(cfg.world.task_types == 5);
    CHECK(cfg.world.task_bits_min == 3.5e6);
    CHECK(cfg.world.task_bits_max == 4.5e6);
    CHECK(cfg.world.complexity_min == 500.0);
    CHECK(cfg.world.complexity_max == 1500.0);
    CHECK(cfg.propulsion.blade_power == 59.03);
    CHECK(cfg.propulsion.induced_power == 79.07);
    CHECK(cfg.propulsion.tip_speed == 120.0);
    CHECK(cfg.propulsion.rotor_velocity == 3.6);
    CHECK(cfg.propulsion.rotor_area == 0.503);
    CHECK(cfg.propulsion.solidity == 0.05);
    CHECK(cfg.channel.rician_factor == 10.0);
    CHECK(cfg.channel.bandwidth == 1e7);
    CHECK(cfg.channel.noise_dbm == -85.0);
    CHECK(cfg.channel.array_x * cfg.channel.array_y == 4);
    CHECK(cfg.uncertainty.csi_radius == 0.05);
    CHECK(cfg.uncertainty.complexity_radius == 20.0);
    CHECK(cfg.train.episodes == 300);
    CHECK(cfg.train.discount == 0.98);
    CHECK(cfg.train.learning_rate == 0.0005);

    // resolved linear noise power for -85 dBm
    CHECK(cfg.channel.resolve().noise_power == Catch::Approx(3.1622776601683794e-12).epsilon(1e-12));
}

TEST_CASE("range violations are rejected") {
    CHECK_THROWS_AS(parse_config("[world]\nomega = -1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[train]\ndiscount = 1.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[world]\nnum_ues = 0\n"), ConfigError);
}

TEST_CASE("unknown keys and sections carry line numbers") {
    try {
        parse_config("[world]\nnum_ues = 4\nbogus_key = 3\n");
        FAIL("expected a parse error");
    } catch (const ConfigError& e) {
        CHECK(e.line == 3);
        CHECK(std::string(e.what()).find("bogus_key") != std::string::npos);
    }
    try {
        parse_config("[nope]\n");
        FAIL("expected a parse error");
    } catch (const ConfigError& e) {
        CHECK(e.line == 1);
    }
    CHECK_THROWS_AS(parse_config("stray = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[world]\nnum_ues 4\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[world]\nnum_ues = four\n"), ConfigError);
}

TEST_CASE("comments and whitespace are tolerated") {
    const auto cfg = parse_config(
        "# leading comment\n"
        "  [world]   \n"
        "num_ues = 7   # trailing note\n"
        "\n"
        "num_uavs = 3\n");
    CHECK(cfg.world.num_ues == 7);
    CHECK(cfg.world.num_uavs == 3);
}

TEST_CASE("serialize then parse is the identity") {
    ExperimentConfig cfg;
    cfg.world.num_ues = 4;
    cfg.world.omega = 0.25;
    cfg.sweep = SweepAxis::omega;
    cfg.sweep_values = {0.1, 0.5, 1.0};
    cfg.seeds = {7, 8};
    cfg.policy = PolicyChoice::gaussian;
    cfg.train.hidden = {32, 32, 16};
    cfg.penalty_mode = DelayPenaltyMode::realized;
    cfg.beamformer = BeamformerMode::action;

    const std::string text = serialize_config(cfg);
    const auto back = parse_config(text);
    CHECK(serialize_config(back) == text);
    CHECK(back.world.num_ues == 4);
    CHECK(back.world.omega == 0.25);
    CHECK(back.sweep == SweepAxis::omega);
    CHECK(back.sweep_values == cfg.sweep_values);
    CHECK(back.seeds == cfg.seeds);
    CHECK(back.policy == PolicyChoice::gaussian);
    CHECK(back.train.hidden == cfg.train.hidden);
    CHECK(back.penalty_mode == DelayPenaltyMode::realized);
    CHECK(back.beamformer == BeamformerMode::action);
}

TEST_CASE("channel resolution") {
    ChannelConfig ch;
    SECTION("normalized reference puts unit norm at the reference distance") {
        const auto cp = ch.resolve();
        CHECK(cp.reference_gain == Catch::Approx(std::pow(200.0, 2.2) / 4.0).epsilon(1e-12));
        // E||h||^2 at the reference distance = gain * d^-beta * At = 1
        CHECK(cp.reference_gain * std::pow(200.0, -2.2) * cp.array_size() == Catch::Approx(1.0).epsilon(1e-12));
    }
    SECTION("free-space reference") {
        ch.reference_mode = ReferenceGainMode::free_space;
        const auto cp = ch.resolve();
        CHECK(cp.reference_gain == Catch::Approx(0.00014248291449703749).epsilon(1e-9));
    }
    SECTION("half-wavelength spacing") {
        const auto cp = ch.resolve();
        CHECK(cp.spacing == Catch::Approx(0.5 * kSpeedOfLight / 2.0e9).epsilon(1e-12));
    }
}

TEST_CASE("sweep substitution") {
    ExperimentConfig base;
    CHECK(apply_sweep(base, SweepAxis::num_ues, 12).world.num_ues == 12);
    CHECK(apply_sweep(base, SweepAxis::num_uavs, 3).world.num_uavs == 3);
    CHECK(apply_sweep(base, SweepAxis::omega, 0.7).world.omega == 0.7);
    CHECK(apply_sweep(base, SweepAxis::eps_c, 40).uncertainty.complexity_radius == 40.0);
    CHECK(apply_sweep(base, SweepAxis::eps_h, 0.1).uncertainty.csi_radius == 0.1);
    const auto ts = apply_sweep(base, SweepAxis::task_size, 2.0e6);
    CHECK(ts.world.task_bits_min == Catch::Approx(1.5e6));
    CHECK(ts.world.task_bits_max == Catch::Approx(2.5e6));
}

TEST_CASE("cross-field validation still runs") {
    CHECK_THROWS_AS(parse_config("[world]\ntask_bits_min = 5e6\ntask_bits_max = 4e6\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[experiment]\nsweep = omega\n"), ConfigError);  // missing values
}
