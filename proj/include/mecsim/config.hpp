#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mecsim/env.hpp"
#include "mecsim/mappo.hpp"

namespace mecsim {

enum class SweepAxis { none, num_ues, num_uavs, omega, eps_c, eps_h, task_size };
enum class PolicyChoice { beta, gaussian, greedy };
enum class ReferenceGainMode { normalized, free_space };

// Channel parameters as configured; `resolve()` turns them into the linear
// quantities the simulator consumes. In `normalized` mode the reference
// path gain is chosen so the expected channel norm is 1 at the reference
// distance, which keeps the CSI error radius a few-percent relative
// perturbation as intended; `free_space` uses the physical 1 m constant.
struct ChannelConfig {
    double path_loss_exponent = 2.2;
    double rician_factor = 10.0;
    double carrier_freq = 2.0e9;
    double spacing_wavelengths = 0.5;
    int array_x = 2;
    int array_y = 2;
    double bandwidth = 1.0e7;
    double noise_dbm = -85.0;
    ReferenceGainMode reference_mode = ReferenceGainMode::normalized;
    double reference_distance = 200.0;

    ChannelParams resolve() const {
        ChannelParams cp;
        cp.path_loss_exponent = path_loss_exponent;
        cp.rician_factor = rician_factor;
        cp.carrier_freq = carrier_freq;
        cp.spacing = spacing_wavelengths * kSpeedOfLight / carrier_freq;
        cp.array_x = array_x;
        cp.array_y = array_y;
        cp.bandwidth = bandwidth;
        cp.noise_power = 1e-3 * std::pow(10.0, noise_dbm / 10.0);
        cp.reference_gain =
            reference_mode == ReferenceGainMode::normalized
                ? std::pow(reference_distance, path_loss_exponent) / cp.array_size()
                : std::pow(kSpeedOfLight / (4.0 * kPi * carrier_freq), 2.0);
        return cp;
    }
};

struct ExperimentConfig {
    WorldConfig world;
    PropulsionParams propulsion;
    ChannelConfig channel;
    UncertaintyBudget uncertainty;
    DelayPenaltyMode penalty_mode = DelayPenaltyMode::robust;
    BeamformerMode beamformer = BeamformerMode::mrc;
    TrainConfig train;
    SweepAxis sweep = SweepAxis::none;
    std::vector<double> sweep_values;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    PolicyChoice policy = PolicyChoice::beta;
    int eval_episodes = 10;
    std::string out_dir = "out";

    EnvParams env_params() const {
        EnvParams ep;
        ep.world = world;
        ep.propulsion = propulsion;
        ep.channel = channel.resolve();
        ep.uncertainty = uncertainty;
        ep.penalty_mode = penalty_mode;
        ep.beamformer = beamformer;
        return ep;
    }

    TrainConfig train_config() const {
        TrainConfig tc = train;
        tc.policy = policy == PolicyChoice::gaussian ? PolicyKind::gaussian : PolicyKind::beta;
        return tc;
    }

    void validate() const {
        world.validate();
        propulsion.validate();
        channel.resolve().validate();
        uncertainty.validate();
        train.validate();
        if (eval_episodes < 1) throw std::invalid_argument("experiment: eval_episodes must be >= 1");
        if (seeds.empty()) throw std::invalid_argument("experiment: seeds must not be empty");
        if (sweep != SweepAxis::none && sweep_values.empty())
            throw std::invalid_argument("experiment: sweep_values required when a sweep axis is set");
    }
};

struct ConfigError : std::runtime_error {
    int line;
    ConfigError(int line_no, const std::string& msg)
        : std::runtime_error("config line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& v, int line) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw ConfigError(line, "expected a number, got '" + v + "'");
    }
}

inline long long parse_int(const std::string& v, int line) {
    try {
        std::size_t pos = 0;
        const long long d = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw ConfigError(line, "expected an integer, got '" + v + "'");
    }
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(v);
    while (std::getline(ss, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

inline std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

struct KeyIO {
    const char* section;
    const char* key;
    std::function<void(ExperimentConfig&, const std::string&, int)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

inline const std::vector<KeyIO>& config_keys() {
    static const std::vector<KeyIO> keys = [] {
        std::vector<KeyIO> t;
        auto add_double = [&t](const char* sec, const char* key, auto ref, double lo, double hi) {
            t.push_back({sec, key,
                         [ref, lo, hi, key](ExperimentConfig& c, const std::string& v, int line) {
                             const double d = parse_double(v, line);
                             if (d < lo || d > hi)
                                 throw ConfigError(line, std::string(key) + " out of range");
                             ref(c) = d;
                         },
                         [ref](const ExperimentConfig& c) {
                             return format_double(ref(const_cast<ExperimentConfig&>(c)));
                         }});
        };
        auto add_int = [&t](const char* sec, const char* key, auto ref, long long lo, long long hi) {
            t.push_back({sec, key,
                         [ref, lo, hi, key](ExperimentConfig& c, const std::string& v, int line) {
                             const long long d = parse_int(v, line);
                             if (d < lo || d > hi)
                                 throw ConfigError(line, std::string(key) + " out of range");
                             ref(c) = static_cast<int>(d);
                         },
                         [ref](const ExperimentConfig& c) {
                             return std::to_string(ref(const_cast<ExperimentConfig&>(c)));
                         }});
        };

        // [world]
        add_int("world", "num_ues", [](ExperimentConfig& c) -> int& { return c.world.num_ues; }, 1, 1000000);
        add_int("world", "num_uavs", [](ExperimentConfig& c) -> int& { return c.world.num_uavs; }, 1, 1000000);
        add_int("world", "slots", [](ExperimentConfig& c) -> int& { return c.world.slots; }, 1, 100000000);
        add_double("world", "slot_duration", [](ExperimentConfig& c) -> double& { return c.world.slot_duration; }, 1e-9, 1e9);
        add_double("world", "altitude", [](ExperimentConfig& c) -> double& { return c.world.altitude; }, 1e-9, 1e9);
        add_double("world", "region_side", [](ExperimentConfig& c) -> double& { return c.world.region_side; }, 1e-9, 1e12);
        add_double("world", "min_uav_distance", [](ExperimentConfig& c) -> double& { return c.world.min_uav_distance; }, 1e-9, 1e12);
        add_double("world", "max_speed", [](ExperimentConfig& c) -> double& { return c.world.max_speed; }, 1e-9, 1e9);
        add_double("world", "max_accel", [](ExperimentConfig& c) -> double& { return c.world.max_accel; }, 1e-9, 1e9);
        add_double("world", "omega", [](ExperimentConfig& c) -> double& { return c.world.omega; }, 0.0, 1e9);
        add_double("world", "kappa", [](ExperimentConfig& c) -> double& { return c.world.kappa; }, 1e-40, 1.0);
        add_double("world", "ue_power_max", [](ExperimentConfig& c) -> double& { return c.world.ue_power_max; }, 1e-12, 1e6);
        add_double("world", "ue_freq_max", [](ExperimentConfig& c) -> double& { return c.world.ue_freq_max; }, 1.0, 1e15);
        add_double("world", "uav_freq_max", [](ExperimentConfig& c) -> double& { return c.world.uav_freq_max; }, 1.0, 1e15);
        add_double("world", "kappa1", [](ExperimentConfig& c) -> double& { return c.world.kappa1; }, 1e-12, 1e9);
        add_double("world", "kappa2", [](ExperimentConfig& c) -> double& { return c.world.kappa2; }, 1e-12, 1e9);
        add_double("world", "varpi", [](ExperimentConfig& c) -> double& { return c.world.varpi; }, 1e-12, 1e9);
        add_double("world", "centroid_threshold", [](ExperimentConfig& c) -> double& { return c.world.centroid_threshold; }, 1e-9, 1e12);
        add_int("world", "task_types", [](ExperimentConfig& c) -> int& { return c.world.task_types; }, 1, 100000);
        add_double("world", "task_bits_min", [](ExperimentConfig& c) -> double& { return c.world.task_bits_min; }, 1.0, 1e15);
        add_double("world", "task_bits_max", [](ExperimentConfig& c) -> double& { return c.world.task_bits_max; }, 1.0, 1e15);
        add_double("world", "complexity_min", [](ExperimentConfig& c) -> double& { return c.world.complexity_min; }, 1e-9, 1e9);
        add_double("world", "complexity_max", [](ExperimentConfig& c) -> double& { return c.world.complexity_max; }, 1e-9, 1e9);
        add_double("world", "local_rho_margin", [](ExperimentConfig& c) -> double& { return c.world.local_rho_margin; }, 1e-9, 10.0);
        t.push_back({"world", "seed",
                     [](ExperimentConfig& c, const std::string& v, int line) {
                         c.world.seed = static_cast<std::uint64_t>(parse_int(v, line));
                     },
                     [](const ExperimentConfig& c) { return std::to_string(c.world.seed); }});

        // [propulsion]
        add_double("propulsion", "blade_power", [](ExperimentConfig& c) -> double& { return c.propulsion.blade_power; }, 1e-9, 1e9);
        add_double("propulsion", "induced_power", [](ExperimentConfig& c) -> double& { return c.propulsion.induced_power; }, 1e-9, 1e9);
        add_double("propulsion", "tip_speed", [](ExperimentConfig& c) -> double& { return c.propulsion.tip_speed; }, 1e-9, 1e9);
        add_double("propulsion", "rotor_velocity", [](ExperimentConfig& c) -> double& { return c.propulsion.rotor_velocity; }, 1e-9, 1e9);
        add_double("propulsion", "drag_ratio", [](ExperimentConfig& c) -> double& { return c.propulsion.drag_ratio; }, 1e-9, 1e9);
        add_double("propulsion", "air_density", [](ExperimentConfig& c) -> double& { return c.propulsion.air_density; }, 1e-9, 1e9);
        add_double("propulsion", "rotor_area", [](ExperimentConfig& c) -> double& { return c.propulsion.rotor_area; }, 1e-9, 1e9);
        add_double("propulsion", "solidity", [](ExperimentConfig& c) -> double& { return c.propulsion.solidity; }, 1e-9, 1e9);

        // [channel]
        add_double("channel", "path_loss_exponent", [](ExperimentConfig& c) -> double& { return c.channel.path_loss_exponent; }, 0.1, 10.0);
        add_double("channel", "rician_factor", [](ExperimentConfig& c) -> double& { return c.channel.rician_factor; }, 0.0, 1e15);
        add_double("channel", "carrier_freq", [](ExperimentConfig& c) -> double& { return c.channel.carrier_freq; }, 1.0, 1e15);
        add_double("channel", "spacing_wavelengths", [](ExperimentConfig& c) -> double& { return c.channel.spacing_wavelengths; }, 1e-6, 100.0);
        add_int("channel", "array_x", [](ExperimentConfig& c) -> int& { return c.channel.array_x; }, 1, 1024);
        add_int("channel", "array_y", [](ExperimentConfig& c) -> int& { return c.channel.array_y; }, 1, 1024);
        add_double("channel", "bandwidth", [](ExperimentConfig& c) -> double& { return c.channel.bandwidth; }, 1.0, 1e15);
        add_double("channel", "noise_dbm", [](ExperimentConfig& c) -> double& { return c.channel.noise_dbm; }, -300.0, 100.0);
        add_double("channel", "reference_distance", [](ExperimentConfig& c) -> double& { return c.channel.reference_distance; }, 1e-3, 1e9);
        t.push_back({"channel", "reference_mode",
                     [](ExperimentConfig& c, const std::string& v, int line) {
                         if (v == "normalized") c.channel.reference_mode = ReferenceGainMode::normalized;
                         else if (v == "free_space") c.channel.reference_mode = ReferenceGainMode::free_space;
                         else throw ConfigError(line, "reference_mode must be normalized or free_space");
                     },
                     [](const ExperimentConfig& c) {
                         return c.channel.reference_mode == ReferenceGainMode::normalized ? "normalized"
                                                                                          : "free_space";
                     }});
        t.push_back({"channel", "beamformer",
                     [](ExperimentConfig& c, const std::string& v, int line) {
                         if (v == "mrc") c.beamformer = BeamformerMode::mrc;
                         else if (v == "action") c.beamformer = BeamformerMode::action;
                         else throw ConfigError(line, "beamformer must be mrc or action");
                     },
                     [](const ExperimentConfig& c) {
                         return c.beamformer == BeamformerMode::mrc ? "mrc" : "action";
                     }});

        // [uncertainty]
        add_double("uncertainty", "csi_error", [](ExperimentConfig& c) -> double& { return c.uncertainty.csi_radius; }, 0.0, 1e9);
        add_double("uncertainty", "complexity_error", [](ExperimentConfig& c) -> double& { return c.uncertainty.complexity_radius; }, 0.0, 1e9);
        t.push_back({"uncertainty", "penalty_delay",
                     [](ExperimentConfig& c, const std::string& v, int line) {
                         if (v == "robust") c.penalty_mode = DelayPenaltyMode::robust;
                         else if (v == "realized") c.penalty_mode = DelayPenaltyMode::realized;
                         else throw ConfigError(line, "penalty_delay must be robust or realized");
                     },
                     [](const ExperimentConfig& c) {
                         return c.penalty_mode == DelayPenaltyMode::robust ? "robust" : "realized";
                     }});

        // [train]
        add_int("train", "episodes", [](ExperimentConfig& c) -> int& { return c.train.episodes; }, 1, 100000000);
        add_int("train", "ppo_epochs", [](ExperimentConfig& c) -> int& { return c.train.ppo_epochs; }, 1, 100000);
        add_int("train", "minibatch", [](ExperimentConfig& c) -> int& { return c.train.minibatch; }, 0, 100000000);
        add_double("train", "discount", [](ExperimentConfig& c) -> double& { return c.train.discount; }, 1e-9, 1.0);
        add_double("train", "gae_lambda", [](ExperimentConfig& c) -> double& { return c.train.gae_lambda; }, 0.0, 1.0);
        add_double("train", "clip", [](ExperimentConfig& c) -> double& { return c.train.clip; }, 1e-9, 1e9);
        add_double("train", "entropy_coef", [](ExperimentConfig& c) -> double& { return c.train.entropy_coef; }, 0.0, 1e9);
        add_double("train", "learning_rate", [](ExperimentConfig& c) -> double& { return c.train.learning_rate; }, 1e-12, 1.0);
        t.push_back({"train", "hidden",
                     [](ExperimentConfig& c, const std::string& v, int line) {
                         std::vector<int> h;
                         for (const auto& s : split_list(v)) {
                             const long long d = parse_int(s, line);
                             if (d < 1 || d > 100000) throw ConfigError(line, "hidden size out of range");
                             h.push_back(static_cast<int>(d));
                         }
                         if (h.empty()) throw ConfigError(line, "hidden must list at least one layer size");
                         c.train.hidden = std::move(h);
                     },
                     [](const ExperimentConfig& c) {
                         std::string s;
                         for (std::size_t i = 0; i < c.train.hidden.size(); ++i)
                             s += (i ? "," : "") + std::to_string(c.train.hidden[i]);
                         return s;
                     }});

        // [experiment]
        t.push_back({"experiment", "sweep",
                     [](ExperimentConfig& c, const std::string& v, int line) {
                         if (v == "none") c.sweep = SweepAxis::none;
                         else if (v == "num_ues") c.sweep = SweepAxis::num_ues;
                         else if (v == "num_uavs") c.sweep = SweepAxis::num_uavs;
                         else if (v == "omega") c.sweep = SweepAxis::omega;
                         else if (v == "eps_c") c.sweep = SweepAxis::eps_c;
                         else if (v == "eps_h") c.sweep = SweepAxis::eps_h;
                         else if (v == "task_size") c.sweep = SweepAxis::task_size;
                         else throw ConfigError(line, "unknown sweep axis '" + v + "'");
                     },
                     [](const ExperimentConfig& c) {
                         switch (c.sweep) {
                             case SweepAxis::none: return "none";
                             case SweepAxis::num_ues: return "num_ues";
                             case SweepAxis::num_uavs: return "num_uavs";
                             case SweepAxis::omega: return "omega";
                             case SweepAxis::eps_c: return "eps_c";
                             case SweepAxis::eps_h: return "eps_h";
                             case SweepAxis::task_size: return "task_size";
                         }
                         return "none";
                     }});
        t.push_back({"experiment", "sweep_values",
                     [](ExperimentConfig& c, const std::string& v, int line) {
                         c.sweep_values.clear();
                         for (const auto& s : split_list(v)) c.sweep_values.push_back(parse_double(s, line));
                     },
                     [](const ExperimentConfig& c) {
                         std::string s;
                         for (std::size_t i = 0; i < c.sweep_values.size(); ++i)
                             s += (i ? "," : "") + format_double(c.sweep_values[i]);
                         return s;
                     }});
        t.push_back({"experiment", "seeds",
                     [](ExperimentConfig& c, const std::string& v, int line) {
                         c.seeds.clear();
                         for (const auto& s : split_list(v)) {
                             const long long d = parse_int(s, line);
                             if (d < 0) throw ConfigError(line, "seeds must be non-negative");
                             c.seeds.push_back(static_cast<std::uint64_t>(d));
                         }
                         if (c.seeds.empty()) throw ConfigError(line, "seeds must list at least one seed");
                     },
                     [](const ExperimentConfig& c) {
                         std::string s;
                         for (std::size_t i = 0; i < c.seeds.size(); ++i)
                             s += (i ? "," : "") + std::to_string(c.seeds[i]);
                         return s;
                     }});
        t.push_back({"experiment", "policy",
                     [](ExperimentConfig& c, const std::string& v, int line) {
                         if (v == "beta") c.policy = PolicyChoice::beta;
                         else if (v == "gaussian") c.policy = PolicyChoice::gaussian;
                         else if (v == "greedy") c.policy = PolicyChoice::greedy;
                         else throw ConfigError(line, "policy must be beta, gaussian or greedy");
                     },
                     [](const ExperimentConfig& c) {
                         switch (c.policy) {
                             case PolicyChoice::beta: return "beta";
                             case PolicyChoice::gaussian: return "gaussian";
                             case PolicyChoice::greedy: return "greedy";
                         }
                         return "beta";
                     }});
        add_int("experiment", "eval_episodes", [](ExperimentConfig& c) -> int& { return c.eval_episodes; }, 1, 1000000);
        t.push_back({"experiment", "out_dir",
                     [](ExperimentConfig& c, const std::string& v, int) { c.out_dir = v; },
                     [](const ExperimentConfig& c) { return c.out_dir; }});
        return t;
    }();
    return keys;
}

} // namespace detail

// Parse the key-value document: `[section]` headers, `key = value` lines,
// `#` comments. Unknown sections/keys and malformed or out-of-range values
// are rejected with the offending line number. An empty document yields the
// defaults.
inline ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream ss(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(ss, raw)) {
        ++line_no;
        std::string line = raw;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(line_no, "unterminated section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            bool known = false;
            for (const auto& k : detail::config_keys())
                if (section == k.section) { known = true; break; }
            if (!known) throw ConfigError(line_no, "unknown section '" + section + "'");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(line_no, "expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (section.empty()) throw ConfigError(line_no, "key '" + key + "' outside any section");
        bool found = false;
        for (const auto& k : detail::config_keys()) {
            if (section == k.section && key == k.key) {
                k.set(cfg, value, line_no);
                found = true;
                break;
            }
        }
        if (!found) throw ConfigError(line_no, "unknown key '" + key + "' in section [" + section + "]");
    }
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(0, e.what());
    }
    return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

// Canonical form: every key in table order. parse(serialize(c)) == c.
inline std::string serialize_config(const ExperimentConfig& cfg) {
    std::string out;
    std::string section;
    for (const auto& k : detail::config_keys()) {
        if (section != k.section) {
            if (!out.empty()) out += "\n";
            section = k.section;
            out += "[" + section + "]\n";
        }
        out += std::string(k.key) + " = " + k.get(cfg) + "\n";
    }
    return out;
}

inline const char* sweep_axis_name(SweepAxis a) {
    switch (a) {
        case SweepAxis::none: return "none";
        case SweepAxis::num_ues: return "num_ues";
        case SweepAxis::num_uavs: return "num_uavs";
        case SweepAxis::omega: return "omega";
        case SweepAxis::eps_c: return "eps_c";
        case SweepAxis::eps_h: return "eps_h";
        case SweepAxis::task_size: return "task_size";
    }
    return "none";
}

// One sweep point: the axis value substituted into a copy of the base
// config. task_size interprets the value as the mean task size in bits,
// keeping the configured interval half-width.
inline ExperimentConfig apply_sweep(const ExperimentConfig& base, SweepAxis axis, double value) {
    ExperimentConfig c = base;
    switch (axis) {
        case SweepAxis::none: break;
        case SweepAxis::num_ues: c.world.num_ues = static_cast<int>(value); break;
        case SweepAxis::num_uavs: c.world.num_uavs = static_cast<int>(value); break;
        case SweepAxis::omega: c.world.omega = value; break;
        case SweepAxis::eps_c: c.uncertainty.complexity_radius = value; break;
        case SweepAxis::eps_h: c.uncertainty.csi_radius = value; break;
        case SweepAxis::task_size: {
            const double half = 0.5 * (base.world.task_bits_max - base.world.task_bits_min);
            c.world.task_bits_min = value - half;
            c.world.task_bits_max = value + half;
            break;
        }
    }
    return c;
}

} // namespace mecsim
