// Command-line front end: train / evaluate / sweep / validate-config /
// selftest over the simulator and trainer.

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mecsim/config.hpp"
#include "mecsim/experiment.hpp"
#include "mecsim/greedy.hpp"

namespace {

mecsim::ExperimentConfig load_config(const std::string& path) {
    if (path.empty()) {
        mecsim::ExperimentConfig cfg;  // all defaults
        return cfg;
    }
    return mecsim::parse_config_file(path);
}

void apply_overrides(mecsim::ExperimentConfig& cfg, long long seed, const std::string& out,
                     const std::string& policy) {
    if (seed >= 0) cfg.seeds = {static_cast<std::uint64_t>(seed)};
    if (!out.empty()) cfg.out_dir = out;
    if (!policy.empty()) {
        if (policy == "beta") cfg.policy = mecsim::PolicyChoice::beta;
        else if (policy == "gaussian") cfg.policy = mecsim::PolicyChoice::gaussian;
        else if (policy == "greedy") cfg.policy = mecsim::PolicyChoice::greedy;
        else throw std::runtime_error("unknown policy: " + policy);
    }
}

int cmd_train(const std::string& config_path, long long seed, const std::string& out,
              const std::string& policy) {
    auto cfg = load_config(config_path);
    apply_overrides(cfg, seed, out, policy);
    if (cfg.policy == mecsim::PolicyChoice::greedy)
        throw std::runtime_error("train: greedy has no parameters to train; use evaluate");
    const std::uint64_t s = cfg.seeds.front();
    std::filesystem::create_directories(cfg.out_dir);

    mecsim::Trainer trainer(cfg.env_params(), cfg.train_config(), s);
    std::cout << "training " << (cfg.policy == mecsim::PolicyChoice::beta ? "beta" : "gaussian")
              << " policy, seed " << s << ", " << cfg.train.episodes << " episodes\n";
    const auto logs = trainer.train();
    const std::string log_path = cfg.out_dir + "/training_log.csv";
    mecsim::write_training_csv(log_path, logs);
    const std::string ck_path = cfg.out_dir + "/checkpoint.bin";
    std::ofstream ck(ck_path, std::ios::binary);
    if (!ck) throw std::runtime_error("cannot open " + ck_path);
    trainer.save_checkpoint(ck);
    std::cout << "wrote " << log_path << " and " << ck_path << "\n";
    if (!logs.empty())
        std::cout << "final episode: ue_reward_mean=" << logs.back().ue_reward_mean
                  << " uav_reward_mean=" << logs.back().uav_reward_mean
                  << " weighted_energy=" << logs.back().weighted_energy << "\n";
    return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& checkpoint, long long seed,
                 const std::string& out, const std::string& policy, int episodes) {
    auto cfg = load_config(config_path);
    apply_overrides(cfg, seed, out, policy);
    if (episodes > 0) cfg.eval_episodes = episodes;
    const std::uint64_t s = cfg.seeds.front();
    std::filesystem::create_directories(cfg.out_dir);

    std::vector<mecsim::EvalEpisodeStats> stats;
    std::vector<std::array<double, 5>> traj_rows;
    mecsim::TrajectorySink sink = [&traj_rows](int ep, int slot, int uav, const mecsim::Vec2& q) {
        traj_rows.push_back({static_cast<double>(ep), static_cast<double>(slot),
                             static_cast<double>(uav), q.x, q.y});
    };

    if (cfg.policy == mecsim::PolicyChoice::greedy) {
        stats = mecsim::evaluate_greedy(cfg.env_params(), s, cfg.eval_episodes, sink);
    } else {
        if (checkpoint.empty()) throw std::runtime_error("evaluate: --checkpoint required for net policies");
        mecsim::Trainer trainer(cfg.env_params(), cfg.train_config(), s);
        std::ifstream ck(checkpoint, std::ios::binary);
        if (!ck) throw std::runtime_error("cannot open checkpoint: " + checkpoint);
        trainer.load_checkpoint(ck);
        stats = trainer.evaluate(cfg.eval_episodes, sink);
    }

    mecsim::CsvWriter csv(cfg.out_dir + "/evaluation.csv", mecsim::kEvalCsvHeader);
    for (std::size_t e = 0; e < stats.size(); ++e) {
        const auto& st = stats[e];
        csv.row({mecsim::CsvWriter::num(s), mecsim::CsvWriter::num(static_cast<int>(e)),
                 mecsim::CsvWriter::num(st.weighted_energy), mecsim::CsvWriter::num(st.ue_energy),
                 mecsim::CsvWriter::num(st.uav_energy), mecsim::CsvWriter::num(st.local),
                 mecsim::CsvWriter::num(st.offload), mecsim::CsvWriter::num(st.edge),
                 mecsim::CsvWriter::num(st.flight), mecsim::CsvWriter::num(st.violation_rate),
                 mecsim::CsvWriter::num(st.collisions), mecsim::CsvWriter::num(st.ue_reward_mean),
                 mecsim::CsvWriter::num(st.uav_reward_mean)});
    }
    mecsim::CsvWriter traj(cfg.out_dir + "/trajectory.csv", mecsim::kTrajectoryCsvHeader);
    for (const auto& r : traj_rows)
        traj.row({mecsim::CsvWriter::num(static_cast<int>(r[0])), mecsim::CsvWriter::num(static_cast<int>(r[1])),
                  mecsim::CsvWriter::num(static_cast<int>(r[2])), mecsim::CsvWriter::num(r[3]),
                  mecsim::CsvWriter::num(r[4])});

    double mean = 0.0;
    for (const auto& st : stats) mean += st.weighted_energy;
    if (!stats.empty()) mean /= static_cast<double>(stats.size());
    std::cout << "evaluated " << stats.size() << " episodes, mean weighted energy " << mean << " J\n";
    std::cout << "wrote " << cfg.out_dir << "/evaluation.csv and " << cfg.out_dir << "/trajectory.csv\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out) {
    auto cfg = load_config(config_path);
    if (!out.empty()) cfg.out_dir = out;
    const auto result = mecsim::run_experiment(cfg);
    std::cout << "sweep finished: " << result.points.size() << " point(s), summary at "
              << result.summary_path << "\n";
    return 0;
}

int cmd_validate(const std::string& config_path) {
    auto cfg = load_config(config_path);
    cfg.validate();
    std::cout << "config OK\n";
    return 0;
}

// fast oracle suites; mirrors the heavier acceptance checks
int cmd_selftest();

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-UAV MEC offloading simulator and MAPPO trainer"};
    app.require_subcommand(1);

    std::string config_path, out_dir, policy, checkpoint;
    long long seed = -1;
    int episodes = 0;

    auto add_common = [&](CLI::App* cmd, bool with_policy = true) {
        cmd->add_option("--config", config_path, "config file (defaults when omitted)");
        cmd->add_option("--seed", seed, "override the seed list with one seed");
        cmd->add_option("--out", out_dir, "output directory override");
        if (with_policy) cmd->add_option("--policy", policy, "beta | gaussian | greedy");
    };

    auto* train = app.add_subcommand("train", "train one policy and write log + checkpoint");
    add_common(train);
    auto* eval = app.add_subcommand("evaluate", "roll frozen-policy episodes from a checkpoint");
    add_common(eval);
    eval->add_option("--checkpoint", checkpoint, "checkpoint file (required for net policies)");
    eval->add_option("--episodes", episodes, "evaluation episode count override");
    auto* sweep = app.add_subcommand("sweep", "run the full experiment protocol");
    sweep->add_option("--config", config_path, "config file");
    sweep->add_option("--out", out_dir, "output directory override");
    auto* validate = app.add_subcommand("validate-config", "parse and validate a config");
    validate->add_option("--config", config_path, "config file");
    auto* selftest = app.add_subcommand("selftest", "run the built-in oracle suites");
    (void)selftest;

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(config_path, seed, out_dir, policy);
        if (eval->parsed()) return cmd_evaluate(config_path, checkpoint, seed, out_dir, policy, episodes);
        if (sweep->parsed()) return cmd_sweep(config_path, out_dir);
        if (validate->parsed()) return cmd_validate(config_path);
        if (selftest->parsed()) return cmd_selftest();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

namespace {

struct SelfTest {
    int failures = 0;

    void check(const char* name, bool ok) {
        std::printf("selftest: %-42s %s\n", name, ok ? "ok" : "FAIL");
        if (!ok) ++failures;
    }
};

int cmd_selftest() {
    using namespace mecsim;
    SelfTest t;

    // hover propulsion power against the tabulated constants
    {
        PropulsionParams pp;
        t.check("hover propulsion power", std::abs(propulsion_power(0.0, pp) - 138.10) < 1e-9);
    }

    // analytic policy gradient vs central finite differences
    {
        Rng rng(7);
        bool ok = true;
        for (PolicyKind kind : {PolicyKind::beta, PolicyKind::gaussian}) {
            PolicyNet pol(3, {8}, 2, kind, rng);
            std::vector<double> obs = {0.3, -0.2, 0.8};
            DenseNet::Cache cache;
            auto d = pol.dist(obs, &cache);
            const auto action = pol.sample(d, rng);
            std::vector<double> grad(pol.param_count(), 0.0);
            pol.backward(d, action, cache, 1.0, 0.5, grad);
            std::vector<double> params;
            pol.get_params(params);
            for (std::size_t i = 0; i < params.size(); i += 7) {
                const double h = 1e-5;
                auto eval = [&](double delta) {
                    auto p2 = params;
                    p2[i] += delta;
                    pol.set_params(p2);
                    const auto dd = pol.dist(obs);
                    const double v = PolicyNet::log_prob(dd, action) + 0.5 * PolicyNet::entropy(dd);
                    pol.set_params(params);
                    return v;
                };
                const double fd = (eval(h) - eval(-h)) / (2.0 * h);
                const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
                if (std::abs(fd - grad[i]) / denom > 1e-4) ok = false;
            }
        }
        t.check("policy gradients vs finite differences", ok);
    }

    // recursive GAE vs brute-force double sum
    {
        Rng rng(9);
        bool ok = true;
        for (int trial = 0; trial < 20; ++trial) {
            const int T = 2 + static_cast<int>(rng.uniform_int(30));
            std::vector<double> r(static_cast<std::size_t>(T)), v(static_cast<std::size_t>(T));
            for (auto& x : r) x = rng.uniform(-1.0, 1.0);
            for (auto& x : v) x = rng.uniform(-1.0, 1.0);
            const double gamma = 0.95, lambda = 0.8;
            const auto [adv, ret] = gae(r, v, 0.0, gamma, lambda);
            for (int n = 0; n < T; ++n) {
                double brute = 0.0;
                for (int l = 0; n + l < T; ++l) {
                    const double next = n + l + 1 < T ? v[static_cast<std::size_t>(n + l + 1)] : 0.0;
                    const double delta = r[static_cast<std::size_t>(n + l)] + gamma * next -
                                         v[static_cast<std::size_t>(n + l)];
                    brute += std::pow(gamma * lambda, l) * delta;
                }
                if (std::abs(brute - adv[static_cast<std::size_t>(n)]) > 1e-10) ok = false;
            }
        }
        t.check("GAE vs brute-force double sum", ok);
    }

    // Beta density integrates to 1; sampler mean matches
    {
        bool ok = true;
        for (double tau : {1.2, 2.0, 5.0})
            for (double zeta : {1.5, 3.0}) {
                const int n = 20000;
                double integral = 0.0;
                for (int i = 0; i < n; ++i) {
                    const double x = (i + 0.5) / n;
                    integral += std::exp(beta_logpdf(x, tau, zeta)) / n;
                }
                if (std::abs(integral - 1.0) > 1e-4) ok = false;
            }
        Rng rng(11);
        double mean = 0.0;
        const int draws = 20000;
        for (int i = 0; i < draws; ++i) mean += beta_sample(rng, 2.0, 5.0) / draws;
        if (std::abs(mean - 2.0 / 7.0) > 0.01) ok = false;
        t.check("Beta density normalization and sampler", ok);
    }

    // robust delay dominates sampled realizations
    {
        Rng rng(13);
        bool ok = true;
        for (int trial = 0; trial < 10; ++trial) {
            RobustDelayInput in;
            in.task_bits = 1e6;
            in.rho = rng.uniform(0.0, 1.0);
            in.c_hat = 1000.0;
            in.f_local = 1e9;
            in.f_edge = 5e9;
            in.associated = true;
            in.signal_amp = rng.uniform(0.5, 2.0);
            in.interference_amps = {rng.uniform(0.0, 0.5)};
            in.interference_powers = {0.5};
            in.tx_power = 0.5;
            in.noise_power = 3.16e-12;
            in.bandwidth = 1e7;
            UncertaintyBudget budget{0.05, 20.0};
            const auto rob = robust_delay_check(in, budget, 1.0);
            for (int s = 0; s < 100; ++s) {
                const double dc = rng.uniform(-budget.complexity_radius, budget.complexity_radius);
                const double ds = rng.uniform(-budget.csi_radius, budget.csi_radius);
                const double c = in.c_hat + dc;
                const auto [off, loc] = split_task(in.task_bits, in.rho);
                const double sig = std::max(in.signal_amp + ds, 0.0);
                double interf = 0.0;
                for (std::size_t i = 0; i < in.interference_amps.size(); ++i) {
                    const double a = in.interference_amps[i] + rng.uniform(-budget.csi_radius, budget.csi_radius);
                    interf += a * a * in.interference_powers[i];
                }
                const double rr = rate(sig * sig * in.tx_power / (interf + in.noise_power), in.bandwidth);
                const double t_off = off > 0.0 ? off / rr : 0.0;
                const double t_edge = off > 0.0 ? off * c / in.f_edge : 0.0;
                const double t_loc = loc > 0.0 ? loc * c / in.f_local : 0.0;
                if (service_delay(t_off, t_edge, t_loc) > rob.worst_delay + 1e-9) ok = false;
            }
        }
        t.check("robust delay domination", ok);
    }

    std::printf("selftest: %s\n", t.failures == 0 ? "all suites passed" : "FAILURES PRESENT");
    return t.failures == 0 ? 0 : 1;
}

} // namespace
