#pragma once

#include <array>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "mecsim/config.hpp"
#include "mecsim/csv.hpp"
#include "mecsim/greedy.hpp"
#include "mecsim/mappo.hpp"

namespace mecsim {

inline const std::vector<std::string> kTrainingCsvHeader = {
    "episode", "ue_reward_mean", "uav_reward_mean", "weighted_energy",
    "violation_rate", "collisions", "wall_time_s"};

inline const std::vector<std::string> kEvalCsvHeader = {
    "seed",          "episode",       "weighted_energy", "ue_energy",     "uav_energy",
    "local_energy",  "offload_energy", "edge_energy",     "flight_energy", "violation_rate",
    "collisions",    "ue_reward_mean", "uav_reward_mean"};

inline const std::vector<std::string> kSummaryCsvHeader = {
    "sweep_axis",          "sweep_value",        "policy",
    "seeds",               "weighted_energy_mean", "weighted_energy_ci95",
    "ue_energy_mean",      "ue_energy_ci95",     "uav_energy_mean",
    "uav_energy_ci95",     "violation_rate_mean", "violation_rate_ci95"};

inline const std::vector<std::string> kTrajectoryCsvHeader = {"episode", "slot", "uav", "x", "y"};

inline void write_training_csv(const std::string& path, const std::vector<EpisodeLog>& logs) {
    CsvWriter csv(path, kTrainingCsvHeader);
    for (const auto& l : logs)
        csv.row({CsvWriter::num(l.episode), CsvWriter::num(l.ue_reward_mean),
                 CsvWriter::num(l.uav_reward_mean), CsvWriter::num(l.weighted_energy),
                 CsvWriter::num(l.violation_rate), CsvWriter::num(l.collisions),
                 CsvWriter::num(l.wall_time_s)});
}

struct SeedEvalResult {
    std::uint64_t seed = 0;
    std::vector<EvalEpisodeStats> episodes;

    double mean_weighted() const { return mean_of(&EvalEpisodeStats::weighted_energy); }
    double mean_ue() const { return mean_of(&EvalEpisodeStats::ue_energy); }
    double mean_uav() const { return mean_of(&EvalEpisodeStats::uav_energy); }
    double mean_violation() const { return mean_of(&EvalEpisodeStats::violation_rate); }

    double mean_of(double EvalEpisodeStats::*field) const {
        double s = 0.0;
        for (const auto& e : episodes) s += e.*field;
        return episodes.empty() ? 0.0 : s / static_cast<double>(episodes.size());
    }
};

struct SweepPointResult {
    double sweep_value = 0.0;
    std::vector<SeedEvalResult> seeds;

    std::vector<double> seed_means(double EvalEpisodeStats::*field) const {
        std::vector<double> out;
        out.reserve(seeds.size());
        for (const auto& s : seeds) out.push_back(s.mean_of(field));
        return out;
    }
};

struct ExperimentResult {
    std::vector<SweepPointResult> points;
    std::string summary_path;
};

inline int experiment_threads() {
    if (const char* env = std::getenv("MEC_SIM_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return 1;
}

inline std::string sweep_tag(const ExperimentConfig& cfg, double value) {
    if (cfg.sweep == SweepAxis::none) return "base";
    std::string v = CsvWriter::num(value);
    for (auto& c : v)
        if (c == '.') c = 'p';
    return std::string(sweep_axis_name(cfg.sweep)) + "_" + v;
}

// Train (or instantiate greedy) and evaluate one (sweep point, seed) job;
// writes that job's training log, checkpoint and trajectory files.
inline SeedEvalResult run_job(const ExperimentConfig& point_cfg, std::uint64_t seed,
                              const std::string& tag) {
    namespace fs = std::filesystem;
    fs::create_directories(point_cfg.out_dir);
    const std::string base = point_cfg.out_dir + "/" + tag + "_seed" + std::to_string(seed);

    SeedEvalResult result;
    result.seed = seed;

    std::vector<std::array<double, 5>> traj_rows;
    TrajectorySink sink = [&traj_rows](int ep, int slot, int uav, const Vec2& q) {
        traj_rows.push_back({static_cast<double>(ep), static_cast<double>(slot),
                             static_cast<double>(uav), q.x, q.y});
    };

    if (point_cfg.policy == PolicyChoice::greedy) {
        result.episodes = evaluate_greedy(point_cfg.env_params(), seed, point_cfg.eval_episodes, sink);
    } else {
        Trainer trainer(point_cfg.env_params(), point_cfg.train_config(), seed);
        const auto logs = trainer.train();
        write_training_csv(base + "_train.csv", logs);
        std::ofstream ck(base + "_checkpoint.bin", std::ios::binary);
        if (!ck) throw std::runtime_error("cannot open checkpoint file: " + base + "_checkpoint.bin");
        trainer.save_checkpoint(ck);
        ck.close();
        result.episodes = trainer.evaluate(point_cfg.eval_episodes, sink);
    }

    CsvWriter traj(base + "_trajectory.csv", kTrajectoryCsvHeader);
    for (const auto& r : traj_rows)
        traj.row({CsvWriter::num(static_cast<int>(r[0])), CsvWriter::num(static_cast<int>(r[1])),
                  CsvWriter::num(static_cast<int>(r[2])), CsvWriter::num(r[3]), CsvWriter::num(r[4])});
    return result;
}

// Full protocol: every sweep point x seed, then the per-episode evaluation
// CSVs and the summary with 95% t-intervals over per-seed means. Jobs may
// run in parallel (MEC_SIM_THREADS); all aggregation is a deterministic
// final pass in (point, seed) order.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    cfg.validate();
    fs::create_directories(cfg.out_dir);

    std::vector<double> values = cfg.sweep == SweepAxis::none ? std::vector<double>{0.0} : cfg.sweep_values;

    struct Job {
        int point;
        int seed_idx;
        ExperimentConfig cfg;
        std::uint64_t seed;
        std::string tag;
    };
    std::vector<Job> jobs;
    for (int p = 0; p < static_cast<int>(values.size()); ++p) {
        ExperimentConfig point_cfg = cfg.sweep == SweepAxis::none
                                         ? cfg
                                         : apply_sweep(cfg, cfg.sweep, values[static_cast<std::size_t>(p)]);
        const std::string tag = sweep_tag(cfg, values[static_cast<std::size_t>(p)]);
        for (int s = 0; s < static_cast<int>(cfg.seeds.size()); ++s)
            jobs.push_back({p, s, point_cfg, cfg.seeds[static_cast<std::size_t>(s)], tag});
    }

    std::vector<SeedEvalResult> job_results(jobs.size());
    std::atomic<std::size_t> next{0};
    const int threads = std::min<int>(experiment_threads(), static_cast<int>(jobs.size()));
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            job_results[i] = run_job(jobs[i].cfg, jobs[i].seed, jobs[i].tag);
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    ExperimentResult result;
    result.points.resize(values.size());
    for (std::size_t p = 0; p < values.size(); ++p) {
        result.points[p].sweep_value = values[p];
        result.points[p].seeds.resize(cfg.seeds.size());
    }
    for (std::size_t i = 0; i < jobs.size(); ++i)
        result.points[static_cast<std::size_t>(jobs[i].point)]
            .seeds[static_cast<std::size_t>(jobs[i].seed_idx)] = std::move(job_results[i]);

    // per-episode evaluation CSV per sweep point
    for (std::size_t p = 0; p < values.size(); ++p) {
        const std::string tag = sweep_tag(cfg, values[p]);
        CsvWriter csv(cfg.out_dir + "/eval_" + tag + ".csv", kEvalCsvHeader);
        for (const auto& seed_result : result.points[p].seeds) {
            for (std::size_t e = 0; e < seed_result.episodes.size(); ++e) {
                const auto& st = seed_result.episodes[e];
                csv.row({CsvWriter::num(seed_result.seed), CsvWriter::num(static_cast<int>(e)),
                         CsvWriter::num(st.weighted_energy), CsvWriter::num(st.ue_energy),
                         CsvWriter::num(st.uav_energy), CsvWriter::num(st.local),
                         CsvWriter::num(st.offload), CsvWriter::num(st.edge), CsvWriter::num(st.flight),
                         CsvWriter::num(st.violation_rate), CsvWriter::num(st.collisions),
                         CsvWriter::num(st.ue_reward_mean), CsvWriter::num(st.uav_reward_mean)});
            }
        }
    }

    // summary across seeds
    const std::string summary_path = cfg.out_dir + "/summary.csv";
    CsvWriter summary(summary_path, kSummaryCsvHeader);
    for (std::size_t p = 0; p < values.size(); ++p) {
        const auto& pt = result.points[p];
        const auto weighted = mean_ci95(pt.seed_means(&EvalEpisodeStats::weighted_energy));
        const auto ue = mean_ci95(pt.seed_means(&EvalEpisodeStats::ue_energy));
        const auto uav = mean_ci95(pt.seed_means(&EvalEpisodeStats::uav_energy));
        const auto viol = mean_ci95(pt.seed_means(&EvalEpisodeStats::violation_rate));
        const char* pol = cfg.policy == PolicyChoice::beta      ? "beta"
                          : cfg.policy == PolicyChoice::gaussian ? "gaussian"
                                                                 : "greedy";
        summary.row({sweep_axis_name(cfg.sweep), CsvWriter::num(pt.sweep_value), pol,
                     CsvWriter::num(static_cast<int>(cfg.seeds.size())), CsvWriter::num(weighted.mean),
                     CsvWriter::num(weighted.half_width), CsvWriter::num(ue.mean),
                     CsvWriter::num(ue.half_width), CsvWriter::num(uav.mean),
                     CsvWriter::num(uav.half_width), CsvWriter::num(viol.mean),
                     CsvWriter::num(viol.half_width)});
    }
    result.summary_path = summary_path;
    return result;
}

} // namespace mecsim
