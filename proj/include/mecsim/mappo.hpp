#pragma once

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mecsim/distributions.hpp"
#include "mecsim/env.hpp"
#include "mecsim/nn.hpp"

namespace mecsim {

enum class PolicyKind { beta, gaussian };

// Stochastic policy head over a DenseNet trunk. Beta: the net emits 2A
// values mapped to shape parameters 1 + softplus(.), which keeps every
// marginal unimodal on (0,1). Gaussian: the net emits A means squashed into
// (0,1) by tanh; the log-stds are state-independent extra parameters and
// samples are clipped into [0,1] afterwards, boundary mass included.
class PolicyNet {
public:
    struct Dist {
        PolicyKind kind = PolicyKind::beta;
        std::vector<double> p1;  // beta: tau,  gaussian: mean
        std::vector<double> p2;  // beta: zeta, gaussian: sigma
    };

    PolicyNet() = default;

    PolicyNet(int obs_dim, const std::vector<int>& hidden, int action_dim, PolicyKind kind, Rng& rng)
        : kind_(kind), action_dim_(action_dim) {
        std::vector<int> sizes;
        sizes.push_back(obs_dim);
        for (int h : hidden) sizes.push_back(h);
        sizes.push_back(kind == PolicyKind::beta ? 2 * action_dim : action_dim);
        net_ = DenseNet(sizes);
        net_.init_xavier(rng);
        if (kind == PolicyKind::gaussian) log_std_.assign(static_cast<std::size_t>(action_dim), std::log(0.5));
    }

    PolicyKind kind() const { return kind_; }
    int action_dim() const { return action_dim_; }
    int obs_dim() const { return net_.input_size(); }

    Dist dist(std::span<const double> obs, DenseNet::Cache* cache = nullptr) const {
        const auto out = net_.forward(obs, cache);
        Dist d;
        d.kind = kind_;
        d.p1.resize(static_cast<std::size_t>(action_dim_));
        d.p2.resize(static_cast<std::size_t>(action_dim_));
        for (int i = 0; i < action_dim_; ++i) {
            if (kind_ == PolicyKind::beta) {
                d.p1[static_cast<std::size_t>(i)] = 1.0 + softplus(out[static_cast<std::size_t>(i)]);
                d.p2[static_cast<std::size_t>(i)] =
                    1.0 + softplus(out[static_cast<std::size_t>(action_dim_ + i)]);
            } else {
                d.p1[static_cast<std::size_t>(i)] = 0.5 * (1.0 + std::tanh(out[static_cast<std::size_t>(i)]));
                d.p2[static_cast<std::size_t>(i)] = std::exp(log_std_[static_cast<std::size_t>(i)]);
            }
        }
        return d;
    }

    std::vector<double> sample(const Dist& d, Rng& rng) const {
        std::vector<double> a(static_cast<std::size_t>(action_dim_));
        for (int i = 0; i < action_dim_; ++i) {
            if (kind_ == PolicyKind::beta)
                a[static_cast<std::size_t>(i)] =
                    beta_sample(rng, d.p1[static_cast<std::size_t>(i)], d.p2[static_cast<std::size_t>(i)]);
            else
                a[static_cast<std::size_t>(i)] = std::clamp(
                    d.p1[static_cast<std::size_t>(i)] + d.p2[static_cast<std::size_t>(i)] * rng.normal(), 0.0, 1.0);
        }
        return a;
    }

    // deterministic action for evaluation: the distribution mean
    std::vector<double> mean_action(const Dist& d) const {
        std::vector<double> a(static_cast<std::size_t>(action_dim_));
        for (int i = 0; i < action_dim_; ++i)
            a[static_cast<std::size_t>(i)] =
                kind_ == PolicyKind::beta
                    ? beta_mean(d.p1[static_cast<std::size_t>(i)], d.p2[static_cast<std::size_t>(i)])
                    : d.p1[static_cast<std::size_t>(i)];
        return a;
    }

    static double log_prob(const Dist& d, std::span<const double> action) {
        double lp = 0.0;
        for (std::size_t i = 0; i < action.size(); ++i)
            lp += d.kind == PolicyKind::beta ? beta_logpdf(action[i], d.p1[i], d.p2[i])
                                             : gaussian_logpdf(action[i], d.p1[i], d.p2[i]);
        return lp;
    }

    static double entropy(const Dist& d) {
        double h = 0.0;
        for (std::size_t i = 0; i < d.p1.size(); ++i)
            h += d.kind == PolicyKind::beta ? beta_entropy(d.p1[i], d.p2[i]) : gaussian_entropy(std::log(d.p2[i]));
        return h;
    }

    std::size_t param_count() const { return net_.param_count() + log_std_.size(); }

    void get_params(std::vector<double>& out) const {
        out.assign(net_.params().begin(), net_.params().end());
        out.insert(out.end(), log_std_.begin(), log_std_.end());
    }

    void set_params(std::span<const double> in) {
        if (in.size() != param_count()) throw std::invalid_argument("PolicyNet::set_params: size mismatch");
        std::copy(in.begin(), in.begin() + static_cast<std::ptrdiff_t>(net_.param_count()),
                  net_.params().begin());
        std::copy(in.begin() + static_cast<std::ptrdiff_t>(net_.param_count()), in.end(), log_std_.begin());
    }

    // Accumulate d(c_logp * logp + c_ent * entropy)/d(params) for one sample
    // into `grad` (full parameter layout: net then log-stds).
    void backward(const Dist& d, std::span<const double> action, const DenseNet::Cache& cache,
                  double c_logp, double c_ent, std::span<double> grad) const {
        if (grad.size() != param_count()) throw std::invalid_argument("PolicyNet::backward: grad size mismatch");
        const auto& out = cache.acts.back();
        std::vector<double> dout(out.size(), 0.0);
        for (int i = 0; i < action_dim_; ++i) {
            const std::size_t ui = static_cast<std::size_t>(i);
            if (kind_ == PolicyKind::beta) {
                const double tau = d.p1[ui], zeta = d.p2[ui];
                const auto glp = beta_logpdf_grad(action[ui], tau, zeta);
                const auto gent = beta_entropy_grad(tau, zeta);
                const double dtau = c_logp * glp.first + c_ent * gent.first;
                const double dzeta = c_logp * glp.second + c_ent * gent.second;
                dout[ui] = dtau * sigmoid(out[ui]);
                dout[static_cast<std::size_t>(action_dim_ + i)] =
                    dzeta * sigmoid(out[static_cast<std::size_t>(action_dim_ + i)]);
            } else {
                const double mu = d.p1[ui], s = d.p2[ui];
                const auto glp = gaussian_logpdf_grad(action[ui], mu, s);
                const double t = 2.0 * mu - 1.0;  // tanh(out)
                dout[ui] = c_logp * glp.first * 0.5 * (1.0 - t * t);
                grad[net_.param_count() + ui] += c_logp * glp.second + c_ent;
            }
        }
        net_.backward(cache, dout, grad.subspan(0, net_.param_count()));
    }

    const DenseNet& trunk() const { return net_; }
    DenseNet& trunk() { return net_; }
    const std::vector<double>& log_std() const { return log_std_; }
    std::vector<double>& log_std() { return log_std_; }

private:
    DenseNet net_;
    std::vector<double> log_std_;
    PolicyKind kind_ = PolicyKind::beta;
    int action_dim_ = 0;
};

// State-value critic over the global state.
class ValueNet {
public:
    ValueNet() = default;

    ValueNet(int state_dim, const std::vector<int>& hidden, Rng& rng) {
        std::vector<int> sizes;
        sizes.push_back(state_dim);
        for (int h : hidden) sizes.push_back(h);
        sizes.push_back(1);
        net_ = DenseNet(sizes);
        net_.init_xavier(rng);
    }

    double value(std::span<const double> state, DenseNet::Cache* cache = nullptr) const {
        return net_.forward(state, cache)[0];
    }

    void backward(const DenseNet::Cache& cache, double dvalue, std::span<double> grad) const {
        const double dout[1] = {dvalue};
        net_.backward(cache, dout, grad);
    }

    std::size_t param_count() const { return net_.param_count(); }
    DenseNet& trunk() { return net_; }
    const DenseNet& trunk() const { return net_; }

private:
    DenseNet net_;
};

// Generalized advantage estimation by the usual backward recursion;
// bootstrap_value is V(s_T). Returns {advantages, return targets}.
inline std::pair<std::vector<double>, std::vector<double>> gae(const std::vector<double>& rewards,
                                                               const std::vector<double>& values,
                                                               double bootstrap_value, double gamma,
                                                               double lambda) {
    if (rewards.size() != values.size()) throw std::invalid_argument("gae: length mismatch");
    const int T = static_cast<int>(rewards.size());
    std::vector<double> adv(static_cast<std::size_t>(T)), ret(static_cast<std::size_t>(T));
    double acc = 0.0;
    for (int t = T - 1; t >= 0; --t) {
        const double next_v = t + 1 < T ? values[static_cast<std::size_t>(t + 1)] : bootstrap_value;
        const double delta = rewards[static_cast<std::size_t>(t)] + gamma * next_v - values[static_cast<std::size_t>(t)];
        acc = delta + gamma * lambda * acc;
        adv[static_cast<std::size_t>(t)] = acc;
        ret[static_cast<std::size_t>(t)] = acc + values[static_cast<std::size_t>(t)];
    }
    return {adv, ret};
}

struct CriticLossResult {
    double loss = 0.0;
    std::vector<double> grad;  // d loss / d estimate, per sample
};

inline CriticLossResult critic_loss(const std::vector<double>& estimates, const std::vector<double>& targets) {
    if (estimates.size() != targets.size()) throw std::invalid_argument("critic_loss: length mismatch");
    CriticLossResult r;
    r.grad.resize(estimates.size());
    const double inv = 1.0 / static_cast<double>(estimates.size());
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        const double d = estimates[i] - targets[i];
        r.loss += 0.5 * d * d * inv;
        r.grad[i] = d * inv;
    }
    return r;
}

struct ActorLossResult {
    double objective = 0.0;      // to maximize
    std::vector<double> dlogp;   // d objective / d logp_new, per sample
    double dentropy = 0.0;       // d objective / d entropy, same for every sample
};

// Clipped surrogate plus entropy bonus. The ratio branch is chosen exactly
// as the min is evaluated, so derivatives saturate to zero when the clip is
// active.
inline ActorLossResult actor_loss(const std::vector<double>& logp_new, const std::vector<double>& logp_old,
                                  const std::vector<double>& advantages, double clip_eps,
                                  const std::vector<double>& entropies, double entropy_coef) {
    const std::size_t n = logp_new.size();
    if (logp_old.size() != n || advantages.size() != n || entropies.size() != n)
        throw std::invalid_argument("actor_loss: length mismatch");
    ActorLossResult r;
    r.dlogp.assign(n, 0.0);
    const double inv = 1.0 / static_cast<double>(n);
    r.dentropy = entropy_coef * inv;
    for (std::size_t i = 0; i < n; ++i) {
        const double lr = std::clamp(logp_new[i] - logp_old[i], -20.0, 20.0);
        const double ratio = std::exp(lr);
        const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
        const double a = advantages[i];
        const double u = ratio * a;
        const double c = clipped * a;
        if (u <= c) {
            r.objective += u * inv;
            r.dlogp[i] = ratio * a * inv;
        } else {
            r.objective += c * inv;
            r.dlogp[i] = 0.0;  // clip active
        }
        r.objective += entropy_coef * entropies[i] * inv;
    }
    return r;
}

struct TrainConfig {
    int episodes = 300;          // Mt
    int ppo_epochs = 10;         // epc
    int minibatch = 0;           // 0 = one batch per epoch
    double discount = 0.98;      // gamma
    double gae_lambda = 0.95;
    double clip = 0.2;
    double entropy_coef = 0.01;
    double learning_rate = 5e-4;
    std::vector<int> hidden = {64, 64};
    PolicyKind policy = PolicyKind::beta;
    std::string diagnostic_path;  // checkpoint dump target on divergence

    void validate() const {
        if (episodes < 1 || ppo_epochs < 1) throw std::invalid_argument("train: episodes/ppo_epochs must be >= 1");
        if (!(discount > 0.0) || discount > 1.0) throw std::invalid_argument("train: discount must be in (0, 1]");
        if (gae_lambda < 0.0 || gae_lambda > 1.0) throw std::invalid_argument("train: gae_lambda must be in [0, 1]");
        if (!(clip > 0.0)) throw std::invalid_argument("train: clip must be positive");
        if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be positive");
        if (entropy_coef < 0.0) throw std::invalid_argument("train: entropy_coef must be >= 0");
        if (minibatch < 0) throw std::invalid_argument("train: minibatch must be >= 0");
        for (int h : hidden)
            if (h < 1) throw std::invalid_argument("train: hidden sizes must be >= 1");
    }
};

struct EpisodeLog {
    int episode = 0;
    double ue_reward_mean = 0.0;   // mean emitted (normalized, clipped) UE reward
    double uav_reward_mean = 0.0;
    double weighted_energy = 0.0;  // episode total of the weighted objective
    double violation_rate = 0.0;   // realized deadline misses / (K * N)
    int collisions = 0;
    double wall_time_s = 0.0;
    // diagnostics, not part of the CSV contract
    double ue_actor_objective = 0.0, uav_actor_objective = 0.0;
    double ue_critic_loss = 0.0, uav_critic_loss = 0.0;
};

struct EvalEpisodeStats {
    double weighted_energy = 0.0;
    double ue_energy = 0.0;   // local + offload
    double uav_energy = 0.0;  // edge + flight
    double local = 0.0, offload = 0.0, edge = 0.0, flight = 0.0;
    double violation_rate = 0.0;
    int collisions = 0;
    double ue_reward_mean = 0.0, uav_reward_mean = 0.0;
};

// (episode, slot, uav, position) — consumed by the trajectory dump
using TrajectorySink = std::function<void(int, int, int, const Vec2&)>;

inline constexpr char kCheckpointMagic[8] = {'M', 'E', 'C', 'S', 'I', 'M', '0', '1'};

// Substream ids off the master seed: training env, evaluation env. The
// evaluation env is freshly derived so frozen-policy rollouts see identical
// worlds for every policy kind under one master seed (paired comparison).
inline constexpr std::uint64_t kTrainEnvStream = 20;
inline constexpr std::uint64_t kEvalEnvStream = 21;

// On-policy MAPPO trainer with one shared actor/critic pair per agent type
// (UE, UAV). Critics see the global state; actors see local observations.
class Trainer {
public:
    Trainer(EnvParams env_params, TrainConfig cfg, std::uint64_t seed)
        : cfg_(std::move(cfg)),
          env_params_(env_params),
          master_seed_(seed),
          env_(env_params, derive_seed(seed, kTrainEnvStream)),
          rng_init_(derive_seed(seed, 11)),
          rng_ue_(derive_seed(seed, 12)),
          rng_uav_(derive_seed(seed, 13)) {
        cfg_.validate();
        ue_actor_ = PolicyNet(env_.ue_obs_dim(), cfg_.hidden, env_.ue_action_dim(), cfg_.policy, rng_init_);
        uav_actor_ = PolicyNet(env_.uav_obs_dim(), cfg_.hidden, env_.uav_action_dim(), cfg_.policy, rng_init_);
        ue_critic_ = ValueNet(env_.state_dim(), cfg_.hidden, rng_init_);
        uav_critic_ = ValueNet(env_.state_dim(), cfg_.hidden, rng_init_);
        opt_ue_actor_ = AdamState(ue_actor_.param_count(), cfg_.learning_rate);
        opt_uav_actor_ = AdamState(uav_actor_.param_count(), cfg_.learning_rate);
        opt_ue_critic_ = AdamState(ue_critic_.param_count(), cfg_.learning_rate);
        opt_uav_critic_ = AdamState(uav_critic_.param_count(), cfg_.learning_rate);
    }

    Environment& env() { return env_; }
    const Environment& env() const { return env_; }
    PolicyNet& ue_actor() { return ue_actor_; }
    PolicyNet& uav_actor() { return uav_actor_; }
    ValueNet& ue_critic() { return ue_critic_; }
    ValueNet& uav_critic() { return uav_critic_; }

    std::vector<EpisodeLog> train() { return train(cfg_.episodes); }

    std::vector<EpisodeLog> train(int episodes) {
        std::vector<EpisodeLog> logs;
        logs.reserve(static_cast<std::size_t>(episodes));
        for (int ep = 0; ep < episodes; ++ep) {
            const auto t0 = std::chrono::steady_clock::now();
            EpisodeLog log = rollout(/*stochastic=*/true);
            log.episode = ep;
            update(log);
            log.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            logs.push_back(log);
        }
        return logs;
    }

    // Frozen-policy episodes with mean actions on a fresh evaluation
    // environment derived from the master seed.
    std::vector<EvalEpisodeStats> evaluate(int episodes, const TrajectorySink& traj = {}) const {
        Environment eval_env(env_params_, derive_seed(master_seed_, kEvalEnvStream));
        std::vector<EvalEpisodeStats> out;
        out.reserve(static_cast<std::size_t>(episodes));
        for (int ep = 0; ep < episodes; ++ep) out.push_back(evaluate_episode(eval_env, ep, traj));
        return out;
    }

    void save_checkpoint(std::ostream& os) const {
        os.write(kCheckpointMagic, 8);
        io::write_u32(os, 1);  // version
        io::write_u32(os, cfg_.policy == PolicyKind::beta ? 0u : 1u);
        io::write_u32(os, static_cast<std::uint32_t>(env_.num_ues()));
        io::write_u32(os, static_cast<std::uint32_t>(env_.num_uavs()));
        io::write_u32(os, static_cast<std::uint32_t>(env_.num_types()));
        write_policy(os, ue_actor_);
        write_policy(os, uav_actor_);
        write_net(os, ue_critic_.trunk());
        write_net(os, uav_critic_.trunk());
        write_normalizer(os, env_.ue_normalizer());
        write_normalizer(os, env_.uav_normalizer());
    }

    void load_checkpoint(std::istream& is) {
        char magic[8];
        is.read(magic, 8);
        if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
            throw std::runtime_error("checkpoint: bad magic (not a checkpoint file)");
        const auto version = io::read_u32(is);
        if (version != 1) throw std::runtime_error("checkpoint: unsupported version");
        const auto kind = io::read_u32(is);
        if (kind != (cfg_.policy == PolicyKind::beta ? 0u : 1u))
            throw std::runtime_error("checkpoint: policy kind mismatch");
        const auto k = io::read_u32(is), m = io::read_u32(is), z = io::read_u32(is);
        if (static_cast<int>(k) != env_.num_ues() || static_cast<int>(m) != env_.num_uavs() ||
            static_cast<int>(z) != env_.num_types())
            throw std::runtime_error("checkpoint: environment shape mismatch");
        read_policy(is, ue_actor_);
        read_policy(is, uav_actor_);
        read_into_net(is, ue_critic_.trunk());
        read_into_net(is, uav_critic_.trunk());
        read_normalizer(is, env_.ue_normalizer());
        read_normalizer(is, env_.uav_normalizer());
    }

private:
    struct TypeBatch {
        // flat sample arrays, sample = (agent, step)
        std::vector<std::vector<double>> obs, actions;
        std::vector<double> logp_old, rewards_by_sample;
        std::vector<int> step_of_sample;
        std::vector<std::vector<double>> states;  // per step
        std::vector<double> values;               // per step, from the rollout critic
        std::vector<double> advantages, returns;  // per sample
        int agents = 0, steps = 0;

        int sample_count() const { return agents * steps; }
    };

    static void write_policy(std::ostream& os, const PolicyNet& p) {
        write_net(os, p.trunk());
        io::write_u32(os, static_cast<std::uint32_t>(p.log_std().size()));
        for (double v : p.log_std()) io::write_f64(os, v);
    }

    static void read_policy(std::istream& is, PolicyNet& p) {
        read_into_net(is, p.trunk());
        const auto n = io::read_u32(is);
        if (n != p.log_std().size()) throw std::runtime_error("checkpoint: policy head size mismatch");
        for (auto& v : p.log_std()) v = io::read_f64(is);
    }

    static void read_into_net(std::istream& is, DenseNet& net) {
        DenseNet loaded = read_net(is);
        if (loaded.sizes() != net.sizes()) throw std::runtime_error("checkpoint: layer shape mismatch");
        net = std::move(loaded);
    }

    static void write_normalizer(std::ostream& os, const RewardNormalizer& n) {
        io::write_u64(os, static_cast<std::uint64_t>(n.count()));
        io::write_f64(os, n.mean());
        io::write_f64(os, n.m2());
    }

    static void read_normalizer(std::istream& is, RewardNormalizer& n) {
        const auto count = static_cast<long long>(io::read_u64(is));
        const double mean = io::read_f64(is);
        const double m2 = io::read_f64(is);
        n.restore(count, mean, m2);
    }

    EpisodeLog rollout(bool stochastic) {
        if (env_.done()) env_.reset();
        const int K = env_.num_ues(), M = env_.num_uavs(), N = env_.params().world.slots;

        ue_batch_ = TypeBatch{};
        uav_batch_ = TypeBatch{};
        ue_batch_.agents = K;
        uav_batch_.agents = M;
        ue_batch_.steps = N;
        uav_batch_.steps = N;

        EpisodeLog log;
        std::vector<std::vector<double>> ue_rewards(static_cast<std::size_t>(K));
        std::vector<std::vector<double>> uav_rewards(static_cast<std::size_t>(M));

        for (int n = 0; n < N; ++n) {
            auto ue_obs = env_.ue_observations();
            std::vector<std::vector<double>> ue_act(static_cast<std::size_t>(K));
            for (int k = 0; k < K; ++k) {
                const auto d = ue_actor_.dist(ue_obs[static_cast<std::size_t>(k)]);
                ue_act[static_cast<std::size_t>(k)] =
                    stochastic ? ue_actor_.sample(d, rng_ue_) : ue_actor_.mean_action(d);
                ue_batch_.logp_old.push_back(PolicyNet::log_prob(d, ue_act[static_cast<std::size_t>(k)]));
            }
            auto uav_obs = env_.decode_ue_phase(ue_act);
            auto state = env_.global_state();
            ue_batch_.values.push_back(ue_critic_.value(state));
            uav_batch_.values.push_back(uav_critic_.value(state));

            std::vector<std::vector<double>> uav_act(static_cast<std::size_t>(M));
            for (int m = 0; m < M; ++m) {
                const auto d = uav_actor_.dist(uav_obs[static_cast<std::size_t>(m)]);
                uav_act[static_cast<std::size_t>(m)] =
                    stochastic ? uav_actor_.sample(d, rng_uav_) : uav_actor_.mean_action(d);
                uav_batch_.logp_old.push_back(PolicyNet::log_prob(d, uav_act[static_cast<std::size_t>(m)]));
            }

            const auto sm = env_.step(uav_act);

            for (int k = 0; k < K; ++k) {
                ue_batch_.obs.push_back(std::move(ue_obs[static_cast<std::size_t>(k)]));
                ue_batch_.actions.push_back(std::move(ue_act[static_cast<std::size_t>(k)]));
                ue_batch_.step_of_sample.push_back(n);
                const double r = sm.ue_rewards[static_cast<std::size_t>(k)].value;
                ue_batch_.rewards_by_sample.push_back(r);
                ue_rewards[static_cast<std::size_t>(k)].push_back(r);
                log.ue_reward_mean += r;
            }
            for (int m = 0; m < M; ++m) {
                uav_batch_.obs.push_back(std::move(uav_obs[static_cast<std::size_t>(m)]));
                uav_batch_.actions.push_back(std::move(uav_act[static_cast<std::size_t>(m)]));
                uav_batch_.step_of_sample.push_back(n);
                const double r = sm.uav_rewards[static_cast<std::size_t>(m)].value;
                uav_batch_.rewards_by_sample.push_back(r);
                uav_rewards[static_cast<std::size_t>(m)].push_back(r);
                log.uav_reward_mean += r;
            }
            ue_batch_.states.push_back(state);
            uav_batch_.states.push_back(std::move(state));

            log.weighted_energy += sm.weighted_energy;
            log.violation_rate += sm.deadline_violations;
            log.collisions += sm.collisions;
        }

        log.ue_reward_mean /= static_cast<double>(K * N);
        log.uav_reward_mean /= static_cast<double>(M * N);
        log.violation_rate /= static_cast<double>(K * N);

        // note: samples are stored step-major (all agents of a step
        // together); advantages are computed per agent stream
        finalize_advantages(ue_batch_, ue_rewards);
        finalize_advantages(uav_batch_, uav_rewards);
        return log;
    }

    void finalize_advantages(TypeBatch& b, const std::vector<std::vector<double>>& per_agent_rewards) {
        const int A = b.agents, T = b.steps;
        b.advantages.assign(static_cast<std::size_t>(A * T), 0.0);
        b.returns.assign(static_cast<std::size_t>(A * T), 0.0);
        for (int a = 0; a < A; ++a) {
            const auto [adv, ret] = gae(per_agent_rewards[static_cast<std::size_t>(a)], b.values, 0.0,
                                        cfg_.discount, cfg_.gae_lambda);
            for (int t = 0; t < T; ++t) {
                b.advantages[static_cast<std::size_t>(t * A + a)] = adv[static_cast<std::size_t>(t)];
                b.returns[static_cast<std::size_t>(t * A + a)] = ret[static_cast<std::size_t>(t)];
            }
        }
        // batch advantage normalization
        double mean = 0.0;
        for (double v : b.advantages) mean += v;
        mean /= static_cast<double>(b.advantages.size());
        double var = 0.0;
        for (double v : b.advantages) var += (v - mean) * (v - mean);
        var /= static_cast<double>(b.advantages.size());
        const double inv = 1.0 / (std::sqrt(var) + 1e-8);
        for (auto& v : b.advantages) v = (v - mean) * inv;
    }

    void update(EpisodeLog& log) {
        for (int epoch = 0; epoch < cfg_.ppo_epochs; ++epoch) {
            log.ue_actor_objective = update_actor(ue_actor_, opt_ue_actor_, ue_batch_);
            log.ue_critic_loss = update_critic(ue_critic_, opt_ue_critic_, ue_batch_);
            log.uav_actor_objective = update_actor(uav_actor_, opt_uav_actor_, uav_batch_);
            log.uav_critic_loss = update_critic(uav_critic_, opt_uav_critic_, uav_batch_);
        }
    }

    double update_actor(PolicyNet& actor, AdamState& opt, const TypeBatch& b) {
        const int n = b.sample_count();
        const int chunk = cfg_.minibatch > 0 ? cfg_.minibatch : n;
        double objective = 0.0;
        for (int start = 0; start < n; start += chunk) {
            const int end = std::min(n, start + chunk);
            const int bs = end - start;
            std::vector<DenseNet::Cache> caches(static_cast<std::size_t>(bs));
            std::vector<PolicyNet::Dist> dists(static_cast<std::size_t>(bs));
            std::vector<double> logp_new(static_cast<std::size_t>(bs)), logp_old(static_cast<std::size_t>(bs));
            std::vector<double> adv(static_cast<std::size_t>(bs)), ent(static_cast<std::size_t>(bs));
            for (int i = 0; i < bs; ++i) {
                const std::size_t s = static_cast<std::size_t>(start + i);
                dists[static_cast<std::size_t>(i)] =
                    actor.dist(b.obs[s], &caches[static_cast<std::size_t>(i)]);
                logp_new[static_cast<std::size_t>(i)] =
                    PolicyNet::log_prob(dists[static_cast<std::size_t>(i)], b.actions[s]);
                logp_old[static_cast<std::size_t>(i)] = b.logp_old[s];
                adv[static_cast<std::size_t>(i)] = b.advantages[s];
                ent[static_cast<std::size_t>(i)] =
                    PolicyNet::entropy(dists[static_cast<std::size_t>(i)]);
            }
            const auto al = actor_loss(logp_new, logp_old, adv, cfg_.clip, ent, cfg_.entropy_coef);
            check_finite(al.objective, "actor objective");
            objective = al.objective;
            std::vector<double> grad(actor.param_count(), 0.0);
            for (int i = 0; i < bs; ++i) {
                const std::size_t s = static_cast<std::size_t>(start + i);
                // minimize -J
                actor.backward(dists[static_cast<std::size_t>(i)], b.actions[s],
                               caches[static_cast<std::size_t>(i)], -al.dlogp[static_cast<std::size_t>(i)],
                               -al.dentropy, grad);
            }
            std::vector<double> params;
            actor.get_params(params);
            if (!opt.update(params, grad)) diverged("actor gradient not finite");
            actor.set_params(params);
        }
        return objective;
    }

    double update_critic(ValueNet& critic, AdamState& opt, const TypeBatch& b) {
        const int n = b.sample_count();
        const int chunk = cfg_.minibatch > 0 ? cfg_.minibatch : n;
        double loss = 0.0;
        for (int start = 0; start < n; start += chunk) {
            const int end = std::min(n, start + chunk);
            const int bs = end - start;
            std::vector<DenseNet::Cache> caches(static_cast<std::size_t>(bs));
            std::vector<double> est(static_cast<std::size_t>(bs)), tgt(static_cast<std::size_t>(bs));
            for (int i = 0; i < bs; ++i) {
                const std::size_t s = static_cast<std::size_t>(start + i);
                est[static_cast<std::size_t>(i)] = critic.value(
                    b.states[static_cast<std::size_t>(b.step_of_sample[s])], &caches[static_cast<std::size_t>(i)]);
                tgt[static_cast<std::size_t>(i)] = b.returns[s];
            }
            const auto cl = critic_loss(est, tgt);
            check_finite(cl.loss, "critic loss");
            loss = cl.loss;
            std::vector<double> grad(critic.param_count(), 0.0);
            for (int i = 0; i < bs; ++i)
                critic.backward(caches[static_cast<std::size_t>(i)], cl.grad[static_cast<std::size_t>(i)], grad);
            std::span<double> params = critic.trunk().params();
            if (!opt.update(params, grad)) diverged("critic gradient not finite");
        }
        return loss;
    }

    void check_finite(double v, const char* what) {
        if (!std::isfinite(v)) diverged(what);
    }

    [[noreturn]] void diverged(const std::string& what) {
        if (!cfg_.diagnostic_path.empty()) {
            std::ofstream os(cfg_.diagnostic_path, std::ios::binary);
            if (os) save_checkpoint(os);
        }
        throw std::runtime_error("training diverged: " + what);
    }

    EvalEpisodeStats evaluate_episode(Environment& eval_env, int index, const TrajectorySink& traj) const {
        if (eval_env.done()) eval_env.reset();
        const int K = eval_env.num_ues(), M = eval_env.num_uavs(), N = eval_env.params().world.slots;
        EvalEpisodeStats st;
        for (int n = 0; n < N; ++n) {
            auto ue_obs = eval_env.ue_observations();
            std::vector<std::vector<double>> ue_act(static_cast<std::size_t>(K));
            for (int k = 0; k < K; ++k)
                ue_act[static_cast<std::size_t>(k)] =
                    ue_actor_.mean_action(ue_actor_.dist(ue_obs[static_cast<std::size_t>(k)]));
            auto uav_obs = eval_env.decode_ue_phase(ue_act);
            std::vector<std::vector<double>> uav_act(static_cast<std::size_t>(M));
            for (int m = 0; m < M; ++m)
                uav_act[static_cast<std::size_t>(m)] =
                    uav_actor_.mean_action(uav_actor_.dist(uav_obs[static_cast<std::size_t>(m)]));
            const auto sm = eval_env.step(uav_act);
            accumulate_eval(st, sm, K, M, N, traj, index);
        }
        return st;
    }

public:
    // Shared by the greedy runner; folds one slot's metrics into the stats.
    static void accumulate_eval(EvalEpisodeStats& st, const SlotMetrics& sm, int K, int M, int N,
                                const TrajectorySink& traj, int episode = 0) {
        st.weighted_energy += sm.weighted_energy;
        st.local += sm.energy.local;
        st.offload += sm.energy.offload;
        st.edge += sm.energy.edge;
        st.flight += sm.energy.flight;
        st.ue_energy += sm.energy.ue_side();
        st.uav_energy += sm.energy.uav_side();
        st.violation_rate += static_cast<double>(sm.deadline_violations) / static_cast<double>(K * N);
        st.collisions += sm.collisions;
        double r = 0.0;
        for (const auto& rr : sm.ue_rewards) r += rr.value;
        st.ue_reward_mean += r / static_cast<double>(K * N);
        r = 0.0;
        for (const auto& rr : sm.uav_rewards) r += rr.value;
        st.uav_reward_mean += r / static_cast<double>(M * N);
        if (traj)
            for (int m = 0; m < M; ++m) traj(episode, sm.slot, m, sm.uav_positions[static_cast<std::size_t>(m)]);
    }

private:
    TrainConfig cfg_;
    EnvParams env_params_;
    std::uint64_t master_seed_ = 0;
    Environment env_;
    Rng rng_init_, rng_ue_, rng_uav_;
    PolicyNet ue_actor_, uav_actor_;
    ValueNet ue_critic_, uav_critic_;
    AdamState opt_ue_actor_{1}, opt_uav_actor_{1}, opt_ue_critic_{1}, opt_uav_critic_{1};
    TypeBatch ue_batch_, uav_batch_;
};

} // namespace mecsim
