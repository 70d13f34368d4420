#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>

#include "posuite/nn.hpp"

namespace posuite {

enum class PpoReturnMode { Lambda, NStep };

struct PpoConfig {
    PpoReturnMode return_mode = PpoReturnMode::Lambda;
    int n = 1;  // for NStep mode
    double lambda = 0.97;
    double gamma = 0.99;
    double clip_eps = 0.2;
    double pi_lr = 3e-4;
    double v_lr = 1e-3;
    int steps_per_epoch = 4000;
    int train_pi_iters = 80;
    int train_v_iters = 80;
    double target_kl = 0.01;
    std::vector<int> hidden = {64, 64};

    void validate() const;
};

// Finite-horizon lambda-return per segment. `values` has length T+1 where
// values[T] is the bootstrap value (0 at a true terminal).
std::vector<double> lambda_returns(const std::vector<double>& rewards,
                                   const std::vector<double>& values, double gamma, double lambda);

// Fixed n-step returns, windows truncated at the segment end.
std::vector<double> nstep_returns(const std::vector<double>& rewards,
                                  const std::vector<double>& values, double gamma, int n);

// Discounted reward sum bootstrapped with `bootstrap` past the segment end.
std::vector<double> mc_returns(const std::vector<double>& rewards, double gamma, double bootstrap);

// Clipped-surrogate objective value (the quantity PPO ascends).
double ppo_policy_objective(const std::vector<double>& old_logp, const std::vector<double>& new_logp,
                            const std::vector<double>& advantages, double epsilon);

// On-policy storage for one epoch, segmented at episode boundaries.
class RolloutBuffer {
public:
    RolloutBuffer(int obs_dim, int act_dim, int capacity);

    void add(const std::vector<double>& obs, const std::vector<double>& act, double reward,
             double value, double logp);
    // Seals the currently open segment; bootstrap = 0 at a true terminal,
    // V(o_end) at truncation or an epoch cut.
    void finish_path(double bootstrap);

    bool full() const { return count_ == capacity_; }
    int size() const { return count_; }
    void clear();

    int obs_dim, act_dim, capacity_;
    std::vector<double> obs, act, rew, val, logp;
    std::vector<double> ret, val_target, adv;  // filled by compute_returns
    std::vector<std::pair<int, int>> segments;  // [start, end)
    std::vector<double> seg_bootstrap;

    void compute_returns(const PpoConfig& cfg);  // ret, val_target, normalized adv

private:
    int count_ = 0;
    int seg_start_ = 0;
};

struct PpoEpochStats {
    double pi_loss = 0.0;
    double v_loss = 0.0;
    double kl = 0.0;
    double entropy = 0.0;
    double clip_frac = 0.0;
    int pi_iters = 0;
};

// Gaussian policy (state-independent log-std) + value net.
class PpoAgent {
public:
    PpoAgent(int obs_dim, int act_dim, PpoConfig cfg, std::uint64_t init_seed);

    const PpoConfig& config() const { return cfg_; }

    struct ActionSample {
        std::vector<double> action;
        double logp;
        double value;
    };
    ActionSample sample_action(const std::vector<double>& obs, std::mt19937_64& rng) const;
    std::vector<double> mean_action(const std::vector<double>& obs) const;
    double value(const std::vector<double>& obs) const;

    PpoEpochStats update(RolloutBuffer& rollout);

    void save(std::ostream& os) const;
    void load(std::istream& is);

    Mlp pi_mean, v_net;
    Tensor log_std;  // [act_dim]

private:
    PpoConfig cfg_;
    int obs_dim_, act_dim_;
    Adam pi_opt_, v_opt_;
};

}  // namespace posuite
