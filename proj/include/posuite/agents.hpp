#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>

#include "posuite/nn.hpp"
#include "posuite/replay.hpp"

namespace posuite {

enum class OffPolicyAlgo { TD3, SAC };

struct OffPolicyConfig {
    OffPolicyAlgo algo = OffPolicyAlgo::TD3;
    int n = 1;  // n = 1 is the vanilla algorithm
    double gamma = 0.99;
    double alpha = 0.2;  // SAC entropy weight; forced to 0 for TD3
    double rho = 0.995;
    double actor_lr = 1e-3;
    double critic_lr = 1e-3;
    int batch = 100;
    int start_steps = 1000;
    int update_after = 1000;
    int update_every = 50;
    int policy_delay = 2;  // TD3 only
    double target_noise = 0.2;  // TD3 only
    double noise_clip = 0.5;    // TD3 only
    double expl_noise = 0.1;    // TD3 only
    std::vector<int> hidden = {256, 256};

    void validate();
};

// TD3 / SAC with n-step targets (MTD3(n)/MSAC(n) when n > 1).
class OffPolicyAgent {
public:
    OffPolicyAgent(int obs_dim, int act_dim, OffPolicyConfig cfg, std::uint64_t init_seed);

    const OffPolicyConfig& config() const { return cfg_; }

    std::vector<double> select_action(const std::vector<double>& obs, bool explore,
                                      std::mt19937_64& rng) const;

    std::vector<double> compute_target_q(const std::vector<NStepSample>& batch,
                                         std::mt19937_64& rng) const;
    double critic_update(const std::vector<NStepSample>& batch, const std::vector<double>& targets);
    double actor_update(const std::vector<NStepSample>& batch, std::mt19937_64& rng);
    void polyak_targets();

    struct UpdateStats {
        double q_loss = 0.0;
        double pi_objective = 0.0;
        bool actor_stepped = false;
    };
    UpdateStats update(const std::vector<NStepSample>& batch, std::mt19937_64& rng);

    long updates_done() const { return update_count_; }

    void save(std::ostream& os) const;
    void load(std::istream& is);

    // exposed for tests
    Mlp q1, q2, q1_targ, q2_targ, pi, pi_targ;

private:
    OffPolicyConfig cfg_;
    int obs_dim_, act_dim_;
    Adam q_opt_, pi_opt_;
    long update_count_ = 0;

    Tensor batch_obs(const std::vector<NStepSample>& batch) const;
    Tensor batch_next_obs(const std::vector<NStepSample>& batch) const;
};

}  // namespace posuite
