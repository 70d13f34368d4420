#pragma once

#include <random>
#include <string>
#include <vector>

#include "posuite/env.hpp"

namespace posuite {

enum class PomdpMode { MDP, RV, FLK, RN, RSM };

PomdpMode pomdp_mode_from_string(const std::string& s);
std::string to_string(PomdpMode m);

struct WrapperConfig {
    PomdpMode mode = PomdpMode::MDP;
    double p_flk = 0.2;
    double sigma_rn = 0.1;
    double p_rsm = 0.1;

    void validate() const;
};

// Observation-only transform; reward/terminal/truncated always pass through.
// Uses its own rng stream, independent of the env dynamics.
std::vector<double> wrap_observation(const std::vector<double>& obs, const WrapperConfig& cfg,
                                     const std::vector<int>& velocity_mask, std::mt19937_64& rng);

int wrapped_obs_dim(const EnvSpec& spec, const WrapperConfig& cfg);

// Env + wrapper bundle with its own seeded rng stream.
class WrappedEnv {
public:
    WrappedEnv(std::unique_ptr<Env> env, WrapperConfig cfg, std::uint64_t wrapper_seed);

    const EnvSpec& inner_spec() const { return env_->spec(); }
    int obs_dim() const { return wrapped_obs_dim(env_->spec(), cfg_); }
    int act_dim() const { return env_->spec().act_dim; }
    const WrapperConfig& config() const { return cfg_; }

    std::vector<double> reset(std::uint64_t env_seed);
    StepResult step(const std::vector<double>& action);

private:
    std::unique_ptr<Env> env_;
    WrapperConfig cfg_;
    std::mt19937_64 rng_;
};

}  // namespace posuite
