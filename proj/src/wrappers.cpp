#include "posuite/wrappers.hpp"

#include <algorithm>
#include <iostream>
#include <stdexcept>

namespace posuite {

PomdpMode pomdp_mode_from_string(const std::string& s) {
    if (s == "mdp") return PomdpMode::MDP;
    if (s == "rv") return PomdpMode::RV;
    if (s == "flk") return PomdpMode::FLK;
    if (s == "rn") return PomdpMode::RN;
    if (s == "rsm") return PomdpMode::RSM;
    throw std::invalid_argument("unknown pomdp mode: " + s);
}

std::string to_string(PomdpMode m) {
    switch (m) {
        case PomdpMode::MDP: return "mdp";
        case PomdpMode::RV: return "rv";
        case PomdpMode::FLK: return "flk";
        case PomdpMode::RN: return "rn";
        case PomdpMode::RSM: return "rsm";
    }
    return "?";
}

void WrapperConfig::validate() const {
    if (p_flk < 0.0 || p_flk > 1.0) throw std::invalid_argument("wrapper: p_flk outside [0,1]");
    if (p_rsm < 0.0 || p_rsm > 1.0) throw std::invalid_argument("wrapper: p_rsm outside [0,1]");
    if (sigma_rn < 0.0) throw std::invalid_argument("wrapper: sigma_rn negative");
}

std::vector<double> wrap_observation(const std::vector<double>& obs, const WrapperConfig& cfg,
                                     const std::vector<int>& velocity_mask, std::mt19937_64& rng) {
    switch (cfg.mode) {
        case PomdpMode::MDP:
            return obs;
        case PomdpMode::RV: {
            std::vector<double> out;
            out.reserve(obs.size());
            for (int i = 0; i < static_cast<int>(obs.size()); ++i)
                if (std::find(velocity_mask.begin(), velocity_mask.end(), i) == velocity_mask.end())
                    out.push_back(obs[i]);
            return out;
        }
        case PomdpMode::FLK: {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            if (u(rng) < cfg.p_flk) return std::vector<double>(obs.size(), 0.0);
            return obs;
        }
        case PomdpMode::RN: {
            std::normal_distribution<double> noise(0.0, 1.0);
            std::vector<double> out(obs.size());
            // draw even for sigma=0 so the stream position is mode-stable
            for (size_t i = 0; i < obs.size(); ++i) out[i] = obs[i] + cfg.sigma_rn * noise(rng);
            return out;
        }
        case PomdpMode::RSM: {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            std::vector<double> out(obs.size());
            for (size_t i = 0; i < obs.size(); ++i) out[i] = u(rng) < cfg.p_rsm ? 0.0 : obs[i];
            return out;
        }
    }
    throw std::logic_error("wrap_observation: bad mode");
}

int wrapped_obs_dim(const EnvSpec& spec, const WrapperConfig& cfg) {
    cfg.validate();
    if (cfg.mode == PomdpMode::RV)
        return spec.obs_dim - static_cast<int>(spec.velocity_indices.size());
    return spec.obs_dim;
}

WrappedEnv::WrappedEnv(std::unique_ptr<Env> env, WrapperConfig cfg, std::uint64_t wrapper_seed)
    : env_(std::move(env)), cfg_(cfg), rng_(wrapper_seed) {
    cfg_.validate();
    if (cfg_.mode == PomdpMode::RV && env_->spec().velocity_indices.empty()) {
        std::cerr << "warning: rv wrapper on env '" << env_->spec().name
                  << "' with empty velocity mask, degenerates to mdp\n";
        cfg_.mode = PomdpMode::MDP;
    }
}

std::vector<double> WrappedEnv::reset(std::uint64_t env_seed) {
    return wrap_observation(env_->reset(env_seed), cfg_, env_->spec().velocity_indices, rng_);
}

StepResult WrappedEnv::step(const std::vector<double>& action) {
    StepResult r = env_->step(action);
    r.obs = wrap_observation(r.obs, cfg_, env_->spec().velocity_indices, rng_);
    return r;
}

}  // namespace posuite
