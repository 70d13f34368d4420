#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "posuite/agents.hpp"
#include "posuite/ppo.hpp"
#include "posuite/wrappers.hpp"

namespace posuite {

// One experiment cell: env + wrapper + algorithm + seed.
// algo: td3 | sac | mtd3 | msac | ppo | ppon
struct RunConfig {
    std::string env_name = "pendulum";
    WrapperConfig wrapper;
    std::string algo = "td3";
    OffPolicyConfig offpolicy;
    PpoConfig ppo;
    long total_steps = 100000;
    long eval_every = 2000;
    int eval_episodes = 5;
    std::uint64_t seed = 0;
    std::string out_dir;

    bool is_offpolicy() const;
    void resolve();  // maps algo name onto offpolicy/ppo sub-configs, validates
    std::string to_json() const;
};

struct EvalRecord {
    long step = 0;
    std::vector<double> returns;
    double mean = 0.0;
};

struct RunResult {
    std::vector<EvalRecord> records;
    std::string out_dir;
};

RunResult run_training(const RunConfig& cfg);

// Deterministic evaluation on fresh env instances; undiscounted returns,
// wrapper noise stays active.
EvalRecord evaluate(const std::function<std::vector<double>(const std::vector<double>&)>& policy,
                    const std::string& env_name, const WrapperConfig& wrapper, int episodes,
                    std::uint64_t seed, long step_label);

double max_avg_return(const std::vector<EvalRecord>& records);

// Truncated (radius 4*sigma) renormalized Gaussian kernel, symmetric
// reflection at the boundaries.
std::vector<double> gaussian_smooth(const std::vector<double>& series, double sigma = 20.0);

std::string format_double(double v);  // shortest round-trip decimal, '.' separator

std::vector<EvalRecord> read_eval_csv(const std::string& path);

// Flat key-value JSON <-> RunConfig (config files and config.json echoes)
RunConfig run_config_from_json(const std::string& json_text);

inline constexpr const char* kGeneratorVersion = "po-suite-1.0";

}  // namespace posuite
