#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace posuite {

struct EnvSpec {
    std::string name;
    int obs_dim = 0;
    int act_dim = 0;
    double act_low = -1.0;   // at the agent boundary; envs rescale internally
    double act_high = 1.0;
    std::vector<int> velocity_indices;
    int max_steps = 0;

    std::string to_json() const;
};

struct StepResult {
    std::vector<double> obs;
    double reward = 0.0;
    bool terminal = false;
    bool truncated = false;
    bool done() const { return terminal || truncated; }
};

class Env {
public:
    virtual ~Env() = default;
    virtual const EnvSpec& spec() const = 0;
    virtual std::vector<double> reset(std::uint64_t seed) = 0;
    virtual StepResult step(const std::vector<double>& action) = 0;

protected:
    // shared contract checks for the concrete envs
    void check_can_step() const;
    std::vector<double> clip_action(const std::vector<double>& a) const;
    bool done_ = true;
    int steps_ = 0;
};

// Swing-up pendulum: state (theta, theta_dot), obs (cos, sin, theta_dot).
class PendulumEnv final : public Env {
public:
    PendulumEnv();
    const EnvSpec& spec() const override { return spec_; }
    std::vector<double> reset(std::uint64_t seed) override;
    StepResult step(const std::vector<double>& action) override;

private:
    EnvSpec spec_;
    double theta_ = 0.0, theta_dot_ = 0.0;
    std::mt19937_64 rng_;
    std::vector<double> observe() const;
};

// Point-mass reacher: double integrator chasing a random target,
// obs (px, py, vx, vy, tx, ty).
class Reacher2dEnv final : public Env {
public:
    Reacher2dEnv();
    const EnvSpec& spec() const override { return spec_; }
    std::vector<double> reset(std::uint64_t seed) override;
    StepResult step(const std::vector<double>& action) override;

private:
    EnvSpec spec_;
    double px_ = 0, py_ = 0, vx_ = 0, vy_ = 0, tx_ = 0, ty_ = 0;
    std::mt19937_64 rng_;
    std::vector<double> observe() const;
};

// Continuous mountain car, obs (position, velocity).
class MountainCarEnv final : public Env {
public:
    MountainCarEnv();
    const EnvSpec& spec() const override { return spec_; }
    std::vector<double> reset(std::uint64_t seed) override;
    StepResult step(const std::vector<double>& action) override;

private:
    EnvSpec spec_;
    double pos_ = 0, vel_ = 0;
    std::mt19937_64 rng_;
    std::vector<double> observe() const;
};

std::unique_ptr<Env> make_env(const std::string& name);
std::vector<std::string> env_names();

double wrap_angle(double theta);  // into [-pi, pi]

}  // namespace posuite
