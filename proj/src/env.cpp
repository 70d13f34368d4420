#include "posuite/env.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace posuite {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double wrap_angle(double theta) {
    double t = std::fmod(theta + kPi, 2.0 * kPi);
    if (t < 0) t += 2.0 * kPi;
    return t - kPi;
}

std::string EnvSpec::to_json() const {
    std::ostringstream os;
    os << "{\"name\":\"" << name << "\",\"obs_dim\":" << obs_dim << ",\"act_dim\":" << act_dim
       << ",\"act_low\":" << act_low << ",\"act_high\":" << act_high << ",\"velocity_indices\":[";
    for (size_t i = 0; i < velocity_indices.size(); ++i) {
        if (i) os << ",";
        os << velocity_indices[i];
    }
    os << "],\"max_steps\":" << max_steps << "}";
    return os.str();
}

void Env::check_can_step() const {
    if (done_) throw std::logic_error("env: step() called on a finished or unreset episode");
}

std::vector<double> Env::clip_action(const std::vector<double>& a) const {
    if (static_cast<int>(a.size()) != spec().act_dim)
        throw std::invalid_argument("env: action dim mismatch");
    std::vector<double> c(a.size());
    for (size_t i = 0; i < a.size(); ++i) c[i] = std::clamp(a[i], spec().act_low, spec().act_high);
    return c;
}

// --- pendulum ---

PendulumEnv::PendulumEnv() {
    spec_ = {"pendulum", 3, 1, -1.0, 1.0, {2}, 200};
}

std::vector<double> PendulumEnv::observe() const {
    return {std::cos(theta_), std::sin(theta_), theta_dot_};
}

std::vector<double> PendulumEnv::reset(std::uint64_t seed) {
    rng_.seed(seed);
    std::uniform_real_distribution<double> th(-kPi, kPi), thd(-1.0, 1.0);
    theta_ = th(rng_);
    theta_dot_ = thd(rng_);
    steps_ = 0;
    done_ = false;
    return observe();
}

StepResult PendulumEnv::step(const std::vector<double>& action) {
    check_can_step();
    auto a = clip_action(action);
    const double g = 10.0, m = 1.0, l = 1.0, dt = 0.05;
    double torque = 2.0 * a[0];

    double cost = wrap_angle(theta_) * wrap_angle(theta_) + 0.1 * theta_dot_ * theta_dot_ +
                  0.001 * torque * torque;

    // semi-implicit Euler: velocity first, then position
    double acc = 3.0 * g / (2.0 * l) * std::sin(theta_) + 3.0 / (m * l * l) * torque;
    theta_dot_ = std::clamp(theta_dot_ + dt * acc, -8.0, 8.0);
    theta_ += dt * theta_dot_;

    ++steps_;
    StepResult r;
    r.obs = observe();
    r.reward = -cost;
    r.terminal = false;
    r.truncated = steps_ >= spec_.max_steps;
    done_ = r.done();
    return r;
}

// --- reacher2d ---

Reacher2dEnv::Reacher2dEnv() {
    spec_ = {"reacher2d", 6, 2, -1.0, 1.0, {2, 3}, 300};
}

std::vector<double> Reacher2dEnv::observe() const { return {px_, py_, vx_, vy_, tx_, ty_}; }

std::vector<double> Reacher2dEnv::reset(std::uint64_t seed) {
    rng_.seed(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    px_ = u(rng_);
    py_ = u(rng_);
    tx_ = u(rng_);
    ty_ = u(rng_);
    vx_ = vy_ = 0.0;
    steps_ = 0;
    done_ = false;
    return observe();
}

StepResult Reacher2dEnv::step(const std::vector<double>& action) {
    check_can_step();
    auto a = clip_action(action);
    const double dt = 0.05;
    vx_ = std::clamp(vx_ + dt * a[0], -2.0, 2.0);
    vy_ = std::clamp(vy_ + dt * a[1], -2.0, 2.0);
    px_ += dt * vx_;
    py_ += dt * vy_;

    double dist = std::hypot(px_ - tx_, py_ - ty_);
    ++steps_;
    StepResult r;
    r.obs = observe();
    r.reward = -dist - 0.01 * (a[0] * a[0] + a[1] * a[1]);
    r.terminal = dist < 0.05;
    if (r.terminal) r.reward += 10.0;
    r.truncated = !r.terminal && steps_ >= spec_.max_steps;
    done_ = r.done();
    return r;
}

// --- continuous mountain car ---

MountainCarEnv::MountainCarEnv() {
    spec_ = {"mountaincar-c", 2, 1, -1.0, 1.0, {1}, 999};
}

std::vector<double> MountainCarEnv::observe() const { return {pos_, vel_}; }

std::vector<double> MountainCarEnv::reset(std::uint64_t seed) {
    rng_.seed(seed);
    std::uniform_real_distribution<double> u(-0.6, -0.4);
    pos_ = u(rng_);
    vel_ = 0.0;
    steps_ = 0;
    done_ = false;
    return observe();
}

StepResult MountainCarEnv::step(const std::vector<double>& action) {
    check_can_step();
    auto a = clip_action(action);
    vel_ = std::clamp(vel_ + 0.0015 * a[0] - 0.0025 * std::cos(3.0 * pos_), -0.07, 0.07);
    pos_ += vel_;
    if (pos_ < -1.2) {
        pos_ = -1.2;
        vel_ = 0.0;
    }
    pos_ = std::min(pos_, 0.6);

    ++steps_;
    StepResult r;
    r.obs = observe();
    r.terminal = pos_ >= 0.45;
    r.reward = -0.1 * a[0] * a[0] + (r.terminal ? 100.0 : 0.0);
    r.truncated = !r.terminal && steps_ >= spec_.max_steps;
    done_ = r.done();
    return r;
}

std::unique_ptr<Env> make_env(const std::string& name) {
    if (name == "pendulum") return std::make_unique<PendulumEnv>();
    if (name == "reacher2d") return std::make_unique<Reacher2dEnv>();
    if (name == "mountaincar-c") return std::make_unique<MountainCarEnv>();
    throw std::invalid_argument("unknown environment: " + name);
}

std::vector<std::string> env_names() { return {"pendulum", "reacher2d", "mountaincar-c"}; }

}  // namespace posuite
