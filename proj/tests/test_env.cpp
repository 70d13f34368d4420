#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "posuite/env.hpp"

using namespace posuite;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("reset with a fixed seed is reproducible") {
    PendulumEnv a, b;
    auto oa = a.reset(42);
    auto ob = b.reset(42);
    CHECK(oa == ob);
    CHECK(a.reset(42) == oa);
}

TEST_CASE("pendulum initial observation lies on the unit circle") {
    PendulumEnv env;
    for (int s = 0; s < 1000; ++s) {
        auto obs = env.reset(s);
        CHECK(std::abs(obs[0] * obs[0] + obs[1] * obs[1] - 1.0) < 1e-12);
        CHECK(obs[2] >= -1.0);
        CHECK(obs[2] <= 1.0);
    }
}

TEST_CASE("reacher starts inside the box with zero velocity") {
    Reacher2dEnv env;
    for (int s = 0; s < 200; ++s) {
        auto obs = env.reset(s);
        for (int i : {0, 1, 4, 5}) {
            CHECK(obs[i] >= -1.0);
            CHECK(obs[i] <= 1.0);
        }
        CHECK(obs[2] == 0.0);
        CHECK(obs[3] == 0.0);
    }
}

TEST_CASE("mountain car starts in the valley at rest") {
    MountainCarEnv env;
    for (int s = 0; s < 200; ++s) {
        auto obs = env.reset(s);
        CHECK(obs[0] >= -0.6);
        CHECK(obs[0] <= -0.4);
        CHECK(obs[1] == 0.0);
    }
}

TEST_CASE("pendulum one step matches the hand-integrated Euler map") {
    PendulumEnv env;
    for (int s = 0; s < 50; ++s) {
        auto obs = env.reset(s);
        double theta = std::atan2(obs[1], obs[0]);
        double theta_dot = obs[2];
        double a = (s % 5 - 2) * 0.5;  // actions in {-1,-0.5,0,0.5,1}
        auto r = env.step({a});

        double torque = 2.0 * std::clamp(a, -1.0, 1.0);
        double expected_cost = wrap_angle(theta) * wrap_angle(theta) + 0.1 * theta_dot * theta_dot +
                               0.001 * torque * torque;
        double acc = 15.0 * std::sin(theta) + 3.0 * torque;
        double new_dot = std::clamp(theta_dot + 0.05 * acc, -8.0, 8.0);
        double new_theta = theta + 0.05 * new_dot;

        CHECK(r.reward == doctest::Approx(-expected_cost).epsilon(1e-10));
        CHECK(r.obs[0] == doctest::Approx(std::cos(new_theta)).epsilon(1e-10));
        CHECK(r.obs[1] == doctest::Approx(std::sin(new_theta)).epsilon(1e-10));
        CHECK(r.obs[2] == doctest::Approx(new_dot).epsilon(1e-10));
        CHECK(r.terminal == false);
    }
}

TEST_CASE("pendulum equilibria behave") {
    PendulumEnv env;
    // hunt for a reset close to upright rest; the map is smooth so a nearby
    // state stays nearby and the reward is close to 0
    bool found = false;
    for (int s = 0; s < 200000 && !found; ++s) {
        auto obs = env.reset(s);
        double theta = std::atan2(obs[1], obs[0]);
        if (std::abs(theta) < 0.01 && std::abs(obs[2]) < 0.01) {
            auto r = env.step({0.0});
            CHECK(std::abs(r.reward) < 5e-4);
            CHECK(std::abs(std::atan2(r.obs[1], r.obs[0])) < 0.02);
            found = true;
        }
    }
    CHECK(found);
}

TEST_CASE("pendulum truncates at 200 steps and then refuses to step") {
    PendulumEnv env;
    env.reset(0);
    StepResult r;
    for (int t = 0; t < 200; ++t) {
        r = env.step({0.0});
        if (t < 199) CHECK(r.done() == false);
    }
    CHECK(r.truncated == true);
    CHECK(r.terminal == false);
    CHECK_THROWS_AS(env.step({0.0}), std::logic_error);
}

TEST_CASE("stepping before reset is an error") {
    PendulumEnv env;
    CHECK_THROWS_AS(env.step({0.0}), std::logic_error);
    Reacher2dEnv r;
    CHECK_THROWS_AS(r.step({0.0, 0.0}), std::logic_error);
}

TEST_CASE("actions are clipped to the declared box") {
    PendulumEnv a, b;
    a.reset(3);
    b.reset(3);
    auto ra = a.step({50.0});
    auto rb = b.step({1.0});
    CHECK(ra.obs == rb.obs);
    CHECK(ra.reward == rb.reward);
}

TEST_CASE("wrong action dimension raises") {
    PendulumEnv env;
    env.reset(0);
    CHECK_THROWS_AS(env.step({0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("reacher reaching the target pays the bonus and terminates") {
    Reacher2dEnv env;
    // find a seed where start and target are close, then drive straight at it
    for (int s = 0; s < 20000; ++s) {
        auto obs = env.reset(s);
        double dx = obs[4] - obs[0], dy = obs[5] - obs[1];
        if (std::hypot(dx, dy) > 0.15) continue;
        bool terminal = false;
        double last_reward = 0.0;
        for (int t = 0; t < 300 && !terminal; ++t) {
            double ex = obs[4] - obs[0], ey = obs[5] - obs[1];
            double n = std::hypot(ex, ey);
            // proportional controller with damping
            auto r = env.step({std::clamp(8.0 * ex - 4.0 * obs[2], -1.0, 1.0),
                               std::clamp(8.0 * ey - 4.0 * obs[3], -1.0, 1.0)});
            (void)n;
            obs = r.obs;
            terminal = r.terminal;
            last_reward = r.reward;
        }
        CHECK(terminal);
        CHECK(last_reward > 9.0);  // bonus dominates the small distance cost
        return;
    }
    FAIL("no close start/target pair found");
}

TEST_CASE("mountain car left wall zeroes velocity and goal terminates") {
    // the energy-pumping policy swings into the left wall before escaping
    MountainCarEnv env;
    auto obs = env.reset(1);
    bool terminal = false, hit_wall = false;
    double final_reward = 0.0;
    for (int t = 0; t < 999 && !terminal; ++t) {
        double a = obs[1] >= 0.0 ? 1.0 : -1.0;
        auto r = env.step({a});
        obs = r.obs;
        if (obs[0] == -1.2) {
            hit_wall = true;
            CHECK(obs[1] == 0.0);
        }
        terminal = r.terminal;
        final_reward = r.reward;
    }
    CHECK(hit_wall);
    CHECK(terminal);
    CHECK(obs[0] >= 0.45);
    CHECK(final_reward > 99.0);
}

TEST_CASE("velocity index declarations match the documented layouts") {
    CHECK(make_env("pendulum")->spec().velocity_indices == std::vector<int>{2});
    CHECK(make_env("reacher2d")->spec().velocity_indices == std::vector<int>{2, 3});
    CHECK(make_env("mountaincar-c")->spec().velocity_indices == std::vector<int>{1});
}

TEST_CASE("registry rejects unknown names and lists the known ones") {
    CHECK_THROWS_AS(make_env("cartpole"), std::invalid_argument);
    auto names = env_names();
    CHECK(names.size() == 3);
    for (const auto& n : names) CHECK(make_env(n) != nullptr);
}

TEST_CASE("wrap_angle maps into [-pi, pi]") {
    CHECK(wrap_angle(0.0) == 0.0);
    // the boundary itself may land on either sign of pi
    CHECK(std::abs(wrap_angle(kPi)) == doctest::Approx(kPi));
    CHECK(std::abs(wrap_angle(3.0 * kPi)) == doctest::Approx(kPi));
    CHECK(wrap_angle(-3.5 * kPi) == doctest::Approx(0.5 * kPi));
    for (double t = -20.0; t < 20.0; t += 0.37) {
        double w = wrap_angle(t);
        CHECK(w >= -kPi);
        CHECK(w <= kPi);
        CHECK(std::abs(std::sin(w) - std::sin(t)) < 1e-12);
        CHECK(std::abs(std::cos(w) - std::cos(t)) < 1e-12);
    }
}
