#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "posuite/ppo.hpp"
#include "support/gradcheck.hpp"

using namespace posuite;

namespace {

std::vector<double> random_vec(int n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

// weighted mixture over all n-step returns, evaluated term by term
double lambda_return_bruteforce(const std::vector<double>& r, const std::vector<double>& v, int t,
                                double gamma, double lambda) {
    int T = static_cast<int>(r.size());
    auto nstep = [&](int n) {
        double acc = 0.0, g = 1.0;
        for (int i = 0; i < n; ++i) {
            acc += g * r[t + i];
            g *= gamma;
        }
        return acc + g * v[t + n];
    };
    double acc = 0.0, w = 1.0;
    for (int n = 1; n < T - t; ++n) {
        acc += (1.0 - lambda) * w * nstep(n);
        w *= lambda;
    }
    return acc + w * nstep(T - t);
}

}  // namespace

TEST_CASE("lambda=0 collapses to the one-step return") {
    std::mt19937_64 rng(1);
    auto r = random_vec(6, rng);
    auto v = random_vec(7, rng);
    auto ret = lambda_returns(r, v, 0.9, 0.0);
    for (int t = 0; t < 6; ++t) CHECK(ret[t] == doctest::Approx(r[t] + 0.9 * v[t + 1]).epsilon(1e-14));
}

TEST_CASE("lambda=1 collapses to the full-horizon return") {
    std::mt19937_64 rng(2);
    auto r = random_vec(6, rng);
    auto v = random_vec(7, rng);
    auto ret = lambda_returns(r, v, 0.9, 1.0);
    auto mc = mc_returns(r, 0.9, v[6]);
    for (int t = 0; t < 6; ++t) CHECK(ret[t] == doctest::Approx(mc[t]).epsilon(1e-13));
}

TEST_CASE("lambda returns match a brute-force mixture over all n-step returns") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        int T = 1 + int(rng() % 8);
        auto r = random_vec(T, rng);
        auto v = random_vec(T + 1, rng);
        auto ret = lambda_returns(r, v, 0.9, 0.7);
        for (int t = 0; t < T; ++t)
            CHECK(std::abs(ret[t] - lambda_return_bruteforce(r, v, t, 0.9, 0.7)) < 1e-12);
    }
}

TEST_CASE("lambda returns satisfy the telescoping delta-sum identity") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        int T = 2 + int(rng() % 7);
        auto r = random_vec(T, rng);
        auto v = random_vec(T + 1, rng);
        double gamma = 0.95, lambda = 0.8;
        auto ret = lambda_returns(r, v, gamma, lambda);
        for (int t = 0; t < T; ++t) {
            double adv = 0.0, w = 1.0;
            for (int l = 0; t + l < T; ++l) {
                double delta = r[t + l] + gamma * v[t + l + 1] - v[t + l];
                adv += w * delta;
                w *= gamma * lambda;
            }
            CHECK(std::abs((ret[t] - v[t]) - adv) < 1e-10);
        }
    }
}

TEST_CASE("nstep(1) advantages are the one-step TD errors") {
    std::mt19937_64 rng(5);
    auto r = random_vec(5, rng);
    auto v = random_vec(6, rng);
    auto ret = nstep_returns(r, v, 0.9, 1);
    for (int t = 0; t < 5; ++t)
        CHECK(ret[t] - v[t] == doctest::Approx(r[t] + 0.9 * v[t + 1] - v[t]).epsilon(1e-14));
}

TEST_CASE("nstep windows truncate at the segment end") {
    auto r = std::vector<double>{1.0, 2.0, 3.0};
    auto v = std::vector<double>{10.0, 20.0, 30.0, 40.0};
    auto ret = nstep_returns(r, v, 0.5, 5);
    // every window runs to the end and bootstraps with v[3]
    CHECK(ret[2] == doctest::Approx(3.0 + 0.5 * 40.0));
    CHECK(ret[1] == doctest::Approx(2.0 + 0.5 * 3.0 + 0.25 * 40.0));
    CHECK(ret[0] == doctest::Approx(1.0 + 0.5 * 2.0 + 0.25 * 3.0 + 0.125 * 40.0));
}

TEST_CASE("mc return hand sum") {
    auto ret = mc_returns({1.0, 1.0}, 0.5, 2.0);
    CHECK(ret[0] == 2.0);
    CHECK(ret[1] == 2.0);
}

TEST_CASE("clipped surrogate closed forms") {
    // ratio = 1 everywhere reduces to mean advantage
    std::vector<double> lp{0.3, -0.7, 1.1};
    std::vector<double> adv{2.0, -1.0, 0.5};
    CHECK(ppo_policy_objective(lp, lp, adv, 0.2) == doctest::Approx(0.5).epsilon(1e-14));

    std::vector<double> oldlp{0.0};
    std::vector<double> newlp{std::log(2.0)};
    CHECK(ppo_policy_objective(oldlp, newlp, {1.0}, 0.2) == doctest::Approx(1.2).epsilon(1e-12));
    CHECK(ppo_policy_objective(oldlp, newlp, {-1.0}, 0.2) == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("rollout segments keep returns and targets apart") {
    PpoConfig cfg;
    cfg.return_mode = PpoReturnMode::Lambda;
    cfg.lambda = 0.9;
    cfg.gamma = 0.99;
    RolloutBuffer buf(1, 1, 6);
    // two 3-step segments: the first terminal, the second truncated with V=2
    for (int t = 0; t < 3; ++t) buf.add({double(t)}, {0.0}, 1.0, 0.5, -1.0);
    buf.finish_path(0.0);
    for (int t = 0; t < 3; ++t) buf.add({double(t)}, {0.0}, 1.0, 0.5, -1.0);
    buf.finish_path(2.0);
    buf.compute_returns(cfg);

    std::vector<double> r{1.0, 1.0, 1.0};
    std::vector<double> v{0.5, 0.5, 0.5, 0.0};
    auto expect_a = lambda_returns(r, v, 0.99, 0.9);
    v[3] = 2.0;
    auto expect_b = lambda_returns(r, v, 0.99, 0.9);
    for (int t = 0; t < 3; ++t) {
        CHECK(buf.ret[t] == doctest::Approx(expect_a[t]).epsilon(1e-13));
        CHECK(buf.ret[3 + t] == doctest::Approx(expect_b[t]).epsilon(1e-13));
        // value targets are plain discounted sums
        CHECK(buf.val_target[t] == doctest::Approx(mc_returns(r, 0.99, 0.0)[t]).epsilon(1e-13));
        CHECK(buf.val_target[3 + t] == doctest::Approx(mc_returns(r, 0.99, 2.0)[t]).epsilon(1e-13));
    }
    // advantages are normalized to zero mean, unit spread
    double mean = 0.0;
    for (double a : buf.adv) mean += a;
    CHECK(std::abs(mean / 6.0) < 1e-12);
    double var = 0.0;
    for (double a : buf.adv) var += (a - mean / 6.0) * (a - mean / 6.0);
    CHECK(std::sqrt(var / 6.0) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("value equal to the return gives zero advantage pre-normalization") {
    PpoConfig cfg;
    cfg.return_mode = PpoReturnMode::NStep;
    cfg.n = 1;
    cfg.gamma = 0.0;  // return = reward, so store value = reward
    RolloutBuffer buf(1, 1, 4);
    for (int t = 0; t < 4; ++t) buf.add({0.0}, {0.0}, 3.0, 3.0, -1.0);
    buf.finish_path(0.0);
    buf.compute_returns(cfg);
    for (double a : buf.adv) CHECK(a == 0.0);  // constant zero stays raw
}

TEST_CASE("rollout guards") {
    RolloutBuffer buf(1, 1, 2);
    buf.add({0.0}, {0.0}, 0.0, 0.0, 0.0);
    buf.add({0.0}, {0.0}, 0.0, 0.0, 0.0);
    CHECK_THROWS_AS(buf.add({0.0}, {0.0}, 0.0, 0.0, 0.0), std::logic_error);
    PpoConfig cfg;
    CHECK_THROWS_AS(buf.compute_returns(cfg), std::logic_error);  // open segment
    buf.finish_path(0.0);
    buf.compute_returns(cfg);
    CHECK(buf.full());
    buf.clear();
    CHECK(buf.size() == 0);
}

TEST_CASE("policy surrogate gradient matches finite differences") {
    PpoConfig cfg;
    cfg.hidden = {8};
    PpoAgent agent(2, 1, cfg, 6);
    std::mt19937_64 rng(7);
    const int N = 5;
    Tensor obs({N, 2}, random_vec(2 * N, rng));
    Tensor act({N, 1}, random_vec(N, rng));
    Tensor adv({N, 1}, random_vec(N, rng));
    Tensor old_logp({N, 1}, random_vec(N, rng));

    constexpr double kHalfLog2Pi = 0.9189385332046727;
    auto objective_graph = [&]() {
        auto piv = lift(agent.pi_mean);
        auto ls = ad::leaf(agent.log_std);
        auto mean_v = forward_graph(piv, ad::constant(obs));
        auto z = ad::mul_rowvec(ad::sub(ad::constant(act), mean_v), ad::exp_(ad::scale(ls, -1.0)));
        auto logp = ad::add(ad::add_const(ad::scale(ad::row_sum(ad::square(z)), -0.5), -kHalfLog2Pi),
                            ad::scale(ad::bcast_scalar(ad::sum(ls), N), -1.0));
        auto ratio = ad::exp_(ad::sub(logp, ad::constant(old_logp)));
        auto adv_c = ad::constant(adv);
        auto surr = ad::minimum(ad::mul(ratio, adv_c),
                                ad::mul(ad::clamp(ratio, 0.8, 1.2), adv_c));
        return std::pair{std::pair{piv, ls}, ad::mean(surr)};
    };
    auto [vars, obj] = objective_graph();
    ad::backward(obj);
    auto params = agent.pi_mean.params();
    params.push_back(&agent.log_std);
    auto grads = vars.first.grads();
    grads.push_back(vars.second.has_grad() ? vars.second.grad() : Tensor::zeros_like(agent.log_std));
    auto loss_of = [&]() { return objective_graph().second.value().data[0]; };
    auto res = testsupport::check_grads(params, grads, loss_of, rng, 6);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("target_kl of zero stops after exactly one policy step") {
    PpoConfig cfg;
    cfg.hidden = {8};
    cfg.target_kl = 0.0;
    cfg.train_v_iters = 1;
    PpoAgent agent(1, 1, cfg, 8);
    RolloutBuffer buf(1, 1, 16);
    std::mt19937_64 rng(9);
    for (int t = 0; t < 16; ++t) {
        std::vector<double> o{double(t) / 16.0};
        auto s = agent.sample_action(o, rng);
        buf.add(o, s.action, o[0] * s.action[0], s.value, s.logp);
    }
    buf.finish_path(0.0);
    auto stats = agent.update(buf);
    CHECK(stats.pi_iters == 1);
    CHECK(std::isfinite(stats.kl));
    CHECK(std::isfinite(stats.entropy));
    CHECK(stats.clip_frac >= 0.0);
    CHECK(stats.clip_frac <= 1.0);
}

TEST_CASE("all-zero advantages leave the policy untouched") {
    PpoConfig cfg;
    cfg.hidden = {8};
    cfg.train_pi_iters = 10;
    cfg.train_v_iters = 0;
    PpoAgent agent(1, 1, cfg, 10);
    Mlp before = agent.pi_mean;
    Tensor ls_before = agent.log_std;

    RolloutBuffer buf(1, 1, 8);
    std::mt19937_64 rng(11);
    for (int t = 0; t < 8; ++t) {
        std::vector<double> o{double(t)};
        auto s = agent.sample_action(o, rng);
        // identical reward everywhere and value = return makes adv constant
        buf.add(o, s.action, 0.0, 0.0, s.logp);
    }
    buf.finish_path(0.0);
    agent.update(buf);
    for (size_t i = 0; i < agent.pi_mean.params().size(); ++i)
        CHECK(agent.pi_mean.params()[i]->data == before.params()[i]->data);
    CHECK(agent.log_std.data == ls_before.data);
}

TEST_CASE("value regression drives the loss down and fits a perfect target") {
    PpoConfig cfg;
    cfg.hidden = {8};
    cfg.train_pi_iters = 0;
    cfg.train_v_iters = 50;
    PpoAgent agent(1, 1, cfg, 12);

    // value already perfect: gamma=0, reward equals the stored value target
    RolloutBuffer buf(1, 1, 4);
    PpoConfig vcfg = cfg;
    vcfg.gamma = 0.0;
    std::mt19937_64 rng(13);
    for (int t = 0; t < 4; ++t) {
        std::vector<double> o{double(t) / 4.0};
        buf.add(o, {0.0}, agent.value(o), 0.0, 0.0);
    }
    buf.finish_path(0.0);
    PpoAgent fitter(1, 1, vcfg, 12);  // same init seed: identical nets
    auto stats = fitter.update(buf);
    CHECK(stats.v_loss < 1e-20);
}

TEST_CASE("ppo save/load round trip") {
    PpoConfig cfg;
    cfg.hidden = {8};
    PpoAgent agent(2, 2, cfg, 14);
    std::stringstream ss;
    agent.save(ss);
    PpoAgent other(2, 2, cfg, 999);
    other.load(ss);
    CHECK(other.mean_action({0.3, -0.3}) == agent.mean_action({0.3, -0.3}));
    CHECK(other.value({0.3, -0.3}) == agent.value({0.3, -0.3}));
    CHECK(other.log_std.data == agent.log_std.data);
}
