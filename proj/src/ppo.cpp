#include "posuite/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace posuite {

namespace {
constexpr double kHalfLog2Pi = 0.9189385332046727;
}

void PpoConfig::validate() const {
    if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("ppo: lambda outside [0,1]");
    if (clip_eps <= 0.0) throw std::invalid_argument("ppo: clip epsilon must be > 0");
    if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("ppo: gamma outside [0,1]");
    if (n < 1) throw std::invalid_argument("ppo: n must be >= 1");
    if (steps_per_epoch < 1) throw std::invalid_argument("ppo: steps_per_epoch must be >= 1");
}

std::vector<double> lambda_returns(const std::vector<double>& rewards,
                                   const std::vector<double>& values, double gamma, double lambda) {
    int T = static_cast<int>(rewards.size());
    if (static_cast<int>(values.size()) != T + 1)
        throw std::invalid_argument("lambda_returns: need T+1 values");
    std::vector<double> ret(T);
    // R_t = r_t + gamma*((1-lambda) V_{t+1} + lambda R_{t+1}), R at the end
    // bootstraps with values[T]; unrolls to the weighted n-step mixture.
    double next = values[T];
    for (int t = T - 1; t >= 0; --t) {
        next = rewards[t] + gamma * ((1.0 - lambda) * values[t + 1] + lambda * next);
        ret[t] = next;
    }
    return ret;
}

std::vector<double> nstep_returns(const std::vector<double>& rewards,
                                  const std::vector<double>& values, double gamma, int n) {
    int T = static_cast<int>(rewards.size());
    if (static_cast<int>(values.size()) != T + 1)
        throw std::invalid_argument("nstep_returns: need T+1 values");
    std::vector<double> ret(T);
    for (int t = 0; t < T; ++t) {
        int m = std::min(n, T - t);
        double acc = 0.0, g = 1.0;
        for (int i = 0; i < m; ++i) {
            acc += g * rewards[t + i];
            g *= gamma;
        }
        ret[t] = acc + g * values[t + m];
    }
    return ret;
}

std::vector<double> mc_returns(const std::vector<double>& rewards, double gamma, double bootstrap) {
    std::vector<double> ret(rewards.size());
    double acc = bootstrap;
    for (int t = static_cast<int>(rewards.size()) - 1; t >= 0; --t) {
        acc = rewards[t] + gamma * acc;
        ret[t] = acc;
    }
    return ret;
}

double ppo_policy_objective(const std::vector<double>& old_logp, const std::vector<double>& new_logp,
                            const std::vector<double>& advantages, double epsilon) {
    if (old_logp.size() != new_logp.size() || old_logp.size() != advantages.size())
        throw std::invalid_argument("ppo objective: length mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < old_logp.size(); ++i) {
        double ratio = std::exp(new_logp[i] - old_logp[i]);
        double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
        acc += std::min(ratio * advantages[i], clipped * advantages[i]);
    }
    return acc / static_cast<double>(old_logp.size());
}

RolloutBuffer::RolloutBuffer(int od, int ad, int capacity)
    : obs_dim(od), act_dim(ad), capacity_(capacity) {}

void RolloutBuffer::add(const std::vector<double>& o, const std::vector<double>& a, double reward,
                        double value, double lp) {
    if (count_ >= capacity_) throw std::logic_error("rollout: buffer full");
    obs.insert(obs.end(), o.begin(), o.end());
    act.insert(act.end(), a.begin(), a.end());
    rew.push_back(reward);
    val.push_back(value);
    logp.push_back(lp);
    ++count_;
}

void RolloutBuffer::finish_path(double bootstrap) {
    if (count_ == seg_start_) return;  // nothing since the last cut
    segments.emplace_back(seg_start_, count_);
    seg_bootstrap.push_back(bootstrap);
    seg_start_ = count_;
}

void RolloutBuffer::clear() {
    obs.clear();
    act.clear();
    rew.clear();
    val.clear();
    logp.clear();
    ret.clear();
    val_target.clear();
    adv.clear();
    segments.clear();
    seg_bootstrap.clear();
    count_ = 0;
    seg_start_ = 0;
}

void RolloutBuffer::compute_returns(const PpoConfig& cfg) {
    if (seg_start_ != count_) throw std::logic_error("rollout: open segment, call finish_path first");
    ret.assign(count_, 0.0);
    val_target.assign(count_, 0.0);
    adv.assign(count_, 0.0);
    for (size_t s = 0; s < segments.size(); ++s) {
        auto [lo, hi] = segments[s];
        std::vector<double> r(rew.begin() + lo, rew.begin() + hi);
        std::vector<double> v(val.begin() + lo, val.begin() + hi);
        v.push_back(seg_bootstrap[s]);
        std::vector<double> seg_ret = cfg.return_mode == PpoReturnMode::Lambda
                                          ? lambda_returns(r, v, cfg.gamma, cfg.lambda)
                                          : nstep_returns(r, v, cfg.gamma, cfg.n);
        std::vector<double> seg_mc = mc_returns(r, cfg.gamma, seg_bootstrap[s]);
        for (int t = lo; t < hi; ++t) {
            ret[t] = seg_ret[t - lo];
            val_target[t] = seg_mc[t - lo];
            adv[t] = ret[t] - val[t];
        }
    }
    // normalize advantages; constant advantages stay raw
    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= count_;
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    double sd = std::sqrt(var / count_);
    if (sd > 1e-12)
        for (double& a : adv) a = (a - mean) / sd;
}

PpoAgent::PpoAgent(int obs_dim, int act_dim, PpoConfig cfg, std::uint64_t init_seed)
    : cfg_(cfg), obs_dim_(obs_dim), act_dim_(act_dim),
      pi_opt_({.lr = cfg.pi_lr}), v_opt_({.lr = cfg.v_lr}) {
    cfg_.validate();
    std::mt19937_64 rng(init_seed);
    std::vector<int> pi_sizes{obs_dim};
    pi_sizes.insert(pi_sizes.end(), cfg_.hidden.begin(), cfg_.hidden.end());
    pi_sizes.push_back(act_dim);
    pi_mean = Mlp::make(pi_sizes, Activation::Tanh, Activation::Identity, rng, 1e-2);
    std::vector<int> v_sizes{obs_dim};
    v_sizes.insert(v_sizes.end(), cfg_.hidden.begin(), cfg_.hidden.end());
    v_sizes.push_back(1);
    v_net = Mlp::make(v_sizes, Activation::Tanh, Activation::Identity, rng);
    log_std = Tensor({act_dim});
    for (auto& v : log_std.data) v = -0.5;
}

PpoAgent::ActionSample PpoAgent::sample_action(const std::vector<double>& obs,
                                               std::mt19937_64& rng) const {
    auto mean = pi_mean.forward_vec(obs);
    std::normal_distribution<double> normal(0.0, 1.0);
    ActionSample s;
    s.action.resize(act_dim_);
    s.logp = 0.0;
    for (int i = 0; i < act_dim_; ++i) {
        double z = normal(rng);
        s.action[i] = mean[i] + std::exp(log_std.data[i]) * z;
        s.logp += -0.5 * z * z - log_std.data[i] - kHalfLog2Pi;
    }
    s.value = v_net.forward_vec(obs)[0];
    return s;
}

std::vector<double> PpoAgent::mean_action(const std::vector<double>& obs) const {
    return pi_mean.forward_vec(obs);
}

double PpoAgent::value(const std::vector<double>& obs) const { return v_net.forward_vec(obs)[0]; }

PpoEpochStats PpoAgent::update(RolloutBuffer& rollout) {
    rollout.compute_returns(cfg_);
    int N = rollout.size();
    Tensor obs_t({N, obs_dim_}, rollout.obs);
    Tensor act_t({N, act_dim_}, rollout.act);
    Tensor adv_t({N, 1}, rollout.adv);
    Tensor old_logp_t({N, 1}, rollout.logp);
    Tensor ret_t({N, 1}, rollout.val_target);

    PpoEpochStats stats;

    for (int iter = 0; iter < cfg_.train_pi_iters; ++iter) {
        auto piv = lift(pi_mean);
        ad::Var ls = ad::leaf(log_std);
        ad::Var obs_c = ad::constant(obs_t);
        ad::Var mean_v = forward_graph(piv, obs_c);
        ad::Var z = ad::mul_rowvec(ad::sub(ad::constant(act_t), mean_v), ad::exp_(ad::scale(ls, -1.0)));
        ad::Var logp_new =
            ad::add(ad::add_const(ad::scale(ad::row_sum(ad::square(z)), -0.5), -act_dim_ * kHalfLog2Pi),
                    ad::scale(ad::bcast_scalar(ad::sum(ls), N), -1.0));
        ad::Var adv_c = ad::constant(adv_t);
        ad::Var ratio = ad::exp_(ad::sub(logp_new, ad::constant(old_logp_t)));
        ad::Var surr = ad::minimum(ad::mul(ratio, adv_c),
                                   ad::mul(ad::clamp(ratio, 1.0 - cfg_.clip_eps, 1.0 + cfg_.clip_eps), adv_c));
        ad::Var objective = ad::mean(surr);

        double kl = 0.0;
        for (int i = 0; i < N; ++i) kl += old_logp_t.data[i] - logp_new.value().data[i];
        kl /= N;
        if (!std::isfinite(kl)) throw std::runtime_error("ppo: non-finite KL, aborting epoch");

        stats.kl = kl;
        stats.pi_loss = -objective.value().data[0];
        double clipped = 0.0;
        for (int i = 0; i < N; ++i)
            if (std::abs(ratio.value().data[i] - 1.0) > cfg_.clip_eps) clipped += 1.0;
        stats.clip_frac = clipped / N;

        // the first iteration always steps: kl is zero there by construction
        // and roundoff noise must not trip a zero threshold
        if (iter > 0 && kl > 1.5 * cfg_.target_kl) break;

        ad::backward(ad::scale(objective, -1.0));
        auto params = pi_mean.params();
        params.push_back(&log_std);
        auto grads = piv.grads();
        grads.push_back(ls.has_grad() ? ls.grad() : Tensor::zeros_like(log_std));
        pi_opt_.step(params, grads);
        stats.pi_iters = iter + 1;
    }

    for (int iter = 0; iter < cfg_.train_v_iters; ++iter) {
        auto vv = lift(v_net);
        ad::Var loss = ad::mean(ad::square(ad::sub(forward_graph(vv, ad::constant(obs_t)), ad::constant(ret_t))));
        stats.v_loss = loss.value().data[0];
        ad::backward(loss);
        v_opt_.step(v_net.params(), vv.grads());
    }

    stats.entropy = 0.0;
    for (double ls : log_std.data) stats.entropy += ls + 0.5 * (1.0 + std::log(2.0 * 3.14159265358979323846));
    return stats;
}

void PpoAgent::save(std::ostream& os) const {
    write_mlp(os, pi_mean);
    write_mlp(os, v_net);
    write_tensor(os, log_std);
    write_adam(os, pi_opt_);
    write_adam(os, v_opt_);
}

void PpoAgent::load(std::istream& is) {
    pi_mean = read_mlp(is);
    v_net = read_mlp(is);
    log_std = read_tensor(is);
    pi_opt_ = read_adam(is);
    v_opt_ = read_adam(is);
}

}  // namespace posuite
