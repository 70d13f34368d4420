#include "posuite/agents.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace posuite {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;
constexpr double kLog2 = 0.6931471805599453;

std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
    std::vector<int> s{in};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(out);
    return s;
}

// tanh-Gaussian sample with log-prob, built on the tape (reparameterized,
// noise passed in as a constant)
struct GraphPolicySample {
    ad::Var action;    // [B,A]
    ad::Var log_prob;  // [B,1]
};

GraphPolicySample squashed_sample_graph(ad::Var pi_out, const Tensor& eps, int act_dim) {
    ad::Var mu = ad::slice_cols(pi_out, 0, act_dim);
    ad::Var log_std = ad::clamp(ad::slice_cols(pi_out, act_dim, act_dim), kLogStdMin, kLogStdMax);
    ad::Var std = ad::exp_(log_std);
    ad::Var eps_c = ad::constant(eps);
    ad::Var pre = ad::add(mu, ad::mul(std, eps_c));

    // log N(pre | mu, std) = -0.5 eps^2 - log_std - 0.5 log(2 pi)
    ad::Var gauss = ad::sub(ad::add_const(ad::scale(ad::square(eps_c), -0.5), -kHalfLog2Pi), log_std);
    // tanh correction via log(1 - tanh^2(x)) = 2 (log2 - x - softplus(-2x))
    ad::Var corr = ad::scale(ad::add_const(ad::add(pre, ad::softplus(ad::scale(pre, -2.0))), -kLog2), 2.0);

    GraphPolicySample s;
    s.action = ad::tanh_(pre);
    s.log_prob = ad::row_sum(ad::add(gauss, corr));
    return s;
}

}  // namespace

void OffPolicyConfig::validate() {
    if (algo == OffPolicyAlgo::TD3) alpha = 0.0;
    if (n < 1) throw std::invalid_argument("agent: n must be >= 1");
    if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("agent: gamma outside [0,1]");
    if (actor_lr <= 0.0 || critic_lr <= 0.0) throw std::invalid_argument("agent: learning rates must be positive");
    if (alpha < 0.0) throw std::invalid_argument("agent: alpha must be >= 0");
    if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("agent: rho outside [0,1]");
    if (batch < 1 || policy_delay < 1 || update_every < 1) throw std::invalid_argument("agent: bad schedule");
}

OffPolicyAgent::OffPolicyAgent(int obs_dim, int act_dim, OffPolicyConfig cfg, std::uint64_t init_seed)
    : cfg_(cfg), obs_dim_(obs_dim), act_dim_(act_dim),
      q_opt_({.lr = cfg.critic_lr}), pi_opt_({.lr = cfg.actor_lr}) {
    cfg_.validate();
    std::mt19937_64 rng(init_seed);
    auto critic_sizes = layer_sizes(obs_dim + act_dim, cfg_.hidden, 1);
    q1 = Mlp::make(critic_sizes, Activation::Relu, Activation::Identity, rng);
    q2 = Mlp::make(critic_sizes, Activation::Relu, Activation::Identity, rng);
    if (cfg_.algo == OffPolicyAlgo::TD3) {
        pi = Mlp::make(layer_sizes(obs_dim, cfg_.hidden, act_dim), Activation::Relu, Activation::Tanh,
                       rng, 1e-2);
    } else {
        pi = Mlp::make(layer_sizes(obs_dim, cfg_.hidden, 2 * act_dim), Activation::Relu,
                       Activation::Identity, rng, 1e-2);
    }
    q1_targ = q1;
    q2_targ = q2;
    pi_targ = pi;  // unused by SAC (target action comes from the online policy)
}

Tensor OffPolicyAgent::batch_obs(const std::vector<NStepSample>& batch) const {
    Tensor t({static_cast<int>(batch.size()), obs_dim_});
    for (size_t i = 0; i < batch.size(); ++i)
        std::copy(batch[i].obs.begin(), batch[i].obs.end(), t.data.begin() + i * obs_dim_);
    return t;
}

Tensor OffPolicyAgent::batch_next_obs(const std::vector<NStepSample>& batch) const {
    Tensor t({static_cast<int>(batch.size()), obs_dim_});
    for (size_t i = 0; i < batch.size(); ++i)
        std::copy(batch[i].next_obs.begin(), batch[i].next_obs.end(), t.data.begin() + i * obs_dim_);
    return t;
}

std::vector<double> OffPolicyAgent::select_action(const std::vector<double>& obs, bool explore,
                                                  std::mt19937_64& rng) const {
    if (static_cast<int>(obs.size()) != obs_dim_)
        throw std::invalid_argument("agent: observation dim mismatch");
    auto out = pi.forward_vec(obs);
    if (cfg_.algo == OffPolicyAlgo::TD3) {
        if (explore) {
            std::normal_distribution<double> noise(0.0, cfg_.expl_noise);
            for (auto& a : out) a = std::clamp(a + noise(rng), -1.0, 1.0);
        }
        return out;
    }
    SquashedGaussianHead head;
    head.mean.assign(out.begin(), out.begin() + act_dim_);
    head.log_std.assign(out.begin() + act_dim_, out.end());
    if (explore) return squashed_gaussian_sample(head, rng).action;
    std::vector<double> a(act_dim_);
    for (int i = 0; i < act_dim_; ++i) a[i] = std::tanh(head.mean[i]);
    return a;
}

std::vector<double> OffPolicyAgent::compute_target_q(const std::vector<NStepSample>& batch,
                                                     std::mt19937_64& rng) const {
    for (const auto& s : batch)
        if (s.m > cfg_.n || s.m < 1)
            throw std::invalid_argument("agent: sample window length outside [1,n]");

    int B = static_cast<int>(batch.size());
    Tensor next_obs = batch_next_obs(batch);
    Tensor next_act({B, act_dim_});
    std::vector<double> entropy_term(B, 0.0);

    if (cfg_.algo == OffPolicyAlgo::TD3) {
        Tensor mu = pi_targ.forward(next_obs);
        std::normal_distribution<double> noise(0.0, cfg_.target_noise);
        for (long i = 0; i < mu.numel(); ++i) {
            double e = std::clamp(noise(rng), -cfg_.noise_clip, cfg_.noise_clip);
            next_act.data[i] = std::clamp(mu.data[i] + e, -1.0, 1.0);
        }
    } else {
        Tensor out = pi.forward(next_obs);
        for (int i = 0; i < B; ++i) {
            SquashedGaussianHead head;
            head.mean.assign(out.data.begin() + static_cast<long>(i) * 2 * act_dim_,
                             out.data.begin() + static_cast<long>(i) * 2 * act_dim_ + act_dim_);
            head.log_std.assign(out.data.begin() + static_cast<long>(i) * 2 * act_dim_ + act_dim_,
                                out.data.begin() + static_cast<long>(i + 1) * 2 * act_dim_);
            auto s = squashed_gaussian_sample(head, rng);
            std::copy(s.action.begin(), s.action.end(), next_act.data.begin() + static_cast<long>(i) * act_dim_);
            entropy_term[i] = -s.log_prob;
        }
    }

    Tensor q_in({B, obs_dim_ + act_dim_});
    for (int i = 0; i < B; ++i) {
        std::copy_n(&next_obs.data[static_cast<long>(i) * obs_dim_], obs_dim_,
                    &q_in.data[static_cast<long>(i) * (obs_dim_ + act_dim_)]);
        std::copy_n(&next_act.data[static_cast<long>(i) * act_dim_], act_dim_,
                    &q_in.data[static_cast<long>(i) * (obs_dim_ + act_dim_) + obs_dim_]);
    }
    Tensor tq1 = q1_targ.forward(q_in);
    Tensor tq2 = q2_targ.forward(q_in);

    std::vector<double> targets(B);
    for (int i = 0; i < B; ++i) {
        double boot = std::min(tq1.data[i], tq2.data[i]) + cfg_.alpha * entropy_term[i];
        targets[i] = nstep_return(batch[i].rewards, cfg_.gamma, boot, batch[i].terminal);
    }
    return targets;
}

double OffPolicyAgent::critic_update(const std::vector<NStepSample>& batch,
                                     const std::vector<double>& targets) {
    int B = static_cast<int>(batch.size());
    Tensor q_in({B, obs_dim_ + act_dim_});
    for (int i = 0; i < B; ++i) {
        std::copy(batch[i].obs.begin(), batch[i].obs.end(),
                  q_in.data.begin() + static_cast<long>(i) * (obs_dim_ + act_dim_));
        std::copy(batch[i].act.begin(), batch[i].act.end(),
                  q_in.data.begin() + static_cast<long>(i) * (obs_dim_ + act_dim_) + obs_dim_);
    }
    Tensor y({B, 1}, targets);

    auto q1v = lift(q1);
    auto q2v = lift(q2);
    ad::Var x = ad::constant(std::move(q_in));
    ad::Var yc = ad::constant(std::move(y));
    ad::Var loss = ad::add(ad::mean(ad::square(ad::sub(forward_graph(q1v, x), yc))),
                           ad::mean(ad::square(ad::sub(forward_graph(q2v, x), yc))));
    double loss_val = loss.value().data[0];
    if (!std::isfinite(loss_val)) throw std::runtime_error("agent: non-finite critic loss, aborting run");
    ad::backward(loss);

    auto params = q1.params();
    auto p2 = q2.params();
    params.insert(params.end(), p2.begin(), p2.end());
    auto grads = q1v.grads();
    auto g2 = q2v.grads();
    grads.insert(grads.end(), g2.begin(), g2.end());
    q_opt_.step(params, grads);
    return loss_val;
}

double OffPolicyAgent::actor_update(const std::vector<NStepSample>& batch, std::mt19937_64& rng) {
    int B = static_cast<int>(batch.size());
    ad::Var obs_c = ad::constant(batch_obs(batch));

    auto piv = lift(pi);
    ad::Var objective;
    if (cfg_.algo == OffPolicyAlgo::TD3) {
        auto q1v = lift(q1);  // critic params frozen: grads computed but never applied
        ad::Var a = forward_graph(piv, obs_c);
        objective = ad::mean(forward_graph(q1v, ad::concat_cols(obs_c, a)));
    } else {
        Tensor eps({B, act_dim_});
        std::normal_distribution<double> normal(0.0, 1.0);
        for (auto& v : eps.data) v = normal(rng);
        auto sample = squashed_sample_graph(forward_graph(piv, obs_c), eps, act_dim_);
        auto q1v = lift(q1);
        auto q2v = lift(q2);
        ad::Var qin = ad::concat_cols(obs_c, sample.action);
        ad::Var qmin = ad::minimum(forward_graph(q1v, qin), forward_graph(q2v, qin));
        objective = ad::mean(ad::sub(qmin, ad::scale(sample.log_prob, cfg_.alpha)));
    }
    double obj_val = objective.value().data[0];
    if (!std::isfinite(obj_val)) throw std::runtime_error("agent: non-finite actor objective, aborting run");
    ad::backward(ad::scale(objective, -1.0));
    pi_opt_.step(pi.params(), piv.grads());
    return obj_val;
}

void OffPolicyAgent::polyak_targets() {
    polyak_update(q1_targ, q1, cfg_.rho);
    polyak_update(q2_targ, q2, cfg_.rho);
    if (cfg_.algo == OffPolicyAlgo::TD3) polyak_update(pi_targ, pi, cfg_.rho);
}

OffPolicyAgent::UpdateStats OffPolicyAgent::update(const std::vector<NStepSample>& batch,
                                                   std::mt19937_64& rng) {
    UpdateStats st;
    st.q_loss = critic_update(batch, compute_target_q(batch, rng));
    ++update_count_;
    if (cfg_.algo == OffPolicyAlgo::SAC || update_count_ % cfg_.policy_delay == 0) {
        st.pi_objective = actor_update(batch, rng);
        st.actor_stepped = true;
        polyak_targets();
    }
    return st;
}

void OffPolicyAgent::save(std::ostream& os) const {
    for (const Mlp* net : {&q1, &q2, &q1_targ, &q2_targ, &pi, &pi_targ}) write_mlp(os, *net);
    write_adam(os, q_opt_);
    write_adam(os, pi_opt_);
    std::int64_t uc = update_count_;
    os.write(reinterpret_cast<const char*>(&uc), sizeof(uc));
}

void OffPolicyAgent::load(std::istream& is) {
    for (Mlp* net : {&q1, &q2, &q1_targ, &q2_targ, &pi, &pi_targ}) *net = read_mlp(is);
    q_opt_ = read_adam(is);
    pi_opt_ = read_adam(is);
    std::int64_t uc = 0;
    is.read(reinterpret_cast<char*>(&uc), sizeof(uc));
    if (!is) throw std::runtime_error("checkpoint: truncated agent state");
    update_count_ = static_cast<long>(uc);
}

}  // namespace posuite
