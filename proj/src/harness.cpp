#include "posuite/harness.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "posuite/env.hpp"
#include "posuite/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace posuite {

bool RunConfig::is_offpolicy() const {
    return algo == "td3" || algo == "sac" || algo == "mtd3" || algo == "msac";
}

void RunConfig::resolve() {
    if (algo == "td3" || algo == "sac") {
        offpolicy.algo = algo == "td3" ? OffPolicyAlgo::TD3 : OffPolicyAlgo::SAC;
        offpolicy.n = 1;
    } else if (algo == "mtd3" || algo == "msac") {
        offpolicy.algo = algo == "mtd3" ? OffPolicyAlgo::TD3 : OffPolicyAlgo::SAC;
    } else if (algo == "ppo") {
        ppo.return_mode = PpoReturnMode::Lambda;
    } else if (algo == "ppon") {
        ppo.return_mode = PpoReturnMode::NStep;
    } else {
        throw std::invalid_argument("unknown algorithm: " + algo);
    }
    if (total_steps <= 0) throw std::invalid_argument("run: total_steps must be > 0");
    if (eval_episodes < 1) throw std::invalid_argument("run: eval_episodes must be >= 1");
    if (eval_every <= 0) throw std::invalid_argument("run: eval_every must be > 0");
    wrapper.validate();
    if (is_offpolicy())
        offpolicy.validate();
    else
        ppo.validate();
    make_env(env_name);  // throws for unknown names
}

std::string RunConfig::to_json() const {
    json j;
    j["version"] = kGeneratorVersion;
    j["env"] = env_name;
    j["pomdp_mode"] = to_string(wrapper.mode);
    j["p_flk"] = wrapper.p_flk;
    j["sigma_rn"] = wrapper.sigma_rn;
    j["p_rsm"] = wrapper.p_rsm;
    j["algo"] = algo;
    j["seed"] = seed;
    j["total_steps"] = total_steps;
    j["eval_every"] = eval_every;
    j["eval_episodes"] = eval_episodes;
    if (is_offpolicy()) {
        j["n"] = offpolicy.n;
        j["gamma"] = offpolicy.gamma;
        j["alpha"] = offpolicy.alpha;
        j["rho"] = offpolicy.rho;
        j["actor_lr"] = offpolicy.actor_lr;
        j["critic_lr"] = offpolicy.critic_lr;
        j["batch"] = offpolicy.batch;
        j["start_steps"] = offpolicy.start_steps;
        j["update_after"] = offpolicy.update_after;
        j["update_every"] = offpolicy.update_every;
        j["policy_delay"] = offpolicy.policy_delay;
        j["target_noise"] = offpolicy.target_noise;
        j["noise_clip"] = offpolicy.noise_clip;
        j["expl_noise"] = offpolicy.expl_noise;
        j["hidden"] = offpolicy.hidden;
    } else {
        j["n"] = ppo.n;
        j["return_mode"] = ppo.return_mode == PpoReturnMode::Lambda ? "lambda" : "nstep";
        j["lambda"] = ppo.lambda;
        j["gamma"] = ppo.gamma;
        j["clip_eps"] = ppo.clip_eps;
        j["pi_lr"] = ppo.pi_lr;
        j["v_lr"] = ppo.v_lr;
        j["steps_per_epoch"] = ppo.steps_per_epoch;
        j["train_pi_iters"] = ppo.train_pi_iters;
        j["train_v_iters"] = ppo.train_v_iters;
        j["target_kl"] = ppo.target_kl;
        j["hidden"] = ppo.hidden;
    }
    return j.dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& text) {
    json j = json::parse(text);
    RunConfig cfg;
    if (j.contains("env")) cfg.env_name = j["env"];
    if (j.contains("pomdp_mode")) cfg.wrapper.mode = pomdp_mode_from_string(j["pomdp_mode"]);
    if (j.contains("p_flk")) cfg.wrapper.p_flk = j["p_flk"];
    if (j.contains("sigma_rn")) cfg.wrapper.sigma_rn = j["sigma_rn"];
    if (j.contains("p_rsm")) cfg.wrapper.p_rsm = j["p_rsm"];
    if (j.contains("algo")) cfg.algo = j["algo"];
    if (j.contains("seed")) cfg.seed = j["seed"];
    if (j.contains("total_steps")) cfg.total_steps = j["total_steps"];
    if (j.contains("eval_every")) cfg.eval_every = j["eval_every"];
    if (j.contains("eval_episodes")) cfg.eval_episodes = j["eval_episodes"];
    if (j.contains("n")) {
        cfg.offpolicy.n = j["n"];
        cfg.ppo.n = j["n"];
    }
    if (j.contains("gamma")) {
        cfg.offpolicy.gamma = j["gamma"];
        cfg.ppo.gamma = j["gamma"];
    }
    if (j.contains("alpha")) cfg.offpolicy.alpha = j["alpha"];
    if (j.contains("rho")) cfg.offpolicy.rho = j["rho"];
    if (j.contains("actor_lr")) cfg.offpolicy.actor_lr = j["actor_lr"];
    if (j.contains("critic_lr")) cfg.offpolicy.critic_lr = j["critic_lr"];
    if (j.contains("batch")) cfg.offpolicy.batch = j["batch"];
    if (j.contains("start_steps")) cfg.offpolicy.start_steps = j["start_steps"];
    if (j.contains("update_after")) cfg.offpolicy.update_after = j["update_after"];
    if (j.contains("update_every")) cfg.offpolicy.update_every = j["update_every"];
    if (j.contains("policy_delay")) cfg.offpolicy.policy_delay = j["policy_delay"];
    if (j.contains("target_noise")) cfg.offpolicy.target_noise = j["target_noise"];
    if (j.contains("noise_clip")) cfg.offpolicy.noise_clip = j["noise_clip"];
    if (j.contains("expl_noise")) cfg.offpolicy.expl_noise = j["expl_noise"];
    if (j.contains("return_mode"))
        cfg.ppo.return_mode = j["return_mode"] == "nstep" ? PpoReturnMode::NStep : PpoReturnMode::Lambda;
    if (j.contains("lambda")) cfg.ppo.lambda = j["lambda"];
    if (j.contains("clip_eps")) cfg.ppo.clip_eps = j["clip_eps"];
    if (j.contains("pi_lr")) cfg.ppo.pi_lr = j["pi_lr"];
    if (j.contains("v_lr")) cfg.ppo.v_lr = j["v_lr"];
    if (j.contains("steps_per_epoch")) cfg.ppo.steps_per_epoch = j["steps_per_epoch"];
    if (j.contains("train_pi_iters")) cfg.ppo.train_pi_iters = j["train_pi_iters"];
    if (j.contains("train_v_iters")) cfg.ppo.train_v_iters = j["train_v_iters"];
    if (j.contains("target_kl")) cfg.ppo.target_kl = j["target_kl"];
    return cfg;
}

std::string format_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

double max_avg_return(const std::vector<EvalRecord>& records) {
    if (records.empty()) throw std::invalid_argument("max_avg_return: empty record list");
    double best = records.front().mean;
    for (const auto& r : records) best = std::max(best, r.mean);
    return best;
}

std::vector<double> gaussian_smooth(const std::vector<double>& series, double sigma) {
    if (sigma <= 0.0) throw std::invalid_argument("gaussian_smooth: sigma must be > 0");
    if (series.empty()) return {};
    int radius = static_cast<int>(std::ceil(4.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double norm = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i / sigma) * (i / sigma));
        norm += kernel[i + radius];
    }
    for (auto& k : kernel) k /= norm;

    int n = static_cast<int>(series.size());
    auto reflect = [n](long i) {
        // symmetric reflection: ... 2 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
        long period = 2L * n;
        i = ((i % period) + period) % period;
        return static_cast<int>(i < n ? i : period - 1 - i);
    };
    std::vector<double> out(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * series[reflect(i + k)];
        out[i] = acc;
    }
    return out;
}

EvalRecord evaluate(const std::function<std::vector<double>(const std::vector<double>&)>& policy,
                    const std::string& env_name, const WrapperConfig& wrapper, int episodes,
                    std::uint64_t seed, long step_label) {
    EvalRecord rec;
    rec.step = step_label;
    for (int ep = 0; ep < episodes; ++ep) {
        std::uint64_t ep_seed = splitmix64(seed + static_cast<std::uint64_t>(ep));
        WrappedEnv env(make_env(env_name), wrapper, derive_seed(ep_seed, "eval-wrapper"));
        auto obs = env.reset(derive_seed(ep_seed, "eval-env"));
        double ret = 0.0;
        while (true) {
            StepResult sr = env.step(policy(obs));
            ret += sr.reward;
            if (sr.done()) break;
            obs = sr.obs;
        }
        rec.returns.push_back(ret);
    }
    double sum = 0.0;
    for (double r : rec.returns) sum += r;
    rec.mean = sum / rec.returns.size();
    return rec;
}

namespace {

std::vector<double> uniform_action(int dim, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> a(dim);
    for (auto& v : a) v = u(rng);
    return a;
}

class RunLogger {
public:
    RunLogger(const RunConfig& cfg) : cfg_(cfg) {
        fs::create_directories(cfg.out_dir);
        std::ofstream(cfg.out_dir + "/config.json") << cfg.to_json();
        eval_.open(cfg.out_dir + "/eval.csv");
        eval_ << "step";
        for (int i = 1; i <= cfg.eval_episodes; ++i) eval_ << ",ep_ret_" << i;
        eval_ << ",mean\n";
        train_.open(cfg.out_dir + "/train.csv");
    }

    void train_header(const std::string& h) { train_ << h << "\n"; }
    std::ofstream& train() { return train_; }

    void log_eval(const EvalRecord& rec) {
        eval_ << rec.step;
        for (double r : rec.returns) eval_ << "," << format_double(r);
        eval_ << "," << format_double(rec.mean) << "\n";
        eval_.flush();
    }

private:
    const RunConfig& cfg_;
    std::ofstream eval_, train_;
};

std::uint64_t episode_seed(std::uint64_t env_base, long episode) {
    return splitmix64(env_base + static_cast<std::uint64_t>(episode));
}

RunResult run_offpolicy(const RunConfig& cfg) {
    const auto& oc = cfg.offpolicy;
    WrappedEnv env(make_env(cfg.env_name), cfg.wrapper, derive_seed(cfg.seed, "wrapper"));
    OffPolicyAgent agent(env.obs_dim(), env.act_dim(), oc, derive_seed(cfg.seed, "agent"));

    auto action_rng = make_rng(cfg.seed, "action");
    auto update_rng = make_rng(cfg.seed, "update");
    std::uint64_t env_base = derive_seed(cfg.seed, "env");
    std::uint64_t eval_base = derive_seed(cfg.seed, "eval");

    ReplayBuffer replay(1000000);
    RunLogger log(cfg);
    log.train_header("step,q_loss,pi_objective");

    RunResult result;
    result.out_dir = cfg.out_dir;

    long episode = 0;
    auto obs = env.reset(episode_seed(env_base, episode++));
    for (long t = 0; t < cfg.total_steps; ++t) {
        std::vector<double> a = t < oc.start_steps ? uniform_action(env.act_dim(), action_rng)
                                                   : agent.select_action(obs, true, action_rng);
        StepResult sr = env.step(a);
        replay.store({obs, a, sr.reward, sr.obs, sr.terminal, sr.truncated});
        obs = sr.done() ? env.reset(episode_seed(env_base, episode++)) : sr.obs;

        if (t + 1 >= oc.update_after && (t + 1) % oc.update_every == 0) {
            for (int j = 0; j < oc.update_every; ++j) {
                auto batch = replay.sample_nstep(oc.batch, oc.n, update_rng);
                auto st = agent.update(batch, update_rng);
                log.train() << (t + 1) << "," << format_double(st.q_loss) << ","
                            << (st.actor_stepped ? format_double(st.pi_objective) : "") << "\n";
            }
        }
        if ((t + 1) % cfg.eval_every == 0) {
            std::mt19937_64 dummy;
            auto policy = [&](const std::vector<double>& o) { return agent.select_action(o, false, dummy); };
            auto rec = evaluate(policy, cfg.env_name, cfg.wrapper, cfg.eval_episodes,
                                splitmix64(eval_base + static_cast<std::uint64_t>(t + 1)), t + 1);
            log.log_eval(rec);
            result.records.push_back(std::move(rec));
        }
    }
    std::ofstream ck(cfg.out_dir + "/agent.bin", std::ios::binary);
    agent.save(ck);
    return result;
}

RunResult run_ppo(const RunConfig& cfg) {
    const auto& pc = cfg.ppo;
    WrappedEnv env(make_env(cfg.env_name), cfg.wrapper, derive_seed(cfg.seed, "wrapper"));
    PpoAgent agent(env.obs_dim(), env.act_dim(), pc, derive_seed(cfg.seed, "agent"));

    auto action_rng = make_rng(cfg.seed, "action");
    std::uint64_t env_base = derive_seed(cfg.seed, "env");
    std::uint64_t eval_base = derive_seed(cfg.seed, "eval");

    RolloutBuffer rollout(env.obs_dim(), env.act_dim(), pc.steps_per_epoch);
    RunLogger log(cfg);
    log.train_header("step,pi_loss,v_loss,kl,entropy,clip_frac,pi_iters");

    RunResult result;
    result.out_dir = cfg.out_dir;

    long episode = 0;
    auto obs = env.reset(episode_seed(env_base, episode++));
    for (long t = 0; t < cfg.total_steps; ++t) {
        auto s = agent.sample_action(obs, action_rng);
        StepResult sr = env.step(s.action);
        rollout.add(obs, s.action, sr.reward, s.value, s.logp);

        bool epoch_full = rollout.full();
        if (sr.terminal) {
            rollout.finish_path(0.0);
        } else if (sr.truncated || epoch_full) {
            rollout.finish_path(agent.value(sr.obs));
        }
        obs = sr.done() ? env.reset(episode_seed(env_base, episode++)) : sr.obs;

        if (epoch_full) {
            auto st = agent.update(rollout);
            log.train() << (t + 1) << "," << format_double(st.pi_loss) << "," << format_double(st.v_loss)
                        << "," << format_double(st.kl) << "," << format_double(st.entropy) << ","
                        << format_double(st.clip_frac) << "," << st.pi_iters << "\n";
            rollout.clear();
        }
        if ((t + 1) % cfg.eval_every == 0) {
            auto policy = [&](const std::vector<double>& o) { return agent.mean_action(o); };
            auto rec = evaluate(policy, cfg.env_name, cfg.wrapper, cfg.eval_episodes,
                                splitmix64(eval_base + static_cast<std::uint64_t>(t + 1)), t + 1);
            log.log_eval(rec);
            result.records.push_back(std::move(rec));
        }
    }
    std::ofstream ck(cfg.out_dir + "/agent.bin", std::ios::binary);
    agent.save(ck);
    return result;
}

}  // namespace

RunResult run_training(const RunConfig& cfg_in) {
    RunConfig cfg = cfg_in;
    cfg.resolve();
    if (cfg.out_dir.empty()) throw std::invalid_argument("run: output directory not set");
    return cfg.is_offpolicy() ? run_offpolicy(cfg) : run_ppo(cfg);
}

std::vector<EvalRecord> read_eval_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::string line;
    std::getline(is, line);  // header
    std::vector<EvalRecord> records;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        EvalRecord rec;
        std::stringstream ss(line);
        std::string field;
        std::getline(ss, field, ',');
        rec.step = std::stol(field);
        std::vector<double> vals;
        while (std::getline(ss, field, ',')) vals.push_back(std::stod(field));
        if (vals.empty()) throw std::runtime_error("bad eval.csv row in " + path);
        rec.mean = vals.back();
        vals.pop_back();
        rec.returns = std::move(vals);
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace posuite
