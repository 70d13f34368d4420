#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "posuite/env.hpp"
#include "posuite/harness.hpp"
#include "posuite/report.hpp"
#include "posuite/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace posuite;

namespace {

std::string output_root() {
    const char* env = std::getenv("PO_SUITE_OUT");
    return env && *env ? env : "runs";
}

std::string default_run_dir(const RunConfig& cfg) {
    std::ostringstream os;
    os << output_root() << "/" << cfg.env_name << "_" << to_string(cfg.wrapper.mode) << "_" << cfg.algo;
    if (cfg.algo == "mtd3" || cfg.algo == "msac" || cfg.algo == "ppon") os << cfg.offpolicy.n;
    os << "_s" << cfg.seed;
    return os.str();
}

struct TrainArgs {
    std::string env = "pendulum", algo = "td3", pomdp = "mdp", out, config_file;
    int n = 1;
    std::uint64_t seed = 0;
    long steps = 100000;
    long eval_every = 2000;
    int eval_episodes = 5;
    double p_flk = 0.2, sigma_rn = 0.1, p_rsm = 0.1;
    double lambda = 0.97, clip_eps = 0.2;
};

void add_train_flags(CLI::App* cmd, TrainArgs& a) {
    cmd->add_option("--env", a.env, "environment: pendulum|reacher2d|mountaincar-c");
    cmd->add_option("--algo", a.algo, "td3|sac|mtd3|msac|ppo|ppon");
    cmd->add_option("--pomdp", a.pomdp, "mdp|rv|flk|rn|rsm");
    cmd->add_option("--n", a.n, "multi-step size (mtd3/msac/ppon)");
    cmd->add_option("--seed", a.seed, "master seed");
    cmd->add_option("--steps", a.steps, "total environment steps");
    cmd->add_option("--eval-every", a.eval_every, "steps between evaluations");
    cmd->add_option("--eval-episodes", a.eval_episodes, "episodes per evaluation");
    cmd->add_option("--out", a.out, "run output directory");
    cmd->add_option("--config", a.config_file, "JSON config file (flags override it)");
    cmd->add_option("--p-flk", a.p_flk, "flicker probability");
    cmd->add_option("--sigma-rn", a.sigma_rn, "observation noise std");
    cmd->add_option("--p-rsm", a.p_rsm, "per-entry dropout probability");
    cmd->add_option("--lambda", a.lambda, "ppo lambda");
    cmd->add_option("--clip-eps", a.clip_eps, "ppo clip ratio");
}

RunConfig build_run_config(const CLI::App* cmd, const TrainArgs& a) {
    RunConfig cfg;
    if (!a.config_file.empty()) {
        std::ifstream is(a.config_file);
        if (!is) throw std::invalid_argument("cannot open config file: " + a.config_file);
        std::stringstream ss;
        ss << is.rdbuf();
        cfg = run_config_from_json(ss.str());
    }
    auto set = [&](const std::string& flag) { return cmd->count(flag) > 0; };
    if (set("--env") || a.config_file.empty()) cfg.env_name = a.env;
    if (set("--algo") || a.config_file.empty()) cfg.algo = a.algo;
    if (set("--pomdp") || a.config_file.empty()) cfg.wrapper.mode = pomdp_mode_from_string(a.pomdp);
    if (set("--n")) {
        cfg.offpolicy.n = a.n;
        cfg.ppo.n = a.n;
    }
    if (set("--seed") || a.config_file.empty()) cfg.seed = a.seed;
    if (set("--steps") || a.config_file.empty()) cfg.total_steps = a.steps;
    if (set("--eval-every")) cfg.eval_every = a.eval_every;
    if (set("--eval-episodes")) cfg.eval_episodes = a.eval_episodes;
    if (set("--p-flk")) cfg.wrapper.p_flk = a.p_flk;
    if (set("--sigma-rn")) cfg.wrapper.sigma_rn = a.sigma_rn;
    if (set("--p-rsm")) cfg.wrapper.p_rsm = a.p_rsm;
    if (set("--lambda")) cfg.ppo.lambda = a.lambda;
    if (set("--clip-eps")) cfg.ppo.clip_eps = a.clip_eps;
    cfg.out_dir = !a.out.empty() ? a.out : default_run_dir(cfg);
    return cfg;
}

int cmd_train(const CLI::App* cmd, const TrainArgs& a) {
    RunConfig cfg = build_run_config(cmd, a);
    auto result = run_training(cfg);
    std::cout << "run complete: " << result.out_dir << "\n";
    if (!result.records.empty())
        std::cout << "max_avg_return " << format_double(max_avg_return(result.records)) << "\n";
    return 0;
}

int cmd_sweep(const std::string& spec_file, int workers) {
    std::ifstream is(spec_file);
    if (!is) throw std::invalid_argument("cannot open sweep spec: " + spec_file);
    json j = json::parse(is);

    auto list_of = [&](const char* key, json fallback) {
        return j.contains(key) ? j[key] : fallback;
    };
    json envs = list_of("envs", json::array({"pendulum"}));
    json modes = list_of("modes", json::array({"mdp"}));
    json algos = list_of("algos", json::array({"td3"}));
    json ns = list_of("ns", json::array({1}));
    json lambdas = list_of("lambdas", json::array({0.97}));
    json epss = list_of("clip_epss", json::array({0.2}));
    json seeds = list_of("seeds", json::array({0, 1, 2}));

    std::vector<RunConfig> cells;
    for (const auto& env : envs)
        for (const auto& mode : modes)
            for (const auto& algo : algos)
                for (const auto& n : ns)
                    for (const auto& lam : lambdas)
                        for (const auto& eps : epss)
                            for (const auto& seed : seeds) {
                                std::string algo_s = algo;
                                bool uses_n = algo_s == "mtd3" || algo_s == "msac" || algo_s == "ppon";
                                bool uses_ppo = algo_s == "ppo" || algo_s == "ppon";
                                // avoid duplicate cells for parameters an algo ignores
                                if (!uses_n && int(n) != int(ns[0])) continue;
                                if (algo_s != "ppo" && double(lam) != double(lambdas[0])) continue;
                                if (!uses_ppo && double(eps) != double(epss[0])) continue;
                                RunConfig cfg;
                                cfg.env_name = env;
                                cfg.wrapper.mode = pomdp_mode_from_string(mode);
                                cfg.algo = algo_s;
                                cfg.offpolicy.n = n;
                                cfg.ppo.n = n;
                                cfg.ppo.lambda = lam;
                                cfg.ppo.clip_eps = eps;
                                cfg.seed = std::uint64_t(seed);
                                if (j.contains("steps")) cfg.total_steps = j["steps"];
                                if (j.contains("eval_every")) cfg.eval_every = j["eval_every"];
                                std::ostringstream dir;
                                dir << (j.contains("out") ? std::string(j["out"]) : output_root()) << "/"
                                    << cfg.env_name << "_" << mode.get<std::string>() << "_" << algo_s;
                                if (uses_n) dir << int(n);
                                if (algo_s == "ppo" && lambdas.size() > 1) dir << "_l" << double(lam);
                                if (uses_ppo && epss.size() > 1) dir << "_e" << double(eps);
                                dir << "_s" << std::uint64_t(seed);
                                cfg.out_dir = dir.str();
                                cells.push_back(std::move(cfg));
                            }

    std::cout << "sweep: " << cells.size() << " cells\n";
    if (workers < 1) workers = 1;
    std::atomic<size_t> next{0};
    std::atomic<int> failures{0};
    auto worker = [&] {
        for (size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) {
            try {
                run_training(cells[i]);
                std::cout << "done: " << cells[i].out_dir << "\n";
            } catch (const std::exception& e) {
                std::cerr << "failed: " << cells[i].out_dir << ": " << e.what() << "\n";
                ++failures;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return failures == 0 ? 0 : 3;
}

std::vector<RunData> load_dirs(const std::vector<std::string>& dirs) {
    std::vector<RunData> runs;
    for (const auto& d : dirs) runs.push_back(load_run_dir(d));
    return runs;
}

int cmd_table(const std::vector<std::string>& dirs, const std::string& out_prefix) {
    auto out = make_table(load_dirs(dirs));
    std::cout << out.text;
    std::ofstream(out_prefix + ".txt") << out.text;
    std::ofstream(out_prefix + ".csv") << out.csv;
    return 0;
}

int cmd_plot(const std::vector<std::string>& dirs, const std::string& out_prefix, double sigma) {
    auto out = make_plot(load_dirs(dirs), sigma);
    std::ofstream(out_prefix + ".svg") << out.svg;
    std::ofstream(out_prefix + ".csv") << out.csv;
    std::cout << "wrote " << out_prefix << ".svg and " << out_prefix << ".csv\n";
    return 0;
}

int cmd_eval(const std::string& run_dir, int episodes, std::uint64_t seed) {
    std::ifstream cf(run_dir + "/config.json");
    if (!cf) throw std::invalid_argument("not a run directory: " + run_dir);
    std::stringstream ss;
    ss << cf.rdbuf();
    RunConfig cfg = run_config_from_json(ss.str());
    cfg.resolve();

    WrappedEnv env(make_env(cfg.env_name), cfg.wrapper, 0);
    std::ifstream ck(run_dir + "/agent.bin", std::ios::binary);
    if (!ck) throw std::invalid_argument("no checkpoint in " + run_dir);

    std::function<std::vector<double>(const std::vector<double>&)> policy;
    std::shared_ptr<OffPolicyAgent> opa;
    std::shared_ptr<PpoAgent> ppa;
    if (cfg.is_offpolicy()) {
        opa = std::make_shared<OffPolicyAgent>(env.obs_dim(), env.act_dim(), cfg.offpolicy, 0);
        opa->load(ck);
        policy = [opa](const std::vector<double>& o) {
            std::mt19937_64 dummy;
            return opa->select_action(o, false, dummy);
        };
    } else {
        ppa = std::make_shared<PpoAgent>(env.obs_dim(), env.act_dim(), cfg.ppo, 0);
        ppa->load(ck);
        policy = [ppa](const std::vector<double>& o) { return ppa->mean_action(o); };
    }
    auto rec = evaluate(policy, cfg.env_name, cfg.wrapper, episodes, seed, 0);
    std::cout << "returns:";
    for (double r : rec.returns) std::cout << " " << format_double(r);
    std::cout << "\nmean " << format_double(rec.mean) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"po_suite: TD3/SAC/PPO and their multi-step variants on MDP and POMDP control tasks"};
    app.require_subcommand(1);

    TrainArgs targs;
    auto* train = app.add_subcommand("train", "run one training configuration");
    add_train_flags(train, targs);

    std::string sweep_spec;
    int workers = static_cast<int>(std::thread::hardware_concurrency());
    auto* sweep = app.add_subcommand("sweep", "run a grid of configurations");
    sweep->add_option("--spec", sweep_spec, "sweep spec JSON")->required();
    sweep->add_option("--workers", workers, "parallel runs");

    std::vector<std::string> table_dirs;
    std::string table_out = "table";
    auto* table = app.add_subcommand("table", "aggregate run directories into a results table");
    table->add_option("dirs", table_dirs, "run directories")->required();
    table->add_option("--out", table_out, "output prefix");

    std::vector<std::string> plot_dirs;
    std::string plot_out = "plot";
    double sigma = 20.0;
    auto* plot = app.add_subcommand("plot", "emit smoothed learning-curve SVG + CSV");
    plot->add_option("dirs", plot_dirs, "run directories")->required();
    plot->add_option("--out", plot_out, "output prefix");
    plot->add_option("--sigma", sigma, "Gaussian smoothing sigma");

    std::string eval_dir;
    int eval_episodes = 5;
    std::uint64_t eval_seed = 0;
    auto* evalc = app.add_subcommand("eval", "evaluate a trained checkpoint");
    evalc->add_option("dir", eval_dir, "run directory")->required();
    evalc->add_option("--episodes", eval_episodes, "evaluation episodes");
    evalc->add_option("--seed", eval_seed, "evaluation seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*train) return cmd_train(train, targs);
        if (*sweep) return cmd_sweep(sweep_spec, workers);
        if (*table) return cmd_table(table_dirs, table_out);
        if (*plot) return cmd_plot(plot_dirs, plot_out, sigma);
        if (*evalc) return cmd_eval(eval_dir, eval_episodes, eval_seed);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
