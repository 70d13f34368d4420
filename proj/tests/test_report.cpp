#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "posuite/report.hpp"

using namespace posuite;
namespace fs = std::filesystem;

namespace {

// fabricate a finished run directory with a given eval curve
std::string write_run(const std::string& root, const std::string& algo, int n,
                      const std::string& mode, std::uint64_t seed,
                      const std::vector<double>& means, long eval_every = 1000) {
    RunConfig cfg;
    cfg.env_name = "pendulum";
    cfg.algo = algo;
    cfg.offpolicy.n = n;
    cfg.ppo.n = n;
    cfg.wrapper.mode = pomdp_mode_from_string(mode);
    cfg.seed = seed;
    cfg.eval_every = eval_every;
    cfg.eval_episodes = 1;
    cfg.total_steps = eval_every * static_cast<long>(means.size());
    std::string dir = root + "/" + algo + "_" + mode + "_s" + std::to_string(seed);
    fs::create_directories(dir);
    std::ofstream(dir + "/config.json") << cfg.to_json();
    std::ofstream ev(dir + "/eval.csv");
    ev << "step,ep_ret_1,mean\n";
    for (size_t i = 0; i < means.size(); ++i)
        ev << eval_every * (i + 1) << "," << format_double(means[i]) << ","
           << format_double(means[i]) << "\n";
    return dir;
}

std::string fresh_root(const std::string& tag) {
    auto d = fs::temp_directory_path() / ("po_report_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d.string();
}

}  // namespace

TEST_CASE("single run gives a 1x1 table holding its best return") {
    auto root = fresh_root("single");
    auto dir = write_run(root, "td3", 1, "mdp", 0, {-900.0, -300.0, -500.0});
    auto table = make_table({load_run_dir(dir)});
    CHECK(table.text.find("pendulum/mdp") != std::string::npos);
    CHECK(table.text.find("-300.0*") != std::string::npos);
    CHECK(table.csv.find("pendulum,mdp,td3,1,yes,-300,") != std::string::npos);
    fs::remove_all(root);
}

TEST_CASE("the better algorithm in a row gets the marker") {
    auto root = fresh_root("best");
    std::vector<RunData> runs{
        load_run_dir(write_run(root, "td3", 1, "rv", 0, {-800.0, -700.0})),
        load_run_dir(write_run(root, "mtd3", 5, "rv", 0, {-600.0, -400.0})),
    };
    auto table = make_table(runs);
    CHECK(table.text.find("-400.0*") != std::string::npos);
    CHECK(table.text.find("-700.0*") == std::string::npos);
    CHECK(table.text.find("mtd3(5)") != std::string::npos);
    fs::remove_all(root);
}

TEST_CASE("a cell missing a seed is annotated") {
    auto root = fresh_root("seeds");
    std::vector<RunData> runs;
    for (std::uint64_t s : {0, 1, 2})
        runs.push_back(load_run_dir(write_run(root, "td3", 1, "mdp", s, {-500.0})));
    for (std::uint64_t s : {0, 1})
        runs.push_back(load_run_dir(write_run(root, "sac", 1, "mdp", s, {-400.0})));
    auto table = make_table(runs);
    CHECK(table.text.find("(n=2/3 seeds)") != std::string::npos);
    CHECK(table.csv.find("pendulum,mdp,sac,2,yes") != std::string::npos);
    CHECK(table.csv.find("pendulum,mdp,td3,3,yes") != std::string::npos);
    fs::remove_all(root);
}

TEST_CASE("an unfinished run flags its cell") {
    auto root = fresh_root("partial");
    auto dir = write_run(root, "td3", 1, "mdp", 0, {-500.0, -400.0});
    // chop the last eval line so the run looks interrupted
    {
        std::ofstream ev(dir + "/eval.csv");
        ev << "step,ep_ret_1,mean\n1000,-500,-500\n";
    }
    auto run = load_run_dir(dir);
    CHECK(run.complete == false);
    auto table = make_table({run});
    CHECK(table.text.find("[incomplete]") != std::string::npos);
    fs::remove_all(root);
}

TEST_CASE("plot bands collapse to zero width for a single seed") {
    auto root = fresh_root("band1");
    auto plot = make_plot({load_run_dir(write_run(root, "td3", 1, "mdp", 0, {-500.0, -400.0, -450.0}))}, 1.0);
    // every half_std column entry is zero
    std::istringstream csv(plot.csv);
    std::string line;
    std::getline(csv, line);
    CHECK(line == "step,td3_mean,td3_half_std");
    while (std::getline(csv, line)) CHECK(line.substr(line.rfind(',') + 1) == "0");
    fs::remove_all(root);
}

TEST_CASE("three identical seeds give a zero band equal to the curve") {
    auto root = fresh_root("band3");
    std::vector<double> means{-500.0, -350.0, -420.0, -380.0};
    std::vector<RunData> runs;
    for (std::uint64_t s : {0, 1, 2})
        runs.push_back(load_run_dir(write_run(root, "sac", 1, "mdp", s, means)));
    auto plot = make_plot(runs, 1.0);
    auto smoothed = gaussian_smooth(means, 1.0);
    std::istringstream csv(plot.csv);
    std::string line;
    std::getline(csv, line);
    int row = 0;
    while (std::getline(csv, line)) {
        auto c1 = line.find(',');
        auto c2 = line.find(',', c1 + 1);
        double mean = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
        double half = std::stod(line.substr(c2 + 1));
        CHECK(mean == doctest::Approx(smoothed[row]).epsilon(1e-12));
        CHECK(half < 1e-12);  // (x+x+x)/3 can differ from x in the last bit
        ++row;
    }
    CHECK(row == 4);
    fs::remove_all(root);
}

TEST_CASE("plot output is deterministic across calls") {
    auto root = fresh_root("stable");
    std::vector<RunData> runs{
        load_run_dir(write_run(root, "td3", 1, "rv", 0, {-800.0, -700.0, -650.0})),
        load_run_dir(write_run(root, "td3", 1, "rv", 1, {-750.0, -720.0, -600.0})),
    };
    auto a = make_plot(runs, 1.5);
    auto b = make_plot(runs, 1.5);
    CHECK(a.svg == b.svg);
    CHECK(a.csv == b.csv);
    auto ta = make_table(runs);
    auto tb = make_table(runs);
    CHECK(ta.text == tb.text);
    CHECK(ta.csv == tb.csv);
    fs::remove_all(root);
}

TEST_CASE("runs on different grids resample onto the coarsest") {
    auto root = fresh_root("grid");
    std::vector<RunData> runs{
        load_run_dir(write_run(root, "td3", 1, "mdp", 0, {-800.0, -600.0}, 2000)),
        load_run_dir(write_run(root, "sac", 1, "mdp", 0, {-900.0, -850.0, -700.0, -500.0}, 1000)),
    };
    auto plot = make_plot(runs, 1.0);
    std::istringstream csv(plot.csv);
    std::string line;
    std::getline(csv, line);
    int rows = 0;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 2);  // the 2000-step grid wins
    fs::remove_all(root);
}

TEST_CASE("loading a non-run directory fails cleanly") {
    CHECK_THROWS_AS(load_run_dir("/definitely/not/there"), std::runtime_error);
}
