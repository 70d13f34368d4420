#pragma once

#include <optional>
#include <string>
#include <vector>

#include "posuite/harness.hpp"

namespace posuite {

// One completed (or partial) run directory on disk.
struct RunData {
    std::string dir;
    std::string env;
    std::string mode;
    std::string algo_label;  // e.g. "mtd3(5)" or "ppo(lambda=0.97,eps=0.2)"
    std::uint64_t seed = 0;
    long total_steps = 0;
    std::vector<EvalRecord> records;
    bool complete = false;  // reached the last scheduled eval
};

RunData load_run_dir(const std::string& dir);

struct TableOutput {
    std::string text;
    std::string csv;
};

// Rows (env, mode) x columns algorithms; cells aggregate max_avg_return
// across seeds. Incomplete cells are flagged, best cell per row marked.
TableOutput make_table(const std::vector<RunData>& runs);

struct PlotOutput {
    std::string svg;
    std::string csv;
};

// Smoothed mean curve per algorithm with a +-std/2 band across seeds.
PlotOutput make_plot(const std::vector<RunData>& runs, double sigma = 20.0);

}  // namespace posuite
