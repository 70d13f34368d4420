#include "posuite/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

using nlohmann::json;

namespace posuite {

namespace {

std::string algo_label_from_config(const json& j) {
    std::string algo = j["algo"];
    if (algo == "mtd3" || algo == "msac") return algo + "(" + std::to_string(int(j["n"])) + ")";
    if (algo == "ppo") {
        std::string label = "ppo(l=" + format_double(double(j["lambda"])) + ")";
        if (double(j["clip_eps"]) != 0.2) label += "[eps=" + format_double(double(j["clip_eps"])) + "]";
        return label;
    }
    if (algo == "ppon") {
        std::string label = "ppon(" + std::to_string(int(j["n"])) + ")";
        if (double(j["clip_eps"]) != 0.2) label += "[eps=" + format_double(double(j["clip_eps"])) + "]";
        return label;
    }
    return algo;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / v.size();
}

}  // namespace

RunData load_run_dir(const std::string& dir) {
    std::ifstream cf(dir + "/config.json");
    if (!cf) throw std::runtime_error("not a run directory (no config.json): " + dir);
    json j = json::parse(cf);
    RunData run;
    run.dir = dir;
    run.env = j["env"];
    run.mode = j["pomdp_mode"];
    run.seed = j["seed"];
    run.total_steps = j["total_steps"];
    run.algo_label = algo_label_from_config(j);
    run.records = read_eval_csv(dir + "/eval.csv");
    long eval_every = j["eval_every"];
    long last_scheduled = (run.total_steps / eval_every) * eval_every;
    run.complete = !run.records.empty() && run.records.back().step >= last_scheduled;
    return run;
}

TableOutput make_table(const std::vector<RunData>& runs) {
    // cell key: (env|mode) row, algo column
    struct Cell {
        std::vector<double> per_seed_max;
        std::vector<const RunData*> members;
        bool has_incomplete = false;
    };
    std::map<std::pair<std::string, std::string>, std::map<std::string, Cell>> rows;
    std::set<std::string> algos;
    size_t max_seeds = 0;
    for (const auto& r : runs) {
        auto& cell = rows[{r.env, r.mode}][r.algo_label];
        cell.per_seed_max.push_back(max_avg_return(r.records));
        cell.members.push_back(&r);
        if (!r.complete) cell.has_incomplete = true;
        algos.insert(r.algo_label);
        max_seeds = std::max(max_seeds, cell.per_seed_max.size());
    }

    auto max_of_mean_curve = [](const Cell& c) {
        size_t len = SIZE_MAX;
        for (const auto* r : c.members) len = std::min(len, r->records.size());
        double best = -1e300;
        for (size_t i = 0; i < len; ++i) {
            double m = 0.0;
            for (const auto* r : c.members) m += r->records[i].mean;
            best = std::max(best, m / c.members.size());
        }
        return best;
    };

    std::ostringstream text, csv;
    csv << "env,mode,algo,seeds,complete,max_per_seed_mean,max_of_mean_curve\n";

    // column widths
    size_t roww = 4;
    for (const auto& [key, cols] : rows) roww = std::max(roww, key.first.size() + key.second.size() + 1);
    std::vector<std::string> algo_list(algos.begin(), algos.end());
    size_t colw = 12;
    for (const auto& a : algo_list) colw = std::max(colw, a.size() + 2);

    text << std::string(roww, ' ');
    for (const auto& a : algo_list) text << "  " << a << std::string(colw - a.size(), ' ');
    text << "\n";

    for (const auto& [key, cols] : rows) {
        std::string row_name = key.first + "/" + key.second;
        // best per row on the per-seed-max mean
        std::string best_algo;
        double best_val = -1e300;
        for (const auto& [a, cell] : cols) {
            double v = mean_of(cell.per_seed_max);
            if (v > best_val) {
                best_val = v;
                best_algo = a;
            }
        }
        text << row_name << std::string(roww - row_name.size(), ' ');
        for (const auto& a : algo_list) {
            auto it = cols.find(a);
            std::string cell_text;
            if (it == cols.end()) {
                cell_text = "-";
            } else {
                const Cell& cell = it->second;
                double v = mean_of(cell.per_seed_max);
                char buf[64];
                std::snprintf(buf, sizeof(buf), "%.1f", v);
                cell_text = buf;
                if (a == best_algo) cell_text += "*";
                if (cell.per_seed_max.size() < max_seeds)
                    cell_text += " (n=" + std::to_string(cell.per_seed_max.size()) + "/" +
                                 std::to_string(max_seeds) + " seeds)";
                if (cell.has_incomplete) cell_text += " [incomplete]";
                csv << key.first << "," << key.second << "," << a << "," << cell.per_seed_max.size() << ","
                    << (cell.has_incomplete ? "no" : "yes") << "," << format_double(v) << ","
                    << format_double(max_of_mean_curve(cell)) << "\n";
            }
            text << "  " << cell_text
                 << (cell_text.size() < colw ? std::string(colw - cell_text.size(), ' ') : "");
        }
        text << "\n";
    }
    return {text.str(), csv.str()};
}

PlotOutput make_plot(const std::vector<RunData>& runs, double sigma) {
    if (runs.empty()) throw std::invalid_argument("plot: no runs");

    // coarsest common grid: the step list with the fewest points
    const RunData* grid_run = &runs.front();
    bool mismatch = false;
    for (const auto& r : runs) {
        if (r.records.size() != grid_run->records.size()) mismatch = true;
        if (r.records.size() < grid_run->records.size()) grid_run = &r;
    }
    if (mismatch)
        std::cerr << "warning: eval grids differ, resampling to the coarsest (" << grid_run->dir << ")\n";
    std::vector<long> grid;
    for (const auto& rec : grid_run->records) grid.push_back(rec.step);

    auto resample = [&](const RunData& r) {
        std::vector<double> out;
        out.reserve(grid.size());
        for (long s : grid) {
            // linear interpolation on the run's own grid
            const auto& recs = r.records;
            if (s <= recs.front().step) {
                out.push_back(recs.front().mean);
                continue;
            }
            if (s >= recs.back().step) {
                out.push_back(recs.back().mean);
                continue;
            }
            size_t hi = 0;
            while (recs[hi].step < s) ++hi;
            if (recs[hi].step == s) {
                out.push_back(recs[hi].mean);
            } else {
                const auto& a = recs[hi - 1];
                const auto& b = recs[hi];
                double w = double(s - a.step) / double(b.step - a.step);
                out.push_back((1.0 - w) * a.mean + w * b.mean);
            }
        }
        return out;
    };

    // per-seed smoothing, then mean +- std/2 across seeds per algorithm
    std::map<std::string, std::vector<std::vector<double>>> by_algo;
    for (const auto& r : runs) by_algo[r.algo_label].push_back(gaussian_smooth(resample(r), sigma));

    struct Curve {
        std::string label;
        std::vector<double> mean, half_std;
    };
    std::vector<Curve> curves;
    for (const auto& [label, seeds] : by_algo) {
        Curve c;
        c.label = label;
        for (size_t i = 0; i < grid.size(); ++i) {
            double m = 0.0;
            for (const auto& s : seeds) m += s[i];
            m /= seeds.size();
            double var = 0.0;
            for (const auto& s : seeds) var += (s[i] - m) * (s[i] - m);
            c.mean.push_back(m);
            c.half_std.push_back(0.5 * std::sqrt(var / seeds.size()));
        }
        curves.push_back(std::move(c));
    }

    std::ostringstream csv;
    csv << "step";
    for (const auto& c : curves) csv << "," << c.label << "_mean," << c.label << "_half_std";
    csv << "\n";
    for (size_t i = 0; i < grid.size(); ++i) {
        csv << grid[i];
        for (const auto& c : curves) csv << "," << format_double(c.mean[i]) << "," << format_double(c.half_std[i]);
        csv << "\n";
    }

    // SVG
    double lo = 1e300, hi = -1e300;
    for (const auto& c : curves)
        for (size_t i = 0; i < c.mean.size(); ++i) {
            lo = std::min(lo, c.mean[i] - c.half_std[i]);
            hi = std::max(hi, c.mean[i] + c.half_std[i]);
        }
    if (hi <= lo) hi = lo + 1.0;
    const double W = 800, H = 500, ml = 70, mr = 20, mt = 30, mb = 50;
    auto x_of = [&](size_t i) {
        return grid.size() > 1 ? ml + (W - ml - mr) * double(i) / double(grid.size() - 1) : ml;
    };
    auto y_of = [&](double v) { return mt + (H - mt - mb) * (1.0 - (v - lo) / (hi - lo)); };
    const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" data-generator=\"" << kGeneratorVersion << "\">\n";
    svg << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << (H - mb) << "\" x2=\"" << (W - mr) << "\" y2=\"" << (H - mb)
        << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << (H - mb)
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << (W / 2) << "\" y=\"" << (H - 12) << "\" text-anchor=\"middle\" font-size=\"13\">"
        << "environment steps</text>\n";
    svg << "<text x=\"16\" y=\"" << (H / 2) << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
        << (H / 2) << ")\">average return</text>\n";
    svg << "<text x=\"" << (ml - 6) << "\" y=\"" << (y_of(lo) + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
        << format_double(lo) << "</text>\n";
    svg << "<text x=\"" << (ml - 6) << "\" y=\"" << (y_of(hi) + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
        << format_double(hi) << "</text>\n";
    svg << "<text x=\"" << (W - mr) << "\" y=\"" << (H - mb + 16) << "\" text-anchor=\"end\" font-size=\"11\">"
        << grid.back() << "</text>\n";

    for (size_t ci = 0; ci < curves.size(); ++ci) {
        const auto& c = curves[ci];
        const char* color = palette[ci % 8];
        svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
        for (size_t i = 0; i < grid.size(); ++i)
            svg << format_double(x_of(i)) << "," << format_double(y_of(c.mean[i] + c.half_std[i])) << " ";
        for (size_t i = grid.size(); i-- > 0;)
            svg << format_double(x_of(i)) << "," << format_double(y_of(c.mean[i] - c.half_std[i])) << " ";
        svg << "\"/>\n";
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (size_t i = 0; i < grid.size(); ++i)
            svg << format_double(x_of(i)) << "," << format_double(y_of(c.mean[i])) << " ";
        svg << "\"/>\n";
        svg << "<text x=\"" << (W - mr - 140) << "\" y=\"" << (mt + 16 * (ci + 1)) << "\" font-size=\"12\" fill=\""
            << color << "\">" << c.label << "</text>\n";
    }
    svg << "</svg>\n";
    return {svg.str(), csv.str()};
}

}  // namespace posuite
