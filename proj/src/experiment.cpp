#include "mlnn/experiment.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

namespace mlnn {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    return out;
}

std::string optional_real(double v)
{
    return std::isnan(v) ? std::string() : format_real(v);
}

std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) {
            return cells;
        }
        start = comma + 1;
    }
}

double optional_parse(const std::string& cell)
{
    return cell.empty() ? std::numeric_limits<double>::quiet_NaN() : parse_real(cell);
}

int parse_int(const std::string& cell)
{
    int v = 0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw Error("malformed integer '" + cell + "'");
    }
    return v;
}

std::vector<std::string> read_lines(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot read " + path.string());
    }
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!line.empty()) {
            lines.push_back(line);
        }
    }
    return lines;
}

nlohmann::json metrics_json(const ErrorMetrics& m)
{
    return {{"l2", m.l2}, {"h1", m.h1}, {"max_pointwise", m.max_pointwise}};
}

const char* kPlotScript = R"(# Plots the merged convergence history written by `mlnn report`.
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "report.csv"
rows = list(csv.DictReader(open(path)))
it = [int(r["cumulative_iteration"]) for r in rows]
level = [int(r["level"]) for r in rows]

fig, (ax_loss, ax_err) = plt.subplots(1, 2, figsize=(11, 4))
ax_loss.semilogy(it, [float(r["loss"]) for r in rows], lw=0.8)
ax_loss.set_title("loss")
for key in ("l2", "h1"):
    pts = [(i, float(r[key])) for i, r in zip(it, rows) if r[key]]
    if pts:
        ax_err.semilogy(*zip(*pts), lw=0.8, label=key.upper())
ax_err.set_title("error")
ax_err.legend()
for ax in (ax_loss, ax_err):
    for lv in sorted(set(level))[1:]:
        ax.axvline(it[level.index(lv)], color="grey", ls=":", lw=0.8)
    ax.set_xlabel("iteration")
fig.tight_layout()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
)";

} // namespace

std::string format_real(double v)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, ptr);
}

double parse_real(std::string_view text)
{
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw Error("malformed number '" + std::string(text) + "'");
    }
    return v;
}

void write_history_csv(const fs::path& path, const std::vector<TrainRow>& rows)
{
    std::ofstream out = open_out(path);
    out << "iteration,phase,loss,l2,h1\n";
    for (const TrainRow& r : rows) {
        out << r.iteration << ',' << to_string(r.phase) << ',' << format_real(r.loss) << ',' << optional_real(r.l2)
            << ',' << optional_real(r.h1) << '\n';
    }
}

std::vector<TrainRow> read_history_csv(const fs::path& path)
{
    const auto lines = read_lines(path);
    if (lines.empty() || lines.front() != "iteration,phase,loss,l2,h1") {
        throw Error(path.string() + ": not a history file");
    }
    std::vector<TrainRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto c = split_csv(lines[i]);
        if (c.size() != 5) {
            throw Error(path.string() + ": line " + std::to_string(i + 1) + " has " + std::to_string(c.size()) +
                        " cells");
        }
        TrainRow r;
        r.iteration = parse_int(c[0]);
        r.phase = parse_phase(c[1]);
        r.loss = parse_real(c[2]);
        r.l2 = optional_parse(c[3]);
        r.h1 = optional_parse(c[4]);
        rows.push_back(r);
    }
    return rows;
}

void write_solution_csv(const fs::path& path, const CompositeSolution& comp, const ProblemDef& problem,
                        const Points& grid)
{
    const BundleBatch u = composite_eval(comp, grid);
    std::ofstream out = open_out(path);
    out << (problem.dim == 1 ? "x" : "x,y") << ",exact,composite,error\n";
    for (Eigen::Index p = 0; p < grid.cols(); ++p) {
        for (int j = 0; j < problem.dim; ++j) {
            out << format_real(grid(j, p)) << ',';
        }
        const double exact = problem.exact_value(point_at(grid, p));
        out << format_real(exact) << ',' << format_real(u.value(p)) << ',' << format_real(exact - u.value(p))
            << '\n';
    }
}

nlohmann::json summary_json(const ExperimentConfig& config, const MultilevelResult& result)
{
    nlohmann::json j;
    j["version"] = MLNN_VERSION;
    j["complete"] = result.ok();
    j["error"] = result.error;
    j["problem"] = {{"label", config.problem}, {"parameters", config.problem_parameters}};
    double total = 0.0;
    nlohmann::json levels = nlohmann::json::array();
    for (const LevelResult& l : result.levels) {
        nlohmann::json e;
        e["level"] = l.level;
        e["mu"] = l.mu;
        if (l.estimate) {
            e["elm"] = {{"amplitude", l.estimate->amplitude},
                        {"condition", l.estimate->condition},
                        {"misfit", l.estimate->misfit},
                        {"wavenumbers", l.estimate->wavenumbers},
                        {"converged", l.estimate->converged}};
        } else {
            e["elm"] = nullptr;
        }
        e["final_loss"] = l.final_loss;
        e["metrics"] = metrics_json(l.metrics);
        e["adam_iterations"] = l.record.count(Phase::Adam);
        e["lbfgs_iterations"] = l.record.count(Phase::Lbfgs);
        e["line_search_failed"] = l.record.line_search_failed;
        e["stop_reason"] = l.record.stop_reason;
        e["collocation_points"] = l.collocation_points;
        e["wall_seconds"] = l.wall_seconds;
        total += l.wall_seconds;
        levels.push_back(std::move(e));
    }
    j["levels"] = std::move(levels);
    j["wall_seconds"] = total;
    j["config"] = render_config(config);
    return j;
}

fs::path resolve_output_dir(const ExperimentConfig& config, const fs::path& config_path, const fs::path& override_dir)
{
    if (!override_dir.empty()) {
        return override_dir;
    }
    const char* env = std::getenv(kOutputRootEnv);
    const fs::path root = env && *env ? fs::path(env) : fs::path("runs");
    if (!config.output_dir.empty()) {
        const fs::path dir(config.output_dir);
        return dir.is_absolute() ? dir : root / dir;
    }
    return root / config_path.stem();
}

ExperimentOutcome run_experiment(const ExperimentConfig& config, const fs::path& directory, std::ostream* log)
{
    const ProblemDef problem = make_problem(config.problem, config.problem_parameters);
    MultilevelOptions options = config.options;
    if (log) {
        options.progress = [log](int level, const TrainRow& row) {
            if (row.iteration % 1000 == 0 || (row.phase == Phase::Lbfgs && row.iteration % 100 == 0)) {
                *log << "level " << level << " " << to_string(row.phase) << " " << row.iteration
                     << " loss " << format_real(row.loss) << "\n";
            }
        };
    }
    fs::create_directories(directory);
    ExperimentOutcome outcome{run_multilevel(problem, config.levels, options), directory};
    const MultilevelResult& result = outcome.result;

    for (const LevelResult& l : result.levels) {
        write_history_csv(directory / ("history_" + std::to_string(l.level) + ".csv"), l.record.rows);
    }
    const Points grid = evaluation_grid(problem, options);
    write_solution_csv(directory / "solution.csv", result.composite, problem, grid);
    nlohmann::json summary = summary_json(config, result);
    summary["final"] = metrics_json(error_metrics(result.composite, problem, grid));
    open_out(directory / "summary.json") << summary.dump(2) << "\n";
    if (log) {
        for (const LevelResult& l : result.levels) {
            *log << "level " << l.level << ": mu " << format_real(l.mu) << ", loss " << format_real(l.final_loss)
                 << ", L2 " << format_real(l.metrics.l2) << ", H1 " << format_real(l.metrics.h1) << ", max "
                 << format_real(l.metrics.max_pointwise) << ", " << l.wall_seconds << " s\n";
        }
    }
    return outcome;
}

std::vector<ReportRow> write_report(const fs::path& run_dir)
{
    if (!fs::is_directory(run_dir)) {
        throw Error(run_dir.string() + ": not a directory");
    }
    const fs::path summary_path = run_dir / "summary.json";
    if (!fs::exists(summary_path)) {
        throw Error(run_dir.string() + ": no summary.json, not a completed run");
    }
    nlohmann::json summary;
    try {
        std::ifstream in(summary_path);
        summary = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(summary_path.string() + ": " + e.what());
    }
    if (!summary.value("complete", false)) {
        throw Error(run_dir.string() + ": run did not complete (" + summary.value("error", std::string()) + ")");
    }
    const std::size_t num_levels = summary.at("levels").size();
    std::vector<ReportRow> report;
    long long cumulative = 0;
    for (std::size_t i = 0; i < num_levels; ++i) {
        const fs::path hist = run_dir / ("history_" + std::to_string(i) + ".csv");
        if (!fs::exists(hist)) {
            throw Error(run_dir.string() + ": missing " + hist.filename().string());
        }
        for (const TrainRow& row : read_history_csv(hist)) {
            report.push_back({static_cast<int>(i), ++cumulative, row});
        }
    }
    std::ofstream out = open_out(run_dir / "report.csv");
    out << "level,cumulative_iteration,iteration,phase,loss,l2,h1\n";
    for (const ReportRow& r : report) {
        out << r.level << ',' << r.cumulative_iteration << ',' << r.row.iteration << ',' << to_string(r.row.phase)
            << ',' << format_real(r.row.loss) << ',' << optional_real(r.row.l2) << ',' << optional_real(r.row.h1)
            << '\n';
    }
    open_out(run_dir / "plot_report.py") << kPlotScript;
    return report;
}

std::vector<ReportRow> read_report_csv(const fs::path& path)
{
    const auto lines = read_lines(path);
    if (lines.empty() || lines.front() != "level,cumulative_iteration,iteration,phase,loss,l2,h1") {
        throw Error(path.string() + ": not a report file");
    }
    std::vector<ReportRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto c = split_csv(lines[i]);
        if (c.size() != 7) {
            throw Error(path.string() + ": line " + std::to_string(i + 1) + " is malformed");
        }
        ReportRow r;
        r.level = parse_int(c[0]);
        r.cumulative_iteration = parse_int(c[1]);
        r.row.iteration = parse_int(c[2]);
        r.row.phase = parse_phase(c[3]);
        r.row.loss = parse_real(c[4]);
        r.row.l2 = optional_parse(c[5]);
        r.row.h1 = optional_parse(c[6]);
        rows.push_back(r);
    }
    return rows;
}

} // namespace mlnn
