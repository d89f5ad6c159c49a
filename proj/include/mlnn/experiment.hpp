#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "mlnn/config.hpp"
#include "mlnn/multilevel.hpp"

namespace mlnn {

/// Environment variable naming the directory under which runs are written
/// when neither the command line nor the config gives one.
inline constexpr const char* kOutputRootEnv = "MLNN_OUTPUT_ROOT";

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitConfig = 2 };

/// Decimal with 17 significant digits, so every double round-trips.
std::string format_real(double v);
double parse_real(std::string_view text);

/// iteration,phase,loss,l2,h1 with empty cells for metrics that were not computed.
void write_history_csv(const std::filesystem::path& path, const std::vector<TrainRow>& rows);
std::vector<TrainRow> read_history_csv(const std::filesystem::path& path);

/// x[,y],exact,composite,error on the evaluation grid.
void write_solution_csv(const std::filesystem::path& path, const CompositeSolution& comp, const ProblemDef& problem,
                        const Points& grid);

nlohmann::json summary_json(const ExperimentConfig& config, const MultilevelResult& result);

/// Run directory: `override_dir` if set, else the config's output_dir, else
/// <root>/<config stem>. Relative config directories are resolved against
/// the root, which is $MLNN_OUTPUT_ROOT or "runs".
std::filesystem::path resolve_output_dir(const ExperimentConfig& config, const std::filesystem::path& config_path,
                                         const std::filesystem::path& override_dir);

struct ExperimentOutcome {
    MultilevelResult result;
    std::filesystem::path directory;
};

/// Runs every level and writes history_<i>.csv, solution.csv and summary.json.
/// Outputs are flushed even when training stops on a non-finite value.
ExperimentOutcome run_experiment(const ExperimentConfig& config, const std::filesystem::path& directory,
                                 std::ostream* log = nullptr);

/// One row of report.csv.
struct ReportRow {
    int level = 0;
    long long cumulative_iteration = 0;
    TrainRow row;
};

/// Merges the level histories of a finished run into report.csv and writes
/// plot_report.py next to it. Throws Error for missing or incomplete runs.
std::vector<ReportRow> write_report(const std::filesystem::path& run_dir);
std::vector<ReportRow> read_report_csv(const std::filesystem::path& path);

} // namespace mlnn
