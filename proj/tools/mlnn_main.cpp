#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mlnn/experiment.hpp"
#include "mlnn/grad_check.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_run(const fs::path& config_path, const fs::path& output, bool quiet)
{
    mlnn::ExperimentConfig config;
    try {
        config = mlnn::load_config(config_path);
    } catch (const mlnn::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return mlnn::kExitConfig;
    }
    const fs::path dir = mlnn::resolve_output_dir(config, config_path, output);
    std::cerr << "writing " << dir.string() << "\n";
    const mlnn::ExperimentOutcome outcome = mlnn::run_experiment(config, dir, quiet ? nullptr : &std::cerr);
    if (!outcome.result.ok()) {
        std::cerr << "run stopped: " << outcome.result.error << "\n";
        return mlnn::kExitRuntime;
    }
    return mlnn::kExitOk;
}

int cmd_grad_check(int seeds)
{
    mlnn::GradCheckOptions options;
    options.seeds = seeds;
    const mlnn::GradCheckReport report = mlnn::run_grad_check(options, &std::cout);
    return report.passed ? mlnn::kExitOk : mlnn::kExitRuntime;
}

int cmd_report(const fs::path& dir)
{
    const auto rows = mlnn::write_report(dir);
    std::cout << "wrote " << (dir / "report.csv").string() << " (" << rows.size() << " rows)\n";
    return mlnn::kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multi-level neural network solver for linear boundary-value problems"};
    app.set_version_flag("--version", MLNN_VERSION);
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Cap on worker threads (0 keeps the runtime default)")
        ->check(CLI::NonNegativeNumber);

    fs::path config_path;
    fs::path output;
    bool quiet = false;
    auto* run = app.add_subcommand("run", "Train every level of an experiment config");
    run->add_option("config", config_path, "Experiment config file")->required();
    run->add_option("-o,--output", output,
                    std::string("Run directory (default: $") + mlnn::kOutputRootEnv + "/<config name>)");
    run->add_flag("-q,--quiet", quiet, "No progress output");

    int seeds = 5;
    auto* grad = app.add_subcommand("grad-check", "Finite-difference check of all derivative passes");
    grad->add_option("--seeds", seeds, "Random parameter draws per case")->check(CLI::PositiveNumber);

    fs::path run_dir;
    auto* report = app.add_subcommand("report", "Merge level histories of a finished run");
    report->add_option("dir", run_dir, "Run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? mlnn::kExitOk : mlnn::kExitConfig;
    }
#ifdef _OPENMP
    if (threads > 0) {
        omp_set_num_threads(threads);
    }
#endif
    try {
        if (*run) {
            return cmd_run(config_path, output, quiet);
        }
        if (*grad) {
            return cmd_grad_check(seeds);
        }
        return cmd_report(run_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return mlnn::kExitRuntime;
    }
}
