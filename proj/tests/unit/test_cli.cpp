#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mlnn/config.hpp"
#include "mlnn/experiment.hpp"

using namespace mlnn;
namespace fs = std::filesystem;

namespace {

const char* kTiny = R"(# two small levels
[experiment]
problem = poisson1d
k = 2
seed = 3
collocation_1d = 128
eval_1d = 256
elm_eval_1d = 128
metric_stride_adam = 5

[level 0]
width = 6
wavenumbers = 1
adam_iterations = 30
lbfgs_iterations = 10

[level 1]
width = 6
wavenumbers = 2
adam_iterations = 30
lbfgs_iterations = 10
)";

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("mlnn_unit_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string config_error(const std::string& text)
{
    try {
        (void)parse_config(text, "t.cfg");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("parse a config")
{
    const ExperimentConfig c = parse_config(kTiny);
    CHECK(c.problem == "poisson1d");
    CHECK(c.problem_parameters.at("k") == 2.0);
    CHECK(c.seed == 3);
    CHECK(c.options.collocation_1d == 128);
    CHECK(c.options.metric_stride_adam == 5);
    REQUIRE(c.levels.size() == 2);
    CHECK(c.levels[0].pinned_mu == 1.0);
    CHECK_FALSE(c.levels[1].pinned_mu.has_value());
    CHECK(c.levels[1].seed == 4);
    CHECK(c.levels[1].network.kind == ArchitectureKind::FourierSine);
    CHECK(c.levels[1].network.num_wavenumbers == 2);
    CHECK(c.levels[0].adam.learning_rate == 1e-2);
}

TEST_CASE("rendered config parses back to the same text")
{
    const ExperimentConfig c = parse_config(kTiny);
    const std::string once = render_config(c);
    CHECK(render_config(parse_config(once)) == once);
}

TEST_CASE("config errors carry file and line")
{
    CHECK(config_error("[experiment]\nk = 2\n[level 0]\nwidth = 3\nwavenumbers = 1\n").find("t.cfg:1:") == 0);
    CHECK(config_error("[experiment]\nk = 2\n[level 0]\nwidth = 3\nwavenumbers = 1\n").find("'problem'") !=
          std::string::npos);
    CHECK(config_error("[experiment]\nproblem = poisson1d\nk = 2\nfoo = 1\n[level 0]\nwidth = 3\n")
              .find("t.cfg:4: unknown key 'foo'") == 0);
    CHECK(config_error("[experiment]\nproblem = poisson1d\nk = 2\n[level 0]\nwidth = x\n").find("t.cfg:5:") == 0);
    CHECK(config_error("[experiment]\nproblem = poisson1d\n[level 0]\nwidth = 3\nwavenumbers = 1\n")
              .find("'k'") != std::string::npos);
    CHECK(config_error("[experiment]\nproblem = heat\n").find("t.cfg:2: unknown problem") == 0);
    CHECK(config_error("[experiment]\nproblem = poisson2d\n").find("level") != std::string::npos);
    CHECK(config_error("[experiment]\nproblem = poisson2d\n[level 1]\nwidth = 3\nwavenumbers = 1\n")
              .find("t.cfg:3:") == 0);
    CHECK(config_error("[experiment]\nproblem = poisson2d\n[level 0]\nwidth = 3\n").find("t.cfg:3:") == 0);
    CHECK(config_error("[experiment]\nproblem = poisson2d\n[level 0]\nwidth = 3\nwidth = 4\n")
              .find("t.cfg:5: duplicate key") == 0);
    CHECK(config_error("[experiment]\nproblem = poisson2d\n[level 0]\nwidth = 3\nwavenumbers = 1\nmu = -1\n")
              .find("t.cfg:6:") == 0);
    CHECK(config_error("problem = poisson2d\n").find("t.cfg:1:") == 0);
    CHECK(config_error("[experiment]\nproblem = poisson1d\nk = 2\ncollocation_1d = 64\n[level 0]\nwidth = 3\n"
                       "wavenumbers = 1\n[level 1]\nwidth = 3\nwavenumbers = 2\n")
              .find("t.cfg:8: [level 1]: the ELM basis has 102 unknowns") == 0);
    CHECK(config_error("[experiment]\nproblem = helmholtz1d\nkappa_sq = 9.869604401089358\n[level 0]\nwidth = 3\n"
                       "wavenumbers = 1\n")
              .find("t.cfg:2:") == 0);
}

TEST_CASE("bundled configs parse")
{
    int seen = 0;
    for (const auto& entry : fs::directory_iterator(MLNN_CONFIG_DIR)) {
        if (entry.path().extension() == ".cfg") {
            CHECK_NOTHROW((void)load_config(entry.path()));
            ++seen;
        }
    }
    CHECK(seen >= 8);
    const ExperimentConfig k10 = load_config(fs::path(MLNN_CONFIG_DIR) / "poisson1d_k10.cfg");
    REQUIRE(k10.levels.size() == 4);
    const int widths[] = {10, 20, 40, 40};
    const int adam[] = {4000, 4000, 4000, 10000};
    const int lbfgs[] = {500, 1000, 1500, 0};
    const int M[] = {4, 6, 8, 2};
    for (int i = 0; i < 4; ++i) {
        CHECK(k10.levels[i].network.hidden_widths == std::vector<int>{widths[i]});
        CHECK(k10.levels[i].adam.num_iterations == adam[i]);
        CHECK(k10.levels[i].lbfgs.num_iterations == lbfgs[i]);
        CHECK(k10.levels[i].network.num_wavenumbers == M[i]);
    }
}

TEST_CASE("reals round-trip through text")
{
    SplitMix64 rng(8);
    for (int i = 0; i < 1000; ++i) {
        const double v = std::ldexp(rng.uniform(-1, 1), static_cast<int>(rng.next() % 200) - 100);
        CHECK(parse_real(format_real(v)) == v);
    }
    CHECK_THROWS_AS(parse_real("1.0x"), Error);
}

TEST_CASE("history csv round-trip")
{
    const fs::path dir = scratch("history");
    fs::create_directories(dir);
    std::vector<TrainRow> rows;
    SplitMix64 rng(2);
    for (int i = 1; i <= 50; ++i) {
        TrainRow r;
        r.iteration = i;
        r.phase = i > 40 ? Phase::Lbfgs : Phase::Adam;
        r.loss = std::exp(rng.uniform(-30, 5));
        if (i % 3 == 0) {
            r.l2 = rng.uniform() * 1e-7;
            r.h1 = rng.uniform() * 1e-5;
        }
        rows.push_back(r);
    }
    write_history_csv(dir / "h.csv", rows);
    const auto back = read_history_csv(dir / "h.csv");
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].iteration == rows[i].iteration);
        CHECK(back[i].phase == rows[i].phase);
        CHECK(back[i].loss == rows[i].loss);
        CHECK((std::isnan(rows[i].l2) ? std::isnan(back[i].l2) : back[i].l2 == rows[i].l2));
        CHECK((std::isnan(rows[i].h1) ? std::isnan(back[i].h1) : back[i].h1 == rows[i].h1));
    }
    fs::remove_all(dir);
}

TEST_CASE("run, rerun and report")
{
    const ExperimentConfig c = parse_config(kTiny);
    const fs::path a = scratch("run_a");
    const fs::path b = scratch("run_b");
    const ExperimentOutcome ra = run_experiment(c, a);
    const ExperimentOutcome rb = run_experiment(c, b);
    REQUIRE(ra.result.ok());
    for (const char* f : {"history_0.csv", "history_1.csv", "solution.csv"}) {
        REQUIRE(fs::exists(a / f));
        CHECK(slurp(a / f) == slurp(b / f));
    }

    const nlohmann::json summary = nlohmann::json::parse(slurp(a / "summary.json"));
    CHECK(summary["complete"] == true);
    CHECK(summary["levels"].size() == 2);
    CHECK(summary["version"] == MLNN_VERSION);
    CHECK(summary["levels"][0]["mu"] == 1.0);
    // The config echo is enough to rerun the experiment.
    const ExperimentConfig echoed = parse_config(summary["config"].get<std::string>());
    CHECK(render_config(echoed) == render_config(c));

    const auto solution = slurp(a / "solution.csv");
    CHECK(solution.rfind("x,exact,composite,error\n", 0) == 0);

    const auto report = write_report(a);
    std::size_t logged = 0;
    for (int i = 0; i < 2; ++i) {
        logged += read_history_csv(a / ("history_" + std::to_string(i) + ".csv")).size();
    }
    REQUIRE(report.size() == logged);
    CHECK(report.back().cumulative_iteration == static_cast<long long>(logged));
    CHECK(report.front().level == 0);
    CHECK(report.back().level == 1);
    CHECK(fs::exists(a / "plot_report.py"));

    const auto parsed = read_report_csv(a / "report.csv");
    REQUIRE(parsed.size() == report.size());
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        CHECK(parsed[i].level == report[i].level);
        CHECK(parsed[i].cumulative_iteration == report[i].cumulative_iteration);
        CHECK(parsed[i].row.loss == report[i].row.loss);
        CHECK(parsed[i].row.iteration == report[i].row.iteration);
    }
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("report rejects incomplete runs")
{
    const fs::path empty = scratch("empty");
    fs::create_directories(empty);
    CHECK_THROWS_AS(write_report(empty), Error);
    CHECK_THROWS_AS(write_report(empty / "missing"), Error);
    std::ofstream(empty / "summary.json") << R"({"complete": false, "error": "level 1: non-finite loss", "levels": []})";
    CHECK_THROWS_AS(write_report(empty), Error);
    fs::remove_all(empty);
}

TEST_CASE("output directory resolution")
{
    ExperimentConfig c = parse_config(kTiny);
    CHECK(resolve_output_dir(c, "configs/x.cfg", "/tmp/o") == fs::path("/tmp/o"));
    setenv(kOutputRootEnv, "/data/runs", 1);
    CHECK(resolve_output_dir(c, "configs/x.cfg", {}) == fs::path("/data/runs/x"));
    c.output_dir = "custom";
    CHECK(resolve_output_dir(c, "configs/x.cfg", {}) == fs::path("/data/runs/custom"));
    unsetenv(kOutputRootEnv);
    CHECK(resolve_output_dir(c, "configs/x.cfg", {}) == fs::path("runs/custom"));
}

}
