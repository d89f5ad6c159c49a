#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mlnn/model.hpp"
#include "mlnn/optimize.hpp"
#include "mlnn/problems.hpp"
#include "mlnn/scaling.hpp"

namespace mlnn {

/// Hyper-parameters of one level. The network's input dimension and domain
/// length are taken from the problem.
struct LevelConfig {
    NetworkSpec network;
    AdamConfig adam;
    LbfgsConfig lbfgs;
    std::uint64_t seed = 0;
    /// Fixed mu for this level; estimated with the ELM when empty.
    std::optional<double> pinned_mu;
    /// Collocation points (1D) or points per axis (2D); 0 selects the default.
    int collocation = 0;
};

struct MultilevelOptions {
    int collocation_1d = 1024;
    int collocation_2d = 64;
    int eval_1d = 4096;
    int eval_2d = 128;
    int elm_eval_1d = 2048;
    int elm_eval_2d = 64;
    int elm_width = 50;
    std::uint64_t elm_seed = 0x454c4dULL;
    int metric_stride_adam = 10;
    int metric_stride_lbfgs = 1;
    /// Called after every parameter update with the level index.
    std::function<void(int, const TrainRow&)> progress;
};

struct CompositeLevel {
    NetworkSpec spec;
    ParamVector params;
    double mu = 1.0;
};

/// u(x) = sum_i u_i(x) / prod_{j<=i} mu_j. The level-0 trial carries the lift
/// scaled by mu_0, so the composite meets the Dirichlet data exactly.
class CompositeSolution {
public:
    CompositeSolution(int dim, std::optional<AffineLift> lift);

    void add_level(CompositeLevel level);
    [[nodiscard]] const std::vector<CompositeLevel>& levels() const { return levels_; }
    [[nodiscard]] std::size_t size() const { return levels_.size(); }
    [[nodiscard]] bool empty() const { return levels_.empty(); }
    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] const std::optional<AffineLift>& lift() const { return lift_; }

    /// prod_{j<=i} mu_j
    [[nodiscard]] double cumulative_scale(std::size_t i) const;
    /// Lift of the level-i trial: mu_0 * lift for level 0, none afterwards.
    [[nodiscard]] std::optional<AffineLift> level_lift(std::size_t i, double mu0) const;

private:
    int dim_;
    std::optional<AffineLift> lift_;
    std::vector<CompositeLevel> levels_;
};

struct ErrorMetrics {
    double l2 = 0.0;
    double h1 = 0.0;
    double max_pointwise = 0.0;
};

/// Composite bundles at every point.
BundleBatch composite_eval(const CompositeSolution& comp, const Points& points);
DerivativeBundle composite_eval(const CompositeSolution& comp, PointRef x);

/// R_last evaluated through the recursion R_0 = mu_0 f - A u_0,
/// R_i = mu_i R_{i-1} - A u_i. An empty composite yields f - A(lift).
Eigen::VectorXd residual_values(const CompositeSolution& comp, const ProblemDef& problem, const Points& points);
ScalarField residual_source(const CompositeSolution& comp, const ProblemDef& problem);

/// Midpoint-rule L2, H1 and max errors of `approx` against the exact solution.
ErrorMetrics error_metrics(const BundleBatch& approx, const ProblemDef& problem, const Points& grid);
ErrorMetrics error_metrics(const CompositeSolution& comp, const ProblemDef& problem, const Points& grid);

struct LevelResult {
    int level = 0;
    double mu = 1.0;
    std::optional<ScaleEstimate> estimate;
    TrainRecord record;
    double final_loss = 0.0;
    ErrorMetrics metrics;
    double wall_seconds = 0.0;
    Eigen::Index collocation_points = 0;
};

struct MultilevelResult {
    CompositeSolution composite;
    std::vector<LevelResult> levels;
    /// Empty on success; otherwise the reason the run stopped early.
    std::string error;

    [[nodiscard]] bool ok() const { return error.empty(); }
};

/// Default collocation grid, evaluation grid and ELM amplitude grid.
Points collocation_grid(const ProblemDef& problem, const LevelConfig& level, const MultilevelOptions& options);
Points evaluation_grid(const ProblemDef& problem, const MultilevelOptions& options);
Points elm_grid(const ProblemDef& problem, const MultilevelOptions& options);

/// ELM bases used to estimate mu for level `index`: one per wave-number count
/// 1..M of the level (a single plain basis when the level has none).
std::vector<ElmBasis> level_elm_bases(const ProblemDef& problem, const LevelConfig& level,
                                      const MultilevelOptions& options, std::size_t index);

/// Throws Error when a level cannot run, e.g. when its collocation grid has
/// fewer points than its ELM basis has unknowns. The message starts with
/// "level <i>:".
void check_levels(const ProblemDef& problem, const std::vector<LevelConfig>& levels,
                  const MultilevelOptions& options);

/// Trains the levels in order, each on the scaled residual of the composite so far.
MultilevelResult run_multilevel(const ProblemDef& problem, const std::vector<LevelConfig>& levels,
                                const MultilevelOptions& options);

} // namespace mlnn
