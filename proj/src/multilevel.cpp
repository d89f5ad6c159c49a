#include "mlnn/multilevel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mlnn/autodiff.hpp"
#include "mlnn/network_kernel.hpp"

namespace mlnn {

namespace {

BundleBatch lift_bundles(const std::optional<AffineLift>& lift, int dim, const Points& points)
{
    BundleBatch b = BundleBatch::zeros(dim, points.cols());
    if (lift) {
        for (Eigen::Index p = 0; p < points.cols(); ++p) {
            b.value(p) = lift->value(point_at(points, p));
        }
        for (int j = 0; j < dim; ++j) {
            b.grad.row(j).setConstant(lift->slope[j]);
        }
    }
    return b;
}

void accumulate(BundleBatch& into, const BundleBatch& term, double weight)
{
    into.value += weight * term.value;
    into.grad += weight * term.grad;
    into.diag_hess += weight * term.diag_hess;
}

NetworkSpec resolved_spec(const ProblemDef& problem, const NetworkSpec& network)
{
    NetworkSpec spec = network;
    spec.input_dim = problem.dim;
    spec.domain_length = problem.length;
    spec.validate();
    return spec;
}

} // namespace

CompositeSolution::CompositeSolution(int dim, std::optional<AffineLift> lift) : dim_(dim), lift_(lift) {}

void CompositeSolution::add_level(CompositeLevel level)
{
    if (!(level.mu > 0.0) || !std::isfinite(level.mu)) {
        throw Error("level scale mu must be positive and finite");
    }
    if (level.spec.input_dim != dim_) {
        throw Error("level network dimension does not match the composite");
    }
    levels_.push_back(std::move(level));
}

double CompositeSolution::cumulative_scale(std::size_t i) const
{
    double scale = 1.0;
    for (std::size_t j = 0; j <= i && j < levels_.size(); ++j) {
        scale *= levels_[j].mu;
    }
    return scale;
}

std::optional<AffineLift> CompositeSolution::level_lift(std::size_t i, double mu0) const
{
    if (i != 0 || !lift_) {
        return std::nullopt;
    }
    return lift_->scaled(mu0);
}

BundleBatch composite_eval(const CompositeSolution& comp, const Points& points)
{
    BundleBatch out = lift_bundles(comp.lift(), comp.dim(), points);
    double scale = 1.0;
    for (const CompositeLevel& level : comp.levels()) {
        scale *= level.mu;
        const TrialEvaluator eval(level.spec, points);
        accumulate(out, eval.evaluate(level.params), 1.0 / scale);
    }
    return out;
}

DerivativeBundle composite_eval(const CompositeSolution& comp, PointRef x)
{
    Points pt(static_cast<Eigen::Index>(x.size()), 1);
    for (std::size_t j = 0; j < x.size(); ++j) {
        pt(static_cast<Eigen::Index>(j), 0) = x[j];
    }
    return composite_eval(comp, pt).at(0);
}

Eigen::VectorXd residual_values(const CompositeSolution& comp, const ProblemDef& problem, const Points& points)
{
    const Eigen::VectorXd f = sample(problem.source, points);
    if (comp.empty()) {
        return f - problem.op.apply(lift_bundles(comp.lift(), comp.dim(), points));
    }
    const auto& levels = comp.levels();
    Eigen::VectorXd r;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const TrialEvaluator eval(levels[i].spec, points, comp.level_lift(i, levels[0].mu));
        const Eigen::VectorXd au = problem.op.apply(eval.evaluate(levels[i].params));
        r = i == 0 ? Eigen::VectorXd(levels[0].mu * f - au) : Eigen::VectorXd(levels[i].mu * r - au);
    }
    return r;
}

ScalarField residual_source(const CompositeSolution& comp, const ProblemDef& problem)
{
    return [comp, problem](PointRef x) {
        Points pt(static_cast<Eigen::Index>(x.size()), 1);
        for (std::size_t j = 0; j < x.size(); ++j) {
            pt(static_cast<Eigen::Index>(j), 0) = x[j];
        }
        return residual_values(comp, problem, pt)(0);
    };
}

ErrorMetrics error_metrics(const BundleBatch& approx, const ProblemDef& problem, const Points& grid)
{
    const Eigen::Index n = grid.cols();
    double sum_e2 = 0.0;
    double sum_grad2 = 0.0;
    double max_abs = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
        const DerivativeBundle u = problem.exact(point_at(grid, p));
        const double e = u.value - approx.value(p);
        sum_e2 += e * e;
        for (int j = 0; j < problem.dim; ++j) {
            const double ej = u.grad[j] - approx.grad(j, p);
            sum_grad2 += ej * ej;
        }
        max_abs = std::max(max_abs, std::abs(e));
    }
    const double vol = problem.domain_volume();
    ErrorMetrics m;
    const double l2sq = sum_e2 / static_cast<double>(n) * vol;
    m.l2 = std::sqrt(l2sq);
    m.h1 = std::sqrt(l2sq + sum_grad2 / static_cast<double>(n) * vol);
    m.max_pointwise = max_abs;
    return m;
}

ErrorMetrics error_metrics(const CompositeSolution& comp, const ProblemDef& problem, const Points& grid)
{
    return error_metrics(composite_eval(comp, grid), problem, grid);
}

Points collocation_grid(const ProblemDef& problem, const LevelConfig& level, const MultilevelOptions& options)
{
    const int fallback = problem.dim == 1 ? options.collocation_1d : options.collocation_2d;
    return midpoint_grid(problem.dim, level.collocation > 0 ? level.collocation : fallback, problem.length);
}

Points evaluation_grid(const ProblemDef& problem, const MultilevelOptions& options)
{
    return midpoint_grid(problem.dim, problem.dim == 1 ? options.eval_1d : options.eval_2d, problem.length);
}

Points elm_grid(const ProblemDef& problem, const MultilevelOptions& options)
{
    return midpoint_grid(problem.dim, problem.dim == 1 ? options.elm_eval_1d : options.elm_eval_2d, problem.length);
}

std::vector<ElmBasis> level_elm_bases(const ProblemDef& problem, const LevelConfig& level,
                                      const MultilevelOptions& options, std::size_t index)
{
    std::vector<ElmBasis> bases;
    const int top = level.network.num_wavenumbers;
    for (int m = std::min(top, 1); m <= top; ++m) {
        bases.push_back(ElmBasis::make(problem.dim, problem.length, options.elm_width, m, options.elm_seed + index));
    }
    return bases;
}

void check_levels(const ProblemDef& problem, const std::vector<LevelConfig>& levels,
                  const MultilevelOptions& options)
{
    if (levels.empty()) {
        throw Error("a multilevel run needs at least one level");
    }
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const std::string where = "level " + std::to_string(i) + ": ";
        try {
            resolved_spec(problem, levels[i].network).validate();
        } catch (const Error& e) {
            throw Error(where + e.what());
        }
        if (levels[i].pinned_mu) {
            continue;
        }
        const Eigen::Index points = collocation_grid(problem, levels[i], options).cols();
        const int unknowns = level_elm_bases(problem, levels[i], options, i).back().num_unknowns();
        if (points < unknowns) {
            throw Error(where + "the ELM basis has " + std::to_string(unknowns) + " unknowns but the collocation grid only " +
                        std::to_string(points) + " points");
        }
    }
}

MultilevelResult run_multilevel(const ProblemDef& problem, const std::vector<LevelConfig>& levels,
                                const MultilevelOptions& options)
{
    check_levels(problem, levels, options);
    MultilevelResult result{CompositeSolution(problem.dim, problem.lift), {}, {}};
    CompositeSolution& comp = result.composite;
    const Points eval_grid = evaluation_grid(problem, options);
    const Points amplitude_grid = elm_grid(problem, options);

    for (std::size_t i = 0; i < levels.size(); ++i) {
        const auto started = std::chrono::steady_clock::now();
        const LevelConfig& cfg = levels[i];
        LevelResult level;
        level.level = static_cast<int>(i);
        const NetworkSpec spec = resolved_spec(problem, cfg.network);
        const Points colloc = collocation_grid(problem, cfg, options);
        level.collocation_points = colloc.cols();

        // Unnormalised source of this level: f for level 0 (the lift is part of
        // the level-0 trial), R_{i-1} afterwards.
        const Eigen::VectorXd source =
            i == 0 ? sample(problem.source, colloc) : residual_values(comp, problem, colloc);
        if (cfg.pinned_mu) {
            level.mu = *cfg.pinned_mu;
        } else {
            const Eigen::VectorXd elm_source = residual_values(comp, problem, colloc);
            level.estimate = elm_estimate_scale_nested(
                problem, {elm_source.data(), static_cast<std::size_t>(elm_source.size())},
                level_elm_bases(problem, cfg, options, i), colloc, amplitude_grid);
            level.mu = level.estimate->mu;
        }
        const double mu0 = i == 0 ? level.mu : comp.levels().front().mu;
        const double scale = (i == 0 ? 1.0 : comp.cumulative_scale(comp.size() - 1)) * level.mu;
        const std::optional<AffineLift> lift = comp.level_lift(i, mu0);

        const TrialEvaluator train_eval(spec, colloc, lift);
        const std::span<const double> source_span(source.data(), static_cast<std::size_t>(source.size()));
        const double mu = level.mu;
        const Objective objective = [&](const ParamVector& params) {
            return train_eval.loss_and_gradient(problem.op, source_span, mu, params);
        };

        // Metrics: previous composite on the grid plus this level's contribution.
        const BundleBatch base = i == 0 ? BundleBatch::zeros(problem.dim, eval_grid.cols()) : composite_eval(comp, eval_grid);
        const TrialEvaluator metric_eval(spec, eval_grid, lift);
        auto metrics_of = [&](const ParamVector& params) {
            BundleBatch total = base;
            accumulate(total, metric_eval.evaluate(params), 1.0 / scale);
            return error_metrics(total, problem, eval_grid);
        };
        const int adam_iters = cfg.adam.num_iterations;
        std::vector<TrainRow> seen;
        const IterationCallback callback = [&](TrainRow& row, const ParamVector& params) {
            const bool due = row.phase == Phase::Adam
                                 ? options.metric_stride_adam > 0 && row.iteration % options.metric_stride_adam == 0
                                 : options.metric_stride_lbfgs > 0 &&
                                       (row.iteration - adam_iters) % options.metric_stride_lbfgs == 0;
            if (due) {
                const ErrorMetrics m = metrics_of(params);
                row.l2 = m.l2;
                row.h1 = m.h1;
            }
            seen.push_back(row);
            if (options.progress) {
                options.progress(static_cast<int>(i), row);
            }
        };

        ParamVector params = xavier_init(spec, cfg.seed);
        try {
            TrainResult trained = two_phase_train(objective, std::move(params), cfg.adam, cfg.lbfgs, callback);
            level.record = std::move(trained.record);
            level.final_loss = trained.final_loss;
            params = std::move(trained.params);
        } catch (const NonFiniteError& e) {
            result.error = "level " + std::to_string(i) + ": " + e.what();
            level.record.rows = std::move(seen);
            level.record.stop_reason = "non-finite";
            level.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            result.levels.push_back(std::move(level));
            return result;
        }
        level.metrics = metrics_of(params);
        comp.add_level({spec, std::move(params), level.mu});
        level.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        result.levels.push_back(std::move(level));
    }
    return result;
}

} // namespace mlnn
