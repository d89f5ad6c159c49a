#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "mlnn/autodiff.hpp"
#include "mlnn/multilevel.hpp"
#include "mlnn/network_kernel.hpp"

using namespace mlnn;

namespace {

// Network with identity activation whose output is the constant `c`.
CompositeLevel constant_level(double c, double mu)
{
    NetworkSpec s;
    s.hidden_widths = {1};
    s.activation = Activation::Identity;
    s.impose_boundary = false;
    return {s, ParamVector(Eigen::Vector4d(0.0, 0.0, 0.0, c)), mu};
}

// Poisson problem whose exact solution is the given network.
ProblemDef network_problem(const NetworkSpec& spec, const ParamVector& p)
{
    ProblemDef prob = poisson1d(1);
    prob.label = "probe";
    const LinearOperator op = prob.op;
    prob.source = [spec, p, op](PointRef x) { return op.apply(extended_forward(spec, p, x)); };
    prob.exact = [spec, p](PointRef x) { return extended_forward(spec, p, x); };
    return prob;
}

// Problem whose error against `approx_of_exact` is a fixed function.
BundleBatch shifted_exact(const ProblemDef& prob, const Points& grid, double (*e)(double), double (*de)(double))
{
    BundleBatch b = BundleBatch::zeros(1, grid.cols());
    for (Eigen::Index i = 0; i < grid.cols(); ++i) {
        const DerivativeBundle u = prob.exact(point_at(grid, i));
        b.value(i) = u.value - e(grid(0, i));
        b.grad(0, i) = u.grad[0] - de(grid(0, i));
    }
    return b;
}

CompositeSolution random_composite(const ProblemDef& prob, const std::vector<double>& mus, std::uint64_t seed)
{
    CompositeSolution comp(prob.dim, prob.lift);
    for (std::size_t i = 0; i < mus.size(); ++i) {
        NetworkSpec s = testing::small_spec(ArchitectureKind::FourierSine, prob.dim, 1 + static_cast<int>(i));
        comp.add_level({s, testing::busy_params(s, seed + i), mus[i]});
    }
    return comp;
}

// R_i evaluated as P_i (f - A composite_i).
Eigen::VectorXd direct_residual(const CompositeSolution& comp, const ProblemDef& prob, const Points& pts,
                                double* term_scale)
{
    const double P = comp.cumulative_scale(comp.size() - 1);
    const Eigen::VectorXd f = sample(prob.source, pts);
    const Eigen::VectorXd au = prob.op.apply(composite_eval(comp, pts));
    *term_scale = P * (f.lpNorm<Eigen::Infinity>() + au.lpNorm<Eigen::Infinity>());
    return P * (f - au);
}

} // namespace

TEST_SUITE("multilevel") {

TEST_CASE("single level composite is the level trial")
{
    const NetworkSpec s = testing::small_spec(ArchitectureKind::FourierSine);
    const ParamVector p = testing::busy_params(s, 1);
    CompositeSolution comp(1, std::nullopt);
    comp.add_level({s, p, 1.0});
    const Points pts = midpoint_grid(1, 50, 1.0);
    const BundleBatch c = composite_eval(comp, pts);
    const BundleBatch t = TrialEvaluator(s, pts).evaluate(p);
    CHECK((c.value - t.value).cwiseAbs().maxCoeff() == 0.0);
    CHECK((c.grad - t.grad).cwiseAbs().maxCoeff() == 0.0);
    CHECK((c.diag_hess - t.diag_hess).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero correction leaves the composite unchanged")
{
    const NetworkSpec s = testing::small_spec(ArchitectureKind::FourierSine);
    CompositeSolution one(1, std::nullopt);
    one.add_level({s, testing::busy_params(s, 1), 1.0});
    CompositeSolution two = one;
    two.add_level({s, ParamVector(static_cast<Eigen::Index>(s.param_count())), 1e3});
    const Points pts = midpoint_grid(1, 50, 1.0);
    CHECK((composite_eval(one, pts).value - composite_eval(two, pts).value).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("level weights")
{
    CompositeSolution comp(1, std::nullopt);
    comp.add_level(constant_level(0.0, 1.0));
    comp.add_level(constant_level(1.0, 1e3));
    const double x[] = {0.4};
    CHECK(composite_eval(comp, x).value == doctest::Approx(1e-3).epsilon(1e-15));
    CHECK(comp.cumulative_scale(1) == 1e3);
    CHECK_THROWS_AS(comp.add_level(constant_level(1.0, 0.0)), Error);
}

TEST_CASE("scale bookkeeping")
{
    const NetworkSpec s = testing::small_spec(ArchitectureKind::FourierSine);
    const ParamVector p0 = testing::busy_params(s, 1);
    const ParamVector p1 = testing::busy_params(s, 2);
    const double alpha = 37.5;
    ParamVector p1a = p1;
    const auto [off, len] = testing::output_block(s);
    p1a.mutable_values().segment(off, len) *= alpha;
    CompositeSolution a(1, std::nullopt);
    a.add_level({s, p0, 1.0});
    a.add_level({s, p1, 50.0});
    CompositeSolution b(1, std::nullopt);
    b.add_level({s, p0, 1.0});
    b.add_level({s, p1a, 50.0 * alpha});
    const Points pts = midpoint_grid(1, 64, 1.0);
    const Eigen::VectorXd va = composite_eval(a, pts).value;
    const Eigen::VectorXd vb = composite_eval(b, pts).value;
    CHECK((va - vb).lpNorm<Eigen::Infinity>() <= 1e-14 * (1 + va.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("residual source of an untrained level is the source term")
{
    const ProblemDef prob = poisson1d(2);
    const NetworkSpec s = testing::small_spec(ArchitectureKind::FourierSine);
    CompositeSolution comp(1, std::nullopt);
    comp.add_level({s, ParamVector(static_cast<Eigen::Index>(s.param_count())), 1.0});
    const ScalarField r = residual_source(comp, prob);
    for (double x : {0.1, 0.45, 0.8}) {
        const double xs[] = {x};
        CHECK(r(xs) == doctest::Approx(prob.source(xs)).epsilon(1e-15));
    }
    const ProblemDef helm = helmholtz1d(9200.0);
    const CompositeSolution empty(1, helm.lift);
    const double xs[] = {0.25};
    CHECK(residual_source(empty, helm)(xs) == doctest::Approx(9200.0 * 0.25).epsilon(1e-15));
}

TEST_CASE("exact composite has zero residual and zero error")
{
    const NetworkSpec s = testing::small_spec(ArchitectureKind::FourierSine);
    const ParamVector p = testing::busy_params(s, 6);
    const ProblemDef prob = network_problem(s, p);
    CompositeSolution comp(1, std::nullopt);
    comp.add_level({s, p, 1.0});
    const Points pts = midpoint_grid(1, 100, 1.0);
    CHECK(residual_values(comp, prob, pts).lpNorm<Eigen::Infinity>() <= 1e-10);
    const ErrorMetrics m = error_metrics(comp, prob, pts);
    CHECK(m.l2 <= 1e-14);
    CHECK(m.h1 <= 1e-14);
    CHECK(m.max_pointwise <= 1e-14);
}

TEST_CASE("residual recursion identity")
{
    for (const ProblemDef& prob : {poisson1d(2), helmholtz1d(9200.0), convection_diffusion(0.01), poisson2d()}) {
        const std::vector<double> mus = {1.0, 30.0, 250.0, 7.0};
        const Points pts = midpoint_grid(prob.dim, prob.dim == 1 ? 97 : 9, 1.0);
        for (std::size_t n = 1; n <= mus.size(); ++n) {
            const CompositeSolution comp =
                random_composite(prob, std::vector<double>(mus.begin(), mus.begin() + static_cast<long>(n)), 40);
            double scale = 0.0;
            const Eigen::VectorXd direct = direct_residual(comp, prob, pts, &scale);
            const Eigen::VectorXd rec = residual_values(comp, prob, pts);
            CHECK_MESSAGE((direct - rec).lpNorm<Eigen::Infinity>() <= 1e-12 * scale, prob.label << " level " << n);
        }
    }
}

TEST_CASE("composite meets the boundary data")
{
    const ProblemDef helm = helmholtz1d(9200.0);
    const CompositeSolution comp = random_composite(helm, {3.0, 40.0, 900.0}, 7);
    const double a[] = {0.0};
    const double b[] = {1.0};
    CHECK(std::abs(composite_eval(comp, a).value) <= 1e-14);
    CHECK(std::abs(composite_eval(comp, b).value - 1.0) <= 1e-14);

    const ProblemDef p2 = poisson2d();
    const CompositeSolution c2 = random_composite(p2, {1.0, 40.0}, 9);
    for (double t : {0.0, 0.3, 1.0}) {
        const double e1[] = {t, 0.0};
        const double e2[] = {1.0, t};
        CHECK(std::abs(composite_eval(c2, e1).value) <= 1e-14);
        CHECK(std::abs(composite_eval(c2, e2).value) <= 1e-14);
    }
}

TEST_CASE("error metrics of analytic probes")
{
    using std::numbers::pi;
    const ProblemDef prob = poisson1d(2);
    const Points grid = midpoint_grid(1, 4096, 1.0);
    const ErrorMetrics s = error_metrics(
        shifted_exact(prob, grid, [](double x) { return std::sin(pi * x); }, [](double x) { return pi * std::cos(pi * x); }),
        prob, grid);
    CHECK(s.l2 == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(s.h1 == doctest::Approx(std::sqrt(0.5 + pi * pi / 2)).epsilon(1e-12));
    CHECK(s.max_pointwise == doctest::Approx(1.0).epsilon(1e-6));

    const ErrorMetrics c = error_metrics(
        shifted_exact(prob, grid, [](double) { return -0.25; }, [](double) { return 0.0; }), prob, grid);
    CHECK(c.l2 == doctest::Approx(0.25).epsilon(1e-13));
    CHECK(c.h1 == doctest::Approx(0.25).epsilon(1e-13));
    CHECK(c.max_pointwise == doctest::Approx(0.25).epsilon(1e-13));
    CHECK(s.h1 >= s.l2);
}

TEST_CASE("untrained single level")
{
    const ProblemDef prob = poisson1d(2);
    LevelConfig level;
    level.network = testing::small_spec(ArchitectureKind::FourierSine);
    level.seed = 12;
    level.pinned_mu = 1.0;
    MultilevelOptions opts;
    opts.eval_1d = 256;
    const MultilevelResult r = run_multilevel(prob, {level}, opts);
    REQUIRE(r.ok());
    REQUIRE(r.composite.size() == 1);
    CHECK(r.composite.levels()[0].params == xavier_init(level.network, 12));
    CHECK(std::isfinite(r.levels[0].metrics.l2));
    CHECK(std::isfinite(r.levels[0].metrics.h1));
    CHECK(r.levels[0].record.rows.empty());
}

TEST_CASE("short multilevel run")
{
    const ProblemDef prob = poisson1d(2);
    std::vector<LevelConfig> levels(3);
    for (std::size_t i = 0; i < levels.size(); ++i) {
        levels[i].network.kind = ArchitectureKind::FourierSine;
        levels[i].network.hidden_widths = {8};
        levels[i].network.num_wavenumbers = 1 + static_cast<int>(i);
        levels[i].adam.num_iterations = 200;
        levels[i].lbfgs.num_iterations = 40;
        levels[i].seed = i;
    }
    levels[0].pinned_mu = 1.0;
    MultilevelOptions opts;
    opts.collocation_1d = 256;
    opts.eval_1d = 512;
    opts.elm_eval_1d = 256;
    int calls = 0;
    opts.progress = [&](int, const TrainRow&) { ++calls; };
    const MultilevelResult r = run_multilevel(prob, levels, opts);
    REQUIRE(r.ok());
    REQUIRE(r.levels.size() == 3);
    CHECK_FALSE(r.levels[0].estimate.has_value());
    CHECK(r.levels[1].estimate.has_value());
    CHECK(r.levels[1].mu == r.levels[1].estimate->mu);
    CHECK(r.levels[2].estimate->wavenumbers >= 1);
    CHECK(r.levels[2].estimate->wavenumbers <= 3);
    std::size_t rows = 0;
    for (const LevelResult& l : r.levels) {
        rows += l.record.rows.size();
        CHECK(l.collocation_points == 256);
        for (const TrainRow& row : l.record.rows) {
            const bool logged = !std::isnan(row.l2);
            const bool due = row.phase == Phase::Lbfgs || row.iteration % 10 == 0;
            CHECK(logged == due);
        }
    }
    CHECK(calls == static_cast<int>(rows));

    const Points pts = midpoint_grid(1, 77, 1.0);
    double scale = 0.0;
    const Eigen::VectorXd direct = direct_residual(r.composite, prob, pts, &scale);
    CHECK((direct - residual_values(r.composite, prob, pts)).lpNorm<Eigen::Infinity>() <= 1e-12 * scale);

    // Metrics reported for the last level are those of the final composite.
    const ErrorMetrics m = error_metrics(r.composite, prob, evaluation_grid(prob, opts));
    CHECK(m.l2 == doctest::Approx(r.levels.back().metrics.l2).epsilon(1e-12));
}

TEST_CASE("elm bases per level")
{
    const ProblemDef prob = poisson1d(2);
    LevelConfig level;
    level.network.hidden_widths = {4};
    level.network.num_wavenumbers = 4;
    MultilevelOptions opts;
    opts.elm_width = 10;
    const std::vector<ElmBasis> bases = level_elm_bases(prob, level, opts, 2);
    REQUIRE(bases.size() == 4);
    for (int m = 0; m < 4; ++m) {
        CHECK(bases[m].spec.num_wavenumbers == m + 1);
        CHECK(bases[m].num_unknowns() == (m + 1) * 11);
    }
    level.network.kind = ArchitectureKind::PlainG;
    level.network.num_wavenumbers = 0;
    const std::vector<ElmBasis> plain = level_elm_bases(prob, level, opts, 2);
    REQUIRE(plain.size() == 1);
    CHECK(plain[0].spec.kind == ArchitectureKind::PlainG);
}

TEST_CASE("non-finite training keeps earlier levels")
{
    const ProblemDef prob = poisson1d(2);
    std::vector<LevelConfig> levels(2);
    for (auto& l : levels) {
        l.network.hidden_widths = {4};
        l.adam.num_iterations = 20;
    }
    levels[0].pinned_mu = 1.0;
    levels[1].pinned_mu = 1.0;
    levels[1].adam.learning_rate = 1e300;
    MultilevelOptions opts;
    opts.collocation_1d = 64;
    opts.eval_1d = 128;
    const MultilevelResult r = run_multilevel(prob, levels, opts);
    CHECK_FALSE(r.ok());
    CHECK(r.composite.size() == 1);
    CHECK(r.levels.size() == 2);
}

}
