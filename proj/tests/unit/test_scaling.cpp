#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mlnn/autodiff.hpp"
#include "mlnn/network_kernel.hpp"
#include "mlnn/scaling.hpp"

using namespace mlnn;
using std::numbers::pi;

TEST_SUITE("scaling") {

TEST_CASE("least squares")
{
    Eigen::MatrixXd d(2, 1);
    d << 1, 1;
    const LeastSquaresSolution mean = solve_least_squares(d, Eigen::Vector2d(1, 3));
    CHECK(mean.coefficients(0) == doctest::Approx(2.0).epsilon(1e-15));

    Eigen::Matrix3d sq;
    sq << 4, 1, 0, 1, 3, 1, 0, 1, 2;
    const Eigen::Vector3d rhs(1, 2, 3);
    const LeastSquaresSolution exact = solve_least_squares(sq, rhs);
    CHECK((sq * exact.coefficients - rhs).norm() <= 1e-12);

    SplitMix64 rng(77);
    Eigen::MatrixXd big(200, 20);
    Eigen::VectorXd truth(20);
    for (Eigen::Index i = 0; i < big.size(); ++i) {
        big.data()[i] = rng.uniform(-1, 1);
    }
    for (Eigen::Index i = 0; i < 20; ++i) {
        truth(i) = rng.uniform(-5, 5);
    }
    const LeastSquaresSolution rec = solve_least_squares(big, big * truth);
    CHECK((rec.coefficients - truth).lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK(rec.rank == 20);
    CHECK(rec.condition >= 1.0);

    CHECK_THROWS_AS(solve_least_squares(Eigen::MatrixXd::Ones(2, 3), Eigen::Vector2d(1, 1)), Error);
    CHECK_THROWS_AS(solve_least_squares(Eigen::MatrixXd::Zero(4, 2), Eigen::Vector4d(1, 1, 1, 1)), Error);
}

TEST_CASE("rank deficient least squares picks the minimum norm solution")
{
    Eigen::MatrixXd d(3, 2);
    d << 1, 1, 1, 1, 1, 1;
    const LeastSquaresSolution s = solve_least_squares(d, Eigen::Vector3d(2, 2, 2));
    CHECK(s.rank == 1);
    CHECK(s.coefficients(0) == doctest::Approx(1.0));
    CHECK(s.coefficients(1) == doctest::Approx(1.0));
}

TEST_CASE("elm basis")
{
    const ElmBasis a = ElmBasis::make(1, 1.0, 50, 3, 5);
    const ElmBasis b = ElmBasis::make(1, 1.0, 50, 3, 5);
    CHECK(a.frozen == b.frozen);
    CHECK(a.width() == 50);
    CHECK(a.spec.kind == ArchitectureKind::FourierSine);
    CHECK(a.num_unknowns() == 3 * 51);
    CHECK(ElmBasis::make(1, 1.0, 50, 0, 5).spec.kind == ArchitectureKind::PlainG);
    CHECK(ElmBasis::make(1, 1.0, 50, 0, 5).num_unknowns() == 51);
    CHECK(ElmBasis::make(1, 1.0, 50, 2, 5, ArchitectureKind::FourierG).num_unknowns() == 51);
    CHECK_THROWS_AS((void)a.with_output(Eigen::VectorXd::Zero(50)), Error);

    SplitMix64 rng(1);
    const auto random_output = [&](const ElmBasis& basis) {
        Eigen::VectorXd c(basis.num_unknowns());
        for (Eigen::Index i = 0; i < c.size(); ++i) {
            c(i) = rng.uniform(-1, 1);
        }
        return basis.with_output(c);
    };
    const ParamVector p = random_output(a);
    const double z[] = {0.0};
    const double o[] = {1.0};
    CHECK(std::abs(trial_value(a.spec, p, z)) <= 1e-14);
    CHECK(std::abs(trial_value(a.spec, p, o)) <= 1e-14);
    for (const auto kind : {ArchitectureKind::FourierG, ArchitectureKind::FourierSine}) {
        const ElmBasis two = ElmBasis::make(2, 1.0, 50, 2, 5, kind);
        const double e[] = {0.3, 1.0};
        CHECK(std::abs(trial_value(two.spec, random_output(two), e)) <= 1e-14);
    }
}

TEST_CASE("zero source converges")
{
    const ProblemDef p = poisson1d(2);
    const ElmBasis basis = ElmBasis::make(1, 1.0, 50, 1, 3);
    const ScaleEstimate est = elm_estimate_scale(p, [](PointRef) { return 0.0; }, basis, midpoint_grid(1, 256, 1.0),
                                                 midpoint_grid(1, 2048, 1.0));
    CHECK(est.converged);
    CHECK(est.amplitude == 0.0);
    CHECK(est.mu == ScaleEstimate::kMaxScale);
}

TEST_CASE("elm amplitude is linear in the source")
{
    const ProblemDef p = poisson1d(2);
    const ElmBasis basis = ElmBasis::make(1, 1.0, 50, 3, 3);
    const Points colloc = midpoint_grid(1, 1024, 1.0);
    const Points grid = midpoint_grid(1, 2048, 1.0);
    const ScaleEstimate full = elm_estimate_scale(p, p.source, basis, colloc, grid);
    for (double alpha : {1e-3, 0.37, 25.0}) {
        const ScaleEstimate scaled =
            elm_estimate_scale(p, [&](PointRef x) { return alpha * p.source(x); }, basis, colloc, grid);
        CHECK(std::abs(scaled.amplitude - alpha * full.amplitude) <= 1e-10 * alpha * full.amplitude);
    }
    const ScaleEstimate small =
        elm_estimate_scale(p, [&](PointRef x) { return 1e-3 * p.source(x); }, basis, colloc, grid);
    const double ratio = small.mu / full.mu;
    CHECK(ratio >= 500.0);
    CHECK(ratio <= 2000.0);
    // Unclipped estimates satisfy mu * a = 1.
    CHECK(small.mu * small.amplitude == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("elm recovers a correction in its span")
{
    for (int dim : {1, 2}) {
        const ProblemDef p = dim == 1 ? convection_diffusion(0.1) : poisson2d();
        const ElmBasis basis = ElmBasis::make(dim, 1.0, 50, 2, 8);
        SplitMix64 rng(4);
        Eigen::VectorXd c(basis.num_unknowns());
        for (Eigen::Index i = 0; i < c.size(); ++i) {
            c(i) = rng.uniform(-1, 1) * 1e-4;
        }
        const ParamVector w = basis.with_output(c);
        const Points colloc = midpoint_grid(dim, dim == 1 ? 512 : 32, 1.0);
        const Points grid = midpoint_grid(dim, dim == 1 ? 2048 : 64, 1.0);
        const Eigen::VectorXd src = p.op.apply(TrialEvaluator(basis.spec, colloc).evaluate(w));
        const ScaleEstimate est =
            elm_estimate_scale(p, {src.data(), static_cast<std::size_t>(src.size())}, basis, colloc, grid);
        const double wmax = TrialEvaluator(basis.spec, grid).evaluate(w).value.cwiseAbs().maxCoeff();
        CHECK(est.amplitude <= 10 * wmax);
        CHECK(est.amplitude >= wmax / 10);
        CHECK(est.mu == doctest::Approx(1.0 / est.amplitude));
    }
}

TEST_CASE("smooth error is found with many wave numbers")
{
    // A small smooth error behind a high-frequency basis: the amplitude must
    // not be lost because only the high modes fit the residual well.
    const ProblemDef p = poisson1d(10);
    const Points colloc = midpoint_grid(1, 1024, 1.0);
    const Points grid = midpoint_grid(1, 2048, 1.0);
    for (int M : {2, 6, 8}) {
        const ElmBasis basis = ElmBasis::make(1, 1.0, 50, M, 7);
        const ScaleEstimate est = elm_estimate_scale(
            p, [](PointRef x) { return 0.03 * pi * pi * std::sin(pi * x[0]); }, basis, colloc, grid);
        CHECK(est.amplitude == doctest::Approx(0.03).epsilon(1e-3));
    }
}

TEST_CASE("nested estimate keeps the largest amplitude")
{
    // Near-resonant Helmholtz error 0.01 sin(30 pi x) plus a small fast mode
    // that dominates the residual.
    const ProblemDef p = helmholtz1d(9200.0);
    const Points colloc = midpoint_grid(1, 1024, 1.0);
    const Points grid = midpoint_grid(1, 2048, 1.0);
    const auto source = [](PointRef x) {
        const double slow = 30 * pi;
        const double fast = 200 * pi;
        return 0.01 * (slow * slow - 9200.0) * std::sin(slow * x[0]) +
               1e-5 * (fast * fast - 9200.0) * std::sin(fast * x[0]);
    };
    const Eigen::VectorXd src = sample(source, colloc);
    std::vector<ElmBasis> bases;
    double largest = 0.0;
    for (int m = 1; m <= 9; ++m) {
        bases.push_back(ElmBasis::make(1, 1.0, 50, m, 11));
        largest = std::max(largest, elm_estimate_scale(p, source, bases.back(), colloc, grid).amplitude);
    }
    const ScaleEstimate est =
        elm_estimate_scale_nested(p, {src.data(), static_cast<std::size_t>(src.size())}, bases, colloc, grid);
    CHECK(est.amplitude == largest);
    CHECK(est.wavenumbers >= 1);
    CHECK(est.wavenumbers <= 9);
    CHECK(est.amplitude == doctest::Approx(0.01).epsilon(0.1));
    CHECK_THROWS_AS(elm_estimate_scale_nested(p, {src.data(), static_cast<std::size_t>(src.size())}, {}, colloc, grid),
                    Error);
}

TEST_CASE("scale is clipped")
{
    const ProblemDef p = poisson1d(2);
    const ElmBasis basis = ElmBasis::make(1, 1.0, 50, 1, 3);
    const Points colloc = midpoint_grid(1, 256, 1.0);
    const Points grid = midpoint_grid(1, 512, 1.0);
    const ScaleEstimate big =
        elm_estimate_scale(p, [&](PointRef x) { return 1e3 * p.source(x); }, basis, colloc, grid);
    CHECK(big.mu == 1.0);
    const ScaleEstimate tiny =
        elm_estimate_scale(p, [&](PointRef x) { return 1e-20 * p.source(x); }, basis, colloc, grid);
    CHECK(tiny.mu == ScaleEstimate::kMaxScale);
    CHECK_FALSE(tiny.converged);
    const std::vector<double> wrong(10, 1.0);
    CHECK_THROWS_AS(elm_estimate_scale(p, wrong, basis, colloc, grid), Error);
}

}
