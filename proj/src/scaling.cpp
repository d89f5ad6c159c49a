#include "mlnn/scaling.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

#include "mlnn/autodiff.hpp"
#include "mlnn/network_kernel.hpp"

namespace mlnn {

ElmBasis ElmBasis::make(int dim, double length, int width, int num_wavenumbers, std::uint64_t seed,
                        ArchitectureKind kind)
{
    ElmBasis basis;
    basis.spec.input_dim = dim;
    basis.spec.domain_length = length;
    basis.spec.hidden_widths = {width};
    basis.spec.num_wavenumbers = num_wavenumbers;
    basis.spec.kind = num_wavenumbers > 0 ? kind : ArchitectureKind::PlainG;
    basis.spec.validate();
    basis.frozen = xavier_init(basis.spec, seed);

    const LayerShape hidden = basis.spec.layer_shapes().front();
    const double bound = std::sqrt(6.0 / static_cast<double>(hidden.rows + hidden.cols));
    SplitMix64 rng(seed ^ 0x5bd1e995ULL);
    for (int h = 0; h < hidden.rows; ++h) {
        basis.frozen[static_cast<Eigen::Index>(hidden.bias_offset()) + h] = rng.uniform(-bound, bound);
    }
    return basis;
}

int ElmBasis::num_unknowns() const
{
    const LayerShape out = spec.layer_shapes().back();
    return static_cast<int>(out.end() - out.offset);
}

ParamVector ElmBasis::with_output(const Eigen::VectorXd& c) const
{
    if (c.size() != num_unknowns()) {
        throw Error("ELM coefficient vector has the wrong length");
    }
    const LayerShape out = spec.layer_shapes().back();
    ParamVector p = frozen;
    p.mutable_values().segment(static_cast<Eigen::Index>(out.offset), c.size()) = c;
    return p;
}

LeastSquaresSolution solve_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& rhs)
{
    if (design.rows() < design.cols()) {
        throw Error("least squares needs at least as many rows as columns");
    }
    if (design.rows() != rhs.size()) {
        throw Error("least squares right-hand side has the wrong length");
    }
    if (design.cwiseAbs().maxCoeff() == 0.0) {
        throw Error("least squares design matrix is identically zero");
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-6);
    LeastSquaresSolution out;
    out.coefficients = svd.solve(rhs);
    out.rank = svd.rank();
    const auto& sv = svd.singularValues();
    out.condition = out.rank > 0 ? sv(0) / sv(out.rank - 1) : 0.0;
    return out;
}

ScaleEstimate elm_estimate_scale(const ProblemDef& problem, std::span<const double> source_at_collocation,
                                 const ElmBasis& basis, const Points& collocation, const Points& eval_grid)
{
    if (static_cast<Eigen::Index>(source_at_collocation.size()) != collocation.cols()) {
        throw Error("ELM source has the wrong number of values");
    }
    Eigen::Map<const Eigen::VectorXd> rhs(source_at_collocation.data(), collocation.cols());
    ScaleEstimate est;
    if (rhs.cwiseAbs().maxCoeff() == 0.0) {
        est.mu = ScaleEstimate::kMaxScale;
        est.converged = true;
        return est;
    }

    // Column h is A applied to the h-th basis function, obtained by switching
    // on a single output parameter.
    const TrialEvaluator at_collocation(basis.spec, collocation);
    const int H = basis.num_unknowns();
    Eigen::MatrixXd design(collocation.cols(), H);
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(H);
    for (int h = 0; h < H; ++h) {
        unit.setZero();
        unit(h) = 1.0;
        design.col(h) = problem.op.apply(at_collocation.evaluate(basis.with_output(unit)));
    }
    const LeastSquaresSolution ls = solve_least_squares(design, rhs);
    est.condition = ls.condition;
    est.misfit = (design * ls.coefficients - rhs).norm() / rhs.norm();
    est.wavenumbers = basis.spec.num_wavenumbers;

    const TrialEvaluator at_grid(basis.spec, eval_grid);
    est.amplitude = at_grid.evaluate(basis.with_output(ls.coefficients)).value.cwiseAbs().maxCoeff();
    if (est.amplitude == 0.0) {
        est.mu = ScaleEstimate::kMaxScale;
        est.converged = true;
        return est;
    }
    est.mu = std::clamp(1.0 / est.amplitude, ScaleEstimate::kMinScale, ScaleEstimate::kMaxScale);
    return est;
}

ScaleEstimate elm_estimate_scale_nested(const ProblemDef& problem, std::span<const double> source_at_collocation,
                                        const std::vector<ElmBasis>& bases, const Points& collocation,
                                        const Points& eval_grid)
{
    if (bases.empty()) {
        throw Error("ELM estimate needs at least one basis");
    }
    ScaleEstimate best;
    for (std::size_t b = 0; b < bases.size(); ++b) {
        const ScaleEstimate est = elm_estimate_scale(problem, source_at_collocation, bases[b], collocation, eval_grid);
        if (b == 0 || est.amplitude > best.amplitude) {
            best = est;
        }
    }
    return best;
}

ScaleEstimate elm_estimate_scale(const ProblemDef& problem, const ScalarField& source, const ElmBasis& basis,
                                 const Points& collocation, const Points& eval_grid)
{
    const Eigen::VectorXd s = sample(source, collocation);
    return elm_estimate_scale(problem, {s.data(), static_cast<std::size_t>(s.size())}, basis, collocation, eval_grid);
}

} // namespace mlnn
