#include "mlnn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "mlnn/autodiff.hpp"
#include "mlnn/network_kernel.hpp"
#include "mlnn/problems.hpp"

namespace mlnn {

namespace {

double deviation(const Eigen::VectorXd& analytic, const Eigen::VectorXd& fd)
{
    return (analytic - fd).lpNorm<Eigen::Infinity>() / (1.0 + analytic.lpNorm<Eigen::Infinity>());
}

std::vector<ProblemDef> check_problems()
{
    return {poisson1d(2), convection_diffusion(0.1), helmholtz1d(9200.0), poisson2d()};
}

// Xavier weights with every entry (biases included) perturbed, so no term of
// the backward pass is multiplied by an exact zero.
ParamVector random_params(const NetworkSpec& spec, std::uint64_t seed)
{
    ParamVector p = xavier_init(spec, seed);
    SplitMix64 rng(seed * 0x9e3779b97f4a7c15ULL + 1);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        p[i] += rng.uniform(-0.5, 0.5);
    }
    return p;
}

double spatial_deviation(const NetworkSpec& spec, const ParamVector& params, const Points& probes,
                         const std::optional<AffineLift>& lift)
{
    constexpr double h = 1e-5;
    const AffineLift* lp = lift ? &*lift : nullptr;
    const TrialEvaluator eval(spec, probes, lift);
    const BundleBatch b = eval.evaluate(params);
    const int d = spec.input_dim;
    Eigen::VectorXd analytic(2 * d * probes.cols());
    Eigen::VectorXd fd(analytic.size());
    Eigen::Index k = 0;
    for (Eigen::Index p = 0; p < probes.cols(); ++p) {
        for (int j = 0; j < d; ++j) {
            Points shifted(d, 2);
            shifted.col(0) = probes.col(p);
            shifted.col(1) = probes.col(p);
            shifted(j, 0) += h;
            shifted(j, 1) -= h;
            const BundleBatch s = TrialEvaluator(spec, shifted, lift).evaluate(params);
            analytic(k) = b.grad(j, p);
            fd(k++) = (trial_value(spec, params, point_at(shifted, 0), lp) -
                       trial_value(spec, params, point_at(shifted, 1), lp)) /
                      (2 * h);
            analytic(k) = b.diag_hess(j, p);
            fd(k++) = (s.grad(j, 0) - s.grad(j, 1)) / (2 * h);
        }
    }
    return deviation(analytic, fd);
}

double identity_probe()
{
    NetworkSpec spec;
    spec.hidden_widths = {1};
    spec.activation = Activation::Identity;
    const ProblemDef problem = poisson1d(1);
    const Points pts = midpoint_grid(1, 16, 1.0);
    const TrialEvaluator eval(spec, pts);
    const Eigen::VectorXd f = sample(problem.source, pts);
    const std::span<const double> src(f.data(), static_cast<std::size_t>(f.size()));
    const ParamVector params(Eigen::Vector4d(0.7, -0.3, 1.1, 0.4));
    const auto loss = [&](const ParamVector& p) { return eval.loss_and_gradient(problem.op, src, 1.0, p).loss; };
    // The loss is a quartic polynomial in the parameters, so one Richardson
    // step removes the whole truncation error of the central difference.
    constexpr double h = 1e-3;
    const Eigen::VectorXd coarse = finite_diff_gradient(loss, params, h);
    const Eigen::VectorXd fine = finite_diff_gradient(loss, params, h / 2);
    const Eigen::VectorXd fd = (4.0 * fine - coarse) / 3.0;
    return deviation(eval.loss_and_gradient(problem.op, src, 1.0, params).gradient, fd);
}

} // namespace

GradCheckReport run_grad_check(const GradCheckOptions& options, std::ostream* log)
{
    GradCheckReport report;
    const ArchitectureKind kinds[] = {ArchitectureKind::PlainG, ArchitectureKind::FourierG,
                                      ArchitectureKind::FourierSine};
    for (const ProblemDef& problem : check_problems()) {
        const Points colloc = midpoint_grid(problem.dim, problem.dim == 1 ? 32 : 6, problem.length);
        const Points probes = midpoint_grid(problem.dim, problem.dim == 1 ? 5 : 2, problem.length);
        const Eigen::VectorXd f = sample(problem.source, colloc);
        const std::span<const double> src(f.data(), static_cast<std::size_t>(f.size()));
        for (const ArchitectureKind kind : kinds) {
            NetworkSpec spec;
            spec.input_dim = problem.dim;
            spec.domain_length = problem.length;
            spec.hidden_widths = {6, 5};
            spec.kind = kind;
            spec.num_wavenumbers = kind == ArchitectureKind::PlainG ? 0 : 3;
            GradCheckCase c;
            c.name = problem.label + "/" + std::string(to_string(kind));
            for (int s = 0; s < options.seeds; ++s) {
                const ParamVector params = random_params(spec, 1000 + static_cast<std::uint64_t>(s));
                const TrialEvaluator eval(spec, colloc, problem.lift);
                const double mu = 1.0 + 0.5 * s;
                const auto loss = [&](const ParamVector& p) {
                    return eval.loss_and_gradient(problem.op, src, mu, p).loss;
                };
                const LossReport r = eval.loss_and_gradient(problem.op, src, mu, params);
                c.param_deviation =
                    std::max(c.param_deviation, deviation(r.gradient, finite_diff_gradient(loss, params, 1e-6)));
                c.spatial_deviation =
                    std::max(c.spatial_deviation, spatial_deviation(spec, params, probes, problem.lift));
            }
            report.max_param_deviation = std::max(report.max_param_deviation, c.param_deviation);
            report.max_spatial_deviation = std::max(report.max_spatial_deviation, c.spatial_deviation);
            if (log) {
                *log << c.name << ": gradient " << c.param_deviation << ", derivatives " << c.spatial_deviation
                     << "\n";
            }
            report.cases.push_back(std::move(c));
        }
    }
    report.identity_deviation = identity_probe();
    report.passed = report.max_param_deviation <= options.tolerance &&
                    report.max_spatial_deviation <= options.tolerance &&
                    report.identity_deviation <= options.identity_tolerance;
    if (log) {
        *log << "identity width-1: " << report.identity_deviation << "\n";
        *log << "max gradient deviation " << report.max_param_deviation << ", max derivative deviation "
             << report.max_spatial_deviation << (report.passed ? ": pass" : ": FAIL") << "\n";
    }
    return report;
}

} // namespace mlnn
