#include "mlnn/autodiff.hpp"

namespace mlnn {

DerivativeBundle extended_forward(const NetworkSpec& spec, const ParamVector& params, PointRef x,
                                  const AffineLift* lift)
{
    Points pt(static_cast<Eigen::Index>(x.size()), 1);
    for (std::size_t j = 0; j < x.size(); ++j) {
        pt(static_cast<Eigen::Index>(j), 0) = x[j];
    }
    std::optional<AffineLift> l;
    if (lift != nullptr) {
        l = *lift;
    }
    const TrialEvaluator eval(spec, std::move(pt), l);
    return eval.evaluate(params).at(0);
}

Eigen::VectorXd sample(const ScalarField& field, const Points& points)
{
    Eigen::VectorXd out(points.cols());
    for (Eigen::Index p = 0; p < points.cols(); ++p) {
        out(p) = field(point_at(points, p));
    }
    return out;
}

LossReport loss_and_gradient(const ProblemDef& problem, const ScalarField& source, double mu,
                             const NetworkSpec& spec, const ParamVector& params, const Points& collocation,
                             const AffineLift* lift)
{
    if (collocation.cols() == 0) {
        throw Error("loss requested on an empty collocation set");
    }
    std::optional<AffineLift> l;
    if (lift != nullptr) {
        l = *lift;
    }
    const TrialEvaluator eval(spec, collocation, l);
    const Eigen::VectorXd s = sample(source, collocation);
    return eval.loss_and_gradient(problem.op, {s.data(), static_cast<std::size_t>(s.size())}, mu, params);
}

Eigen::VectorXd finite_diff_gradient(const std::function<double(const ParamVector&)>& f, const ParamVector& params,
                                     double step)
{
    if (!(step > 0.0)) {
        throw Error("finite-difference step must be positive");
    }
    Eigen::VectorXd g(params.size());
    ParamVector probe = params;
    for (Eigen::Index k = 0; k < params.size(); ++k) {
        const double orig = probe[k];
        probe[k] = orig + step;
        const double up = f(probe);
        probe[k] = orig - step;
        const double down = f(probe);
        probe[k] = orig;
        g(k) = (up - down) / (2.0 * step);
    }
    return g;
}

} // namespace mlnn
