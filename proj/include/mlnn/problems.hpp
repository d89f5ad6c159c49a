#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mlnn/types.hpp"

namespace mlnn {

/// A linear boundary-value problem f - A u = 0 on (0, length)^dim with
/// Dirichlet data given by `lift` (zero when absent) and a known exact solution.
struct ProblemDef {
    std::string label;
    int dim = 1;
    double length = 1.0;
    LinearOperator op;
    ScalarField source;
    /// Exact solution with analytic first and second derivatives.
    std::function<DerivativeBundle(PointRef)> exact;
    std::optional<AffineLift> lift;
    /// Construction parameters, echoed in run summaries.
    std::map<std::string, double> parameters;

    [[nodiscard]] double exact_value(PointRef x) const { return exact(x).value; }
    [[nodiscard]] double domain_volume() const { return dim == 1 ? length : length * length; }
};

/// -u'' = f on (0,1), exact u = exp(sin(k pi x)) + x^3 - x - 1.
ProblemDef poisson1d(int k);

/// -eps u'' + u' = 1 on (0,1), u(0) = u(1) = 0.
ProblemDef convection_diffusion(double epsilon);

/// -u'' - kappa^2 u = 0 on (0,1), u(0) = 0, u(1) = 1.
ProblemDef helmholtz1d(double kappa_squared);

/// -(u_xx + u_yy) = f on (0,1)^2, exact u = sin(pi x) sin(pi y).
ProblemDef poisson2d();

/// Builds a problem from its registry label ("poisson1d", "convdiff",
/// "helmholtz1d", "poisson2d") and named parameters (k, epsilon, kappa_sq).
ProblemDef make_problem(const std::string& label, const std::map<std::string, double>& parameters);

/// Parameter names accepted by each registry label.
const std::map<std::string, std::vector<std::string>>& problem_registry();

/// mu * source(x) - (A u)(x) for the bundle of u at x.
double residual_at(const ProblemDef& problem, const ScalarField& source, double mu, const DerivativeBundle& bundle,
                   PointRef x);

} // namespace mlnn
