#include "mlnn/problems.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace mlnn {

namespace {

constexpr double kPi = std::numbers::pi;

DerivativeBundle bundle1d(double value, double dx, double dxx)
{
    DerivativeBundle b;
    b.dim = 1;
    b.value = value;
    b.grad[0] = dx;
    b.diag_hess[0] = dxx;
    return b;
}

double require(const std::map<std::string, double>& params, const std::string& label, const std::string& name)
{
    const auto it = params.find(name);
    if (it == params.end()) {
        throw Error("problem '" + label + "' requires parameter '" + name + "'");
    }
    return it->second;
}

} // namespace

ProblemDef poisson1d(int k)
{
    if (k < 1) {
        throw Error("poisson1d needs k >= 1");
    }
    const double kp = k * kPi;
    ProblemDef p;
    p.label = "poisson1d";
    p.dim = 1;
    p.op.diffusion[0] = -1.0;
    p.parameters = {{"k", static_cast<double>(k)}};
    p.exact = [kp](PointRef x) {
        const double t = x[0];
        const double s = std::sin(kp * t);
        const double c = std::cos(kp * t);
        const double e = std::exp(s);
        return bundle1d(e + t * t * t - t - 1.0, kp * c * e + 3.0 * t * t - 1.0, kp * kp * (c * c - s) * e + 6.0 * t);
    };
    p.source = [kp](PointRef x) {
        const double t = x[0];
        const double s = std::sin(kp * t);
        const double c = std::cos(kp * t);
        return -(kp * kp * (c * c - s) * std::exp(s) + 6.0 * t);
    };
    return p;
}

ProblemDef convection_diffusion(double epsilon)
{
    if (!(epsilon > 0.0)) {
        throw Error("convection_diffusion needs epsilon > 0");
    }
    ProblemDef p;
    p.label = "convdiff";
    p.dim = 1;
    p.op.diffusion[0] = -epsilon;
    p.op.convection[0] = 1.0;
    p.parameters = {{"epsilon", epsilon}};
    // u = x - q(x), q = (e^{x/eps} - 1) / (e^{1/eps} - 1), rewritten so that
    // every exponential has a non-positive argument.
    const double denom = -std::expm1(-1.0 / epsilon);
    p.exact = [epsilon, denom](PointRef x) {
        const double t = x[0];
        const double q = std::exp((t - 1.0) / epsilon) * (-std::expm1(-t / epsilon)) / denom;
        const double dq = std::exp((t - 1.0) / epsilon) / (epsilon * denom);
        return bundle1d(t - q, 1.0 - dq, -dq / epsilon);
    };
    p.source = [](PointRef) { return 1.0; };
    return p;
}

ProblemDef helmholtz1d(double kappa_squared)
{
    if (!(kappa_squared > 0.0)) {
        throw Error("helmholtz1d needs kappa^2 > 0");
    }
    const double kappa = std::sqrt(kappa_squared);
    const double sk = std::sin(kappa);
    if (std::abs(sk) < 1e-6) {
        throw Error("helmholtz1d: kappa is too close to a multiple of pi (resonant, solution not unique)");
    }
    ProblemDef p;
    p.label = "helmholtz1d";
    p.dim = 1;
    p.op.diffusion[0] = -1.0;
    p.op.reaction = -kappa_squared;
    p.parameters = {{"kappa_sq", kappa_squared}};
    p.exact = [kappa, sk](PointRef x) {
        const double s = std::sin(kappa * x[0]) / sk;
        return bundle1d(s, kappa * std::cos(kappa * x[0]) / sk, -kappa * kappa * s);
    };
    p.source = [](PointRef) { return 0.0; };
    AffineLift lift;
    lift.slope[0] = 1.0;
    p.lift = lift;
    return p;
}

ProblemDef poisson2d()
{
    ProblemDef p;
    p.label = "poisson2d";
    p.dim = 2;
    p.op.diffusion = {-1.0, -1.0};
    p.exact = [](PointRef x) {
        const double sx = std::sin(kPi * x[0]);
        const double sy = std::sin(kPi * x[1]);
        DerivativeBundle b;
        b.dim = 2;
        b.value = sx * sy;
        b.grad = {kPi * std::cos(kPi * x[0]) * sy, kPi * sx * std::cos(kPi * x[1])};
        b.diag_hess = {-kPi * kPi * b.value, -kPi * kPi * b.value};
        return b;
    };
    p.source = [](PointRef x) { return 2.0 * kPi * kPi * std::sin(kPi * x[0]) * std::sin(kPi * x[1]); };
    return p;
}

const std::map<std::string, std::vector<std::string>>& problem_registry()
{
    static const std::map<std::string, std::vector<std::string>> registry = {
        {"poisson1d", {"k"}},
        {"convdiff", {"epsilon"}},
        {"helmholtz1d", {"kappa_sq"}},
        {"poisson2d", {}},
    };
    return registry;
}

ProblemDef make_problem(const std::string& label, const std::map<std::string, double>& parameters)
{
    if (label == "poisson1d") {
        const double k = require(parameters, label, "k");
        if (k != std::floor(k)) {
            throw Error("poisson1d parameter k must be an integer");
        }
        return poisson1d(static_cast<int>(k));
    }
    if (label == "convdiff") {
        return convection_diffusion(require(parameters, label, "epsilon"));
    }
    if (label == "helmholtz1d") {
        return helmholtz1d(require(parameters, label, "kappa_sq"));
    }
    if (label == "poisson2d") {
        return poisson2d();
    }
    throw Error("unknown problem '" + label + "' (expected poisson1d, convdiff, helmholtz1d or poisson2d)");
}

double residual_at(const ProblemDef& problem, const ScalarField& source, double mu, const DerivativeBundle& bundle,
                   PointRef x)
{
    return mu * source(x) - problem.op.apply(bundle);
}

} // namespace mlnn
