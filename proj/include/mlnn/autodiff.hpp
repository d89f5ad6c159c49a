#pragma once

#include <functional>

#include "mlnn/model.hpp"
#include "mlnn/network_kernel.hpp"
#include "mlnn/problems.hpp"

namespace mlnn {

/// Value and exact first/second spatial derivatives of the trial at x.
DerivativeBundle extended_forward(const NetworkSpec& spec, const ParamVector& params, PointRef x,
                                  const AffineLift* lift = nullptr);

/// mean_p (mu * source(p) - (A u)(p))^2 over the collocation set and its
/// exact parameter gradient. For repeated evaluations on the same points,
/// hold a TrialEvaluator instead.
LossReport loss_and_gradient(const ProblemDef& problem, const ScalarField& source, double mu,
                             const NetworkSpec& spec, const ParamVector& params, const Points& collocation,
                             const AffineLift* lift = nullptr);

/// Central differences (f(p + h e_k) - f(p - h e_k)) / 2h for every coordinate.
Eigen::VectorXd finite_diff_gradient(const std::function<double(const ParamVector&)>& f, const ParamVector& params,
                                     double step);

/// Evaluates `field` at every column of `points`.
Eigen::VectorXd sample(const ScalarField& field, const Points& points);

} // namespace mlnn
