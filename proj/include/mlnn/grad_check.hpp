#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mlnn {

struct GradCheckOptions {
    int seeds = 5;
    double tolerance = 1e-6;
    double identity_tolerance = 1e-10;
};

struct GradCheckCase {
    std::string name;
    /// |analytic - fd|_inf / (1 + |analytic|_inf) for the parameter gradient.
    double param_deviation = 0.0;
    /// Same measure for u_x and u_xx at interior points.
    double spatial_deviation = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckCase> cases;
    double max_param_deviation = 0.0;
    double max_spatial_deviation = 0.0;
    double identity_deviation = 0.0;
    bool passed = false;
};

/// Finite-difference check of loss gradients and spatial derivatives over
/// every architecture kind, every registry problem and `seeds` random
/// parameter draws, plus a linear width-1 network.
GradCheckReport run_grad_check(const GradCheckOptions& options = {}, std::ostream* log = nullptr);

} // namespace mlnn
