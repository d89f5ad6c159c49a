#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mlnn/model.hpp"
#include "mlnn/problems.hpp"

namespace mlnn {

/// Single hidden layer with frozen random weights and biases. Only the
/// output layer (weights and biases) is solved for, so the trial, e.g.
///   e(x) = (1/M) sum_m sin(w_m x) (sum_h c_mh tanh(a_h . gamma(x) + b_h) + c_m0)
/// for the sine architecture, is linear in c and vanishes on the boundary.
struct ElmBasis {
    NetworkSpec spec;
    ParamVector frozen; // hidden weights and biases; output block is zero

    /// Fourier input with `num_wavenumbers` geometric wave numbers, uniform
    /// Xavier weights and biases. Zero wave numbers selects the plain input
    /// with the polynomial boundary factor whatever `kind` says.
    static ElmBasis make(int dim, double length, int width, int num_wavenumbers, std::uint64_t seed,
                         ArchitectureKind kind = ArchitectureKind::FourierSine);

    [[nodiscard]] int width() const { return spec.hidden_widths.front(); }
    /// Length of the coefficient vector c.
    [[nodiscard]] int num_unknowns() const;
    /// Full network parameters for output coefficients c.
    [[nodiscard]] ParamVector with_output(const Eigen::VectorXd& c) const;
};

struct ScaleEstimate {
    static constexpr double kMinScale = 1.0;
    static constexpr double kMaxScale = 1e14;

    double mu = 1.0;
    double amplitude = 0.0;
    /// Ratio of the largest to the smallest retained singular value.
    double condition = 0.0;
    /// |A e - source| / |source| on the collocation points.
    double misfit = 0.0;
    /// Wave numbers of the basis the estimate was taken from.
    int wavenumbers = 0;
    /// Set when the source is numerically zero (amplitude 0).
    bool converged = false;
};

struct LeastSquaresSolution {
    Eigen::VectorXd coefficients;
    double condition = 0.0;
    Eigen::Index rank = 0;
};

/// Minimises |design * c - rhs|_2 through an SVD; singular values below
/// 1e-6 * sigma_max are treated as zero. The truncation keeps the
/// coefficients bounded when the source holds components the basis cannot
/// represent, so the fitted amplitude stays linear in the source.
LeastSquaresSolution solve_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& rhs);

/// Fits A e = source with the ELM basis on the collocation points and returns
/// mu = clip(1 / max_grid |e|, 1, 1e14).
ScaleEstimate elm_estimate_scale(const ProblemDef& problem, std::span<const double> source_at_collocation,
                                 const ElmBasis& basis, const Points& collocation, const Points& eval_grid);

/// Largest amplitude over several bases, e.g. nested wave-number counts. A
/// basis that cannot represent the dominant error mode reports too small an
/// amplitude, rarely too large a one, so the maximum is the safer estimate.
ScaleEstimate elm_estimate_scale_nested(const ProblemDef& problem, std::span<const double> source_at_collocation,
                                        const std::vector<ElmBasis>& bases, const Points& collocation,
                                        const Points& eval_grid);

ScaleEstimate elm_estimate_scale(const ProblemDef& problem, const ScalarField& source, const ElmBasis& basis,
                                 const Points& collocation, const Points& eval_grid);

} // namespace mlnn
