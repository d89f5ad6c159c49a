#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mlnn/model.hpp"
#include "mlnn/types.hpp"

namespace mlnn {

/// Exact squared-residual loss and its parameter gradient.
struct LossReport {
    double loss = 0.0;
    Eigen::VectorXd gradient;
};

/// Evaluates a trial function and its spatial derivatives on a fixed point
/// set, and back-propagates residual losses through it.
///
/// Every quantity that does not depend on the parameters (Fourier features,
/// boundary factor and their derivatives) is computed once at construction.
/// Points are processed in fixed-size chunks whose partial sums are reduced
/// in chunk order, so results do not depend on the thread count.
///
/// Channel layout inside a chunk of P points in d dimensions: columns
/// [0, P) hold values, [(1+j)P, (2+j)P) the x_j derivatives and
/// [(1+d+j)P, (2+d+j)P) the second x_j derivatives.
///
/// An evaluator owns scratch buffers; calls on one instance must not overlap.
class TrialEvaluator {
public:
    static constexpr Eigen::Index kChunkPoints = 256;

    TrialEvaluator(NetworkSpec spec, Points points, std::optional<AffineLift> lift = std::nullopt);
    ~TrialEvaluator();
    TrialEvaluator(TrialEvaluator&&) noexcept;
    TrialEvaluator& operator=(TrialEvaluator&&) noexcept;

    [[nodiscard]] const NetworkSpec& spec() const { return spec_; }
    [[nodiscard]] const Points& points() const { return points_; }
    [[nodiscard]] Eigen::Index num_points() const { return points_.cols(); }

    /// Value, gradient and diagonal Hessian of the trial at every point.
    [[nodiscard]] BundleBatch evaluate(const ParamVector& params) const;

    /// R(p) = mu * source(p) - (A u)(p) at every point.
    [[nodiscard]] Eigen::VectorXd residuals(const LinearOperator& op, std::span<const double> source,
                                            double mu, const ParamVector& params) const;

    /// loss = mean_p R(p)^2 and its exact gradient with respect to params.
    [[nodiscard]] LossReport loss_and_gradient(const LinearOperator& op, std::span<const double> source,
                                               double mu, const ParamVector& params) const;

private:
    struct Chunk;
    struct Workspace;

    void check_params(const ParamVector& params) const;
    void forward(const Chunk& chunk, Workspace& work, const ParamVector& params) const;
    void assemble(const Chunk& chunk, Workspace& work, BundleBatch& out) const;
    void backward(const Chunk& chunk, Workspace& work, const ParamVector& params,
                  const BundleBatch& seed, Eigen::VectorXd& gradient) const;

    NetworkSpec spec_;
    Points points_;
    std::optional<AffineLift> lift_;
    std::vector<LayerShape> layers_;
    std::vector<Chunk> chunks_;
    mutable std::vector<Workspace> work_;
};

} // namespace mlnn
