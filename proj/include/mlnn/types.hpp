#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace mlnn {

/// Largest spatial dimension handled by the library.
inline constexpr int kMaxDim = 2;

/// A set of points, one point per column (d x P).
using Points = Eigen::MatrixXd;

/// Coordinates of a single point (length d).
using PointRef = std::span<const double>;

using ScalarField = std::function<double(PointRef)>;

/// Any failure detected inside the numerical core.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown when a loss or gradient stops being finite during training.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

/// Value, gradient and diagonal of the Hessian of a scalar field at a point.
struct DerivativeBundle {
    int dim = 1;
    double value = 0.0;
    std::array<double, kMaxDim> grad{};
    std::array<double, kMaxDim> diag_hess{};
};

/// Bundles for a batch of points. grad and diag_hess are d x P.
struct BundleBatch {
    Eigen::VectorXd value;
    Eigen::MatrixXd grad;
    Eigen::MatrixXd diag_hess;

    [[nodiscard]] int dim() const { return static_cast<int>(grad.rows()); }
    [[nodiscard]] Eigen::Index size() const { return value.size(); }
    [[nodiscard]] DerivativeBundle at(Eigen::Index p) const;

    static BundleBatch zeros(int dim, Eigen::Index points);
};

inline DerivativeBundle BundleBatch::at(Eigen::Index p) const
{
    DerivativeBundle b;
    b.dim = dim();
    b.value = value(p);
    for (int j = 0; j < b.dim; ++j) {
        b.grad[j] = grad(j, p);
        b.diag_hess[j] = diag_hess(j, p);
    }
    return b;
}

inline BundleBatch BundleBatch::zeros(int dim, Eigen::Index points)
{
    BundleBatch b;
    b.value = Eigen::VectorXd::Zero(points);
    b.grad = Eigen::MatrixXd::Zero(dim, points);
    b.diag_hess = Eigen::MatrixXd::Zero(dim, points);
    return b;
}

/// Linear operator with constant coefficients acting on a bundle:
///   A u = c0 u + sum_j c1_j du/dx_j + sum_j c2_j d2u/dx_j2.
/// Every operator in scope (Poisson, convection-diffusion, Helmholtz) has
/// this form, and the coefficients double as the adjoint of A.
struct LinearOperator {
    double reaction = 0.0;
    std::array<double, kMaxDim> convection{};
    std::array<double, kMaxDim> diffusion{};

    [[nodiscard]] double apply(const DerivativeBundle& b) const
    {
        double v = reaction * b.value;
        for (int j = 0; j < b.dim; ++j) {
            v += convection[j] * b.grad[j] + diffusion[j] * b.diag_hess[j];
        }
        return v;
    }

    /// A applied to every point of a batch.
    [[nodiscard]] Eigen::VectorXd apply(const BundleBatch& b) const
    {
        Eigen::VectorXd v = reaction * b.value;
        for (int j = 0; j < b.dim(); ++j) {
            v += convection[j] * b.grad.row(j).transpose() + diffusion[j] * b.diag_hess.row(j).transpose();
        }
        return v;
    }
};

/// Affine function offset + slope . x added to a trial to meet
/// non-homogeneous Dirichlet data.
struct AffineLift {
    double offset = 0.0;
    std::array<double, kMaxDim> slope{};

    [[nodiscard]] double value(PointRef x) const
    {
        double v = offset;
        for (std::size_t j = 0; j < x.size(); ++j) {
            v += slope[j] * x[j];
        }
        return v;
    }

    [[nodiscard]] AffineLift scaled(double factor) const
    {
        AffineLift out = *this;
        out.offset *= factor;
        for (auto& s : out.slope) {
            s *= factor;
        }
        return out;
    }
};

/// Column p of a point matrix as a coordinate span.
inline PointRef point_at(const Points& points, Eigen::Index p)
{
    return {points.col(p).data(), static_cast<std::size_t>(points.rows())};
}

/// Midpoint-rule grid on (0, length)^dim with `per_axis` cells per axis.
/// Points are ordered with the first coordinate varying fastest.
Points midpoint_grid(int dim, int per_axis, double length);

} // namespace mlnn
